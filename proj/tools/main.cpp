// ppkcal command-line frontend: calibrate, scan, tune-eta, replicate, bayes.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ppkcal/bayes.hpp"
#include "ppkcal/bench.hpp"
#include "ppkcal/optimize.hpp"
#include "ppkcal/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ppkcal;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
  }
  fs::rename(tmp, path);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  CsvTable table;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      while (std::getline(ss, cell, ',')) table.header.push_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric cell '" + cell + "' in " + path);
      }
    }
    if (row.size() != table.header.size()) {
      throw ConfigError("ragged row in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ConfigError("empty CSV: " + path);
  table.values.resize(static_cast<int>(rows.size()), static_cast<int>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return table;
}

BoxDomain box_from_json(const json& j, const std::string& what) {
  if (!j.contains("lo") || !j.contains("hi")) {
    throw ConfigError(what + ": expected {\"lo\": [...], \"hi\": [...]}");
  }
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  if (lo.size() != hi.size() || lo.empty()) {
    throw ConfigError(what + ": lo/hi size mismatch");
  }
  BoxDomain box;
  box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<int>(lo.size()));
  box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<int>(hi.size()));
  for (int k = 0; k < box.dim(); ++k) {
    if (!(box.lo[k] < box.hi[k])) throw ConfigError(what + ": lo must be < hi");
  }
  return box;
}

json box_to_json(const BoxDomain& box) {
  json j;
  for (int k = 0; k < box.dim(); ++k) {
    j["lo"].push_back(box.lo[k]);
    j["hi"].push_back(box.hi[k]);
  }
  return j;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (int k = 0; k < v.size(); ++k) j.push_back(v[k]);
  return j;
}

/// Kernel ridge interpolator over tabulated (x, theta, y) rows; the
/// surrogate path for user-supplied computer models.
ComputerModel tabulated_model(const CsvTable& table, const BoxDomain& design,
                              const BoxDomain& params, const KernelSpec& kernel,
                              double ridge) {
  const int d = design.dim(), q = params.dim();
  if (static_cast<int>(table.header.size()) != d + q + 1) {
    throw ConfigError("tabulated model CSV needs d + q + 1 columns (x1..xd,theta1..thetaq,y)");
  }
  auto Z = std::make_shared<Eigen::MatrixXd>(table.values.leftCols(d + q));
  const Eigen::VectorXd y = table.values.rightCols(1);
  const int m = static_cast<int>(Z->rows());
  Eigen::MatrixXd gram = kernel_gram(kernel, *Z);
  gram.diagonal().array() += m * ridge;
  auto coef = std::make_shared<Eigen::VectorXd>(safe_cholesky(gram).solve(y));
  auto spec = std::make_shared<KernelSpec>(kernel);
  ComputerModel::Eval eval = [Z, coef, spec, d, q](const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& theta) {
    Eigen::VectorXd z(d + q);
    z.head(d) = x;
    z.tail(q) = theta;
    double acc = 0.0;
    for (int i = 0; i < Z->rows(); ++i) {
      acc += (*coef)[i] * matern_eval(*spec, (Z->row(i).transpose() - z).norm());
    }
    return acc;
  };
  return make_computer_model(std::move(eval), nullptr, design, params);
}

struct Session {
  PhysicalData data;
  ComputerModel model;
  KernelSpec kernel{0.5, 1.0};
  QuadratureSet quad;
  std::optional<Benchmark> bench;
  std::uint64_t seed = 0;
  std::uint64_t quad_seed = 0;
  std::string lambda_policy = "cv";  // cv | fixed
  double lambda_fixed = 0.0;
  std::optional<double> lambda_scale_fixed;
  std::string eta_policy = "bic-nlo";  // fixed | zero | bic-nlo | bic-amp
  double eta_fixed = 0.0;
  OptimizerConfig opt;
  json resolved;
};

int worker_cap() {
  const char* env = std::getenv("PPK_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v > 0 ? v : 1;
}

Session build_session(const json& cfg, std::optional<std::uint64_t> seed_flag) {
  Session s;
  s.seed = seed_flag ? *seed_flag : cfg.value("seed", 0ULL);
  s.opt.seed = s.seed;
  if (cfg.contains("optimizer")) {
    const json& o = cfg.at("optimizer");
    s.opt.starts = o.value("starts", s.opt.starts);
    s.opt.max_evals = o.value("max_evals", s.opt.max_evals);
    s.opt.loss_tol = o.value("loss_tol", s.opt.loss_tol);
    s.opt.theta_tol = o.value("theta_tol", s.opt.theta_tol);
  }

  int quad_size = 0;
  if (cfg.contains("benchmark")) {
    s.bench = builtin_benchmark(cfg.at("benchmark").get<std::string>());
    s.model = s.bench->model;
    s.kernel = s.bench->kernel;
    quad_size = s.bench->default_quad_size;
    if (cfg.contains("dataset")) {
      const CsvTable t = read_csv(cfg.at("dataset").get<std::string>());
      const int d = s.model.design_domain.dim();
      if (static_cast<int>(t.header.size()) != d + 1) {
        throw ConfigError("dataset CSV needs columns x1..xd,y");
      }
      s.data.X = t.values.leftCols(d);
      s.data.y = t.values.rightCols(1);
      s.data.noise_sd = s.bench->noise_sd;
    } else {
      const int n = cfg.value("n", 100);
      if (n < 2) throw ConfigError("n must be >= 2");
      s.data = benchmark_data(*s.bench, n, s.seed);
    }
  } else {
    if (!cfg.contains("dataset") || !cfg.contains("model")) {
      throw ConfigError("config needs either \"benchmark\" or \"dataset\" + \"model\"");
    }
    const json& m = cfg.at("model");
    const BoxDomain design = box_from_json(m.at("design_domain"), "model.design_domain");
    const BoxDomain params = box_from_json(m.at("param_domain"), "model.param_domain");
    if (m.value("type", "tabulated") != "tabulated") {
      throw ConfigError("unknown model type (use a builtin benchmark or \"tabulated\")");
    }
    if (!cfg.contains("kernel")) throw ConfigError("config needs \"kernel\" for tabulated models");
    KernelSpec sk{cfg.at("kernel").value("nu", 2.5), cfg.at("kernel").value("rho", 1.0)};
    s.model = tabulated_model(read_csv(m.at("table").get<std::string>()), design, params, sk,
                              m.value("ridge", 1e-6));
    const CsvTable t = read_csv(cfg.at("dataset").get<std::string>());
    const int d = design.dim();
    if (static_cast<int>(t.header.size()) != d + 1) {
      throw ConfigError("dataset CSV needs columns x1..xd,y");
    }
    s.data.X = t.values.leftCols(d);
    s.data.y = t.values.rightCols(1);
  }
  validate_physical_data(s.data, s.model.design_domain);

  bool rho_mle = s.bench && s.bench->estimate_rho;
  if (cfg.contains("kernel")) {
    const json& k = cfg.at("kernel");
    s.kernel.nu = k.value("nu", s.kernel.nu);
    if (k.contains("rho")) {
      if (k.at("rho").is_string()) {
        if (k.at("rho").get<std::string>() != "mle") throw ConfigError("kernel.rho: number or \"mle\"");
        rho_mle = true;
      } else {
        s.kernel.rho = k.at("rho").get<double>();
        rho_mle = false;
      }
    }
    if (!(s.kernel.nu > 0.0) || !(s.kernel.rho > 0.0)) {
      throw ConfigError("kernel.nu and kernel.rho must be positive");
    }
  }

  s.quad_seed = s.seed ^ 0x9e3779b97f4a7c15ULL;
  if (cfg.contains("quadrature")) {
    quad_size = cfg.at("quadrature").value("size", quad_size);
    s.quad_seed = cfg.at("quadrature").value("seed", s.quad_seed);
  }
  if (quad_size <= 0) quad_size = 2000;
  s.quad = uniform_quadrature(s.model.design_domain, quad_size, s.quad_seed);

  if (rho_mle) {
    const CalibrationResult ls = calibrate_ls(s.data, s.model, s.opt);
    s.kernel.rho = estimate_rho_mle(s.data, s.model, ls.theta, s.kernel.nu);
  }

  if (cfg.contains("lambda")) {
    const json& l = cfg.at("lambda");
    s.lambda_policy = l.value("policy", std::string("cv"));
    if (s.lambda_policy == "fixed") {
      if (l.contains("value")) {
        s.lambda_fixed = l.at("value").get<double>();
      } else if (l.contains("scale")) {
        s.lambda_scale_fixed = l.at("scale").get<double>();
        s.lambda_fixed = lambda_from_scale(*s.lambda_scale_fixed, s.data.n(), s.kernel.nu,
                                           s.model.design_domain.dim());
      } else {
        throw ConfigError("lambda.policy=fixed needs \"value\" or \"scale\"");
      }
      if (!(s.lambda_fixed > 0.0)) throw ConfigError("lambda must be positive");
    } else if (s.lambda_policy != "cv") {
      throw ConfigError("lambda.policy: \"fixed\" or \"cv\"");
    }
  }
  if (cfg.contains("eta")) {
    const json& e = cfg.at("eta");
    s.eta_policy = e.value("policy", std::string("bic-nlo"));
    if (s.eta_policy == "fixed") {
      if (!e.contains("value")) throw ConfigError("eta.policy=fixed needs \"value\"");
      s.eta_fixed = e.at("value").get<double>();
      if (s.eta_fixed < 0.0) throw ConfigError("eta must be nonnegative");
    } else if (s.eta_policy != "zero" && s.eta_policy != "bic-nlo" && s.eta_policy != "bic-amp") {
      throw ConfigError("eta.policy: fixed | zero | bic-nlo | bic-amp");
    }
  }

  // resolved config echoed into every output
  s.resolved = cfg;
  s.resolved["seed"] = s.seed;
  s.resolved["kernel"] = {{"nu", s.kernel.nu}, {"rho", s.kernel.rho}};
  s.resolved["quadrature"] = {{"size", s.quad.size()}, {"seed", s.quad_seed}};
  s.resolved["n"] = s.data.n();
  s.resolved["threads"] = worker_cap();
  return s;
}

double resolve_lambda(Session& s, CalibrationProblem& problem, const Eigen::VectorXd& theta0) {
  if (s.lambda_policy == "fixed") return s.lambda_fixed;
  const double scale = select_lambda_scale(problem, theta0, std::min(10, s.data.n()), {}, s.seed);
  s.lambda_scale_fixed = scale;
  return lambda_from_scale(scale, s.data.n(), s.kernel.nu, s.model.design_domain.dim());
}

std::string csv_prologue(const json& resolved) {
  return "# config: " + resolved.dump() + "\n";
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const json& cfg, std::optional<std::uint64_t> seed_flag,
                  const std::string& method, const std::string& index,
                  const std::string& out_dir) {
  Session s = build_session(cfg, seed_flag);
  CalibrationResult res;
  json diagnostics;
  if (method == "ls") {
    res = calibrate_ls(s.data, s.model, s.opt);
  } else {
    CalibrationProblem problem(s.data, s.model, s.kernel, s.quad);
    const CalibrationResult ls = calibrate_ls(s.data, s.model, s.opt);
    const double lambda = resolve_lambda(s, problem, ls.theta);
    if (method == "l2") {
      res = calibrate_l2_plugin(s.data, s.model, s.kernel, lambda, s.quad, s.opt);
    } else if (method == "pk") {
      std::optional<BoxDomain> search;
      if (cfg.contains("search_domain")) {
        search = box_from_json(cfg.at("search_domain"), "search_domain");
      }
      res = calibrate_pk(problem, lambda, s.opt, search);
    } else if (method == "ppk") {
      PpkOptions opt;
      opt.index = (index == "amp" || s.eta_policy == "bic-amp") ? RiKind::Amp : RiKind::Nlo;
      if (!index.empty()) opt.index = index == "amp" ? RiKind::Amp : RiKind::Nlo;
      opt.fixed_lambda_scale = s.lambda_scale_fixed;
      if (s.eta_policy == "zero") opt.fixed_eta = 0.0;
      if (s.eta_policy == "fixed") opt.fixed_eta = s.eta_fixed;
      res = calibrate_ppk(problem, s.opt, opt);
    } else {
      throw ConfigError("unknown method: " + method);
    }
    diagnostics["cache_hits"] = problem.engine().cache_hits();
    if (res.fit) diagnostics["jitter"] = res.fit->jitter;
  }
  diagnostics["starts"] = static_cast<int>(res.traces.size());
  int evals = 0;
  for (const auto& t : res.traces) evals += t.evals;
  diagnostics["loss_evals"] = evals;
  diagnostics["rho"] = s.kernel.rho;

  json out;
  out["schema_version"] = 1;
  out["method"] = res.method;
  out["theta_hat"] = vec_to_json(res.theta);
  out["lambda"] = res.lambda;
  out["eta"] = res.eta;
  out["loss"] = res.value;
  out["seeds"] = {{"data", s.seed}, {"quadrature", s.quad_seed}, {"optimizer", s.opt.seed}};
  out["diagnostics"] = diagnostics;
  out["config"] = s.resolved;
  atomic_write(fs::path(out_dir) / "result.json", out.dump(2) + "\n");
  std::cout << "theta_hat =";
  for (int k = 0; k < res.theta.size(); ++k) std::cout << " " << fmt(res.theta[k]);
  std::cout << "  (" << res.method << ", loss " << fmt(res.value) << ")\n";
  return 0;
}

int cmd_scan(const json& cfg, std::optional<std::uint64_t> seed_flag,
             const std::string& loss_kind, int resolution, const std::string& out_dir) {
  Session s = build_session(cfg, seed_flag);
  const int q = s.model.param_domain.dim();
  if (q > 2) throw ConfigError("scan supports q <= 2 only");
  if (resolution < 3) throw ConfigError("resolution must be >= 3");

  CalibrationProblem problem(s.data, s.model, s.kernel, s.quad);
  Eigen::VectorXd truth_nodes;
  if (loss_kind == "l2" || loss_kind == "pkl2") {
    if (!s.bench) throw ConfigError("loss '" + loss_kind + "' needs a builtin benchmark (known truth)");
    truth_nodes = eval_at_nodes(s.bench->truth, s.quad);
  }
  double lambda = 0.0, eta = 0.0;
  if (loss_kind == "pk" || loss_kind == "ppk") {
    const CalibrationResult ls = calibrate_ls(s.data, s.model, s.opt);
    lambda = resolve_lambda(s, problem, ls.theta);
    if (loss_kind == "ppk") {
      if (s.eta_policy == "fixed") {
        eta = s.eta_fixed;
      } else if (s.eta_policy != "zero") {
        const RiKind kind = s.eta_policy == "bic-amp" ? RiKind::Amp : RiKind::Nlo;
        eta = select_eta(problem, lambda, kind, default_eta_grid(), s.opt).eta;
      }
    }
  }
  LossFn loss;
  if (loss_kind == "l2") {
    loss = [&](const Eigen::VectorXd& t) { return l2_loss(truth_nodes, s.model, t, s.quad); };
  } else if (loss_kind == "pkl2") {
    loss = [&](const Eigen::VectorXd& t) { return pkl2_loss(truth_nodes, problem.engine(), t, 0.0); };
  } else if (loss_kind == "ls") {
    loss = [&](const Eigen::VectorXd& t) {
      return problem.residuals(t).squaredNorm() / s.data.n();
    };
  } else if (loss_kind == "pk") {
    loss = [&](const Eigen::VectorXd& t) { return problem.pk_loss(t, lambda); };
  } else if (loss_kind == "ppk") {
    loss = [&](const Eigen::VectorXd& t) { return problem.ppk_loss(t, lambda, eta); };
  } else {
    throw ConfigError("unknown loss kind: " + loss_kind + " (use l2|pkl2|ls|pk|ppk)");
  }

  const LandscapeScan result = scan(loss, s.model.param_domain, resolution);

  std::ostringstream grid_csv;
  grid_csv << csv_prologue(s.resolved);
  grid_csv << (q == 1 ? "theta1,raw,scaled\n" : "theta1,theta2,raw,scaled\n");
  for (int i = 0; i < result.grid.rows(); ++i) {
    for (int k = 0; k < q; ++k) grid_csv << fmt(result.grid(i, k)) << ",";
    grid_csv << fmt(result.raw[i]) << "," << fmt(result.scaled[i]) << "\n";
  }
  atomic_write(fs::path(out_dir) / "scan.csv", grid_csv.str());

  std::ostringstream st_csv;
  st_csv << csv_prologue(s.resolved);
  st_csv << (q == 1 ? "theta1,value,kind\n" : "theta1,theta2,value,kind\n");
  for (const auto& p : result.stationary) {
    for (int k = 0; k < q; ++k) st_csv << fmt(p.theta[k]) << ",";
    const char* kind = p.kind == StationaryPoint::Kind::Min
                           ? "min"
                           : p.kind == StationaryPoint::Kind::Max ? "max" : "unknown";
    st_csv << fmt(p.value) << "," << kind << "\n";
  }
  atomic_write(fs::path(out_dir) / "stationary.csv", st_csv.str());
  std::cout << "scan: " << result.grid.rows() << " grid points, "
            << result.stationary.size() << " stationary points\n";
  return 0;
}

int cmd_tune_eta(const json& cfg, std::optional<std::uint64_t> seed_flag,
                 const std::string& index, const std::string& out_dir) {
  Session s = build_session(cfg, seed_flag);
  CalibrationProblem problem(s.data, s.model, s.kernel, s.quad);
  const CalibrationResult ls = calibrate_ls(s.data, s.model, s.opt);
  const double lambda = resolve_lambda(s, problem, ls.theta);
  RiKind kind = s.eta_policy == "bic-amp" ? RiKind::Amp : RiKind::Nlo;
  if (!index.empty()) kind = index == "amp" ? RiKind::Amp : RiKind::Nlo;
  std::vector<double> grid = default_eta_grid();
  if (cfg.contains("eta") && cfg.at("eta").contains("grid")) {
    grid = cfg.at("eta").at("grid").get<std::vector<double>>();
    if (grid.empty()) throw ConfigError("eta.grid must be nonempty");
  }
  const EtaSelection sel = select_eta(problem, lambda, kind, grid, s.opt);

  const int q = s.model.param_domain.dim();
  std::ostringstream csv;
  csv << csv_prologue(s.resolved);
  csv << "eta,ri,bic";
  for (int k = 1; k <= q; ++k) csv << ",theta_hat_" << k;
  csv << "\n";
  for (const auto& c : sel.trace) {
    csv << fmt(c.eta) << "," << fmt(c.ri) << "," << fmt(c.bic);
    for (int k = 0; k < q; ++k) csv << "," << fmt(c.theta[k]);
    csv << "\n";
  }
  atomic_write(fs::path(out_dir) / "eta_trace.csv", csv.str());

  json out;
  out["schema_version"] = 1;
  out["eta"] = sel.eta;
  out["index"] = kind == RiKind::Amp ? "amp" : "nlo";
  out["lambda"] = lambda;
  out["config"] = s.resolved;
  atomic_write(fs::path(out_dir) / "eta_selection.json", out.dump(2) + "\n");
  std::cout << "selected eta = " << fmt(sel.eta) << "\n";
  return 0;
}

int cmd_replicate(const std::string& plan_path, std::optional<std::uint64_t> seed_flag,
                  const std::string& out_dir, bool check_assertions) {
  const json plan_json = load_json_file(plan_path);
  ReplicationPlan plan;
  try {
    plan.benchmark = plan_json.at("benchmark").get<std::string>();
    plan.sample_sizes = plan_json.at("sample_sizes").get<std::vector<int>>();
    for (const auto& m : plan_json.at("methods")) {
      plan.methods.push_back(method_from_name(m.get<std::string>()));
    }
    plan.replications = plan_json.value("replications", 20);
    plan.base_seed = plan_json.value("base_seed", 0ULL);
    plan.quad_size = plan_json.value("quad_size", 0);
    if (plan_json.contains("pk_search_domain")) {
      plan.pk_search_box = box_from_json(plan_json.at("pk_search_domain"), "pk_search_domain");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad replication plan: ") + e.what());
  }
  if (seed_flag) plan.base_seed = *seed_flag;

  const ReplicationSummary summary = run_plan(plan);
  json resolved = plan_json;
  resolved["base_seed"] = plan.base_seed;
  resolved["theta_star"] = vec_to_json(summary.theta_star);

  const int q = static_cast<int>(summary.theta_star.size());
  std::ostringstream csv;
  csv << csv_prologue(resolved);
  csv << "method,n,replication";
  for (int k = 1; k <= q; ++k) csv << ",theta_hat_" << k;
  csv << ",loss_value\n";
  for (const auto& rec : summary.records) {
    csv << method_name(rec.method) << "," << rec.n << "," << rec.replication;
    if (rec.failed) {
      for (int k = 0; k < q; ++k) csv << ",nan";
      csv << ",nan\n";
    } else {
      for (int k = 0; k < q; ++k) csv << "," << fmt(rec.theta_hat[k]);
      csv << "," << fmt(rec.loss_value) << "\n";
    }
  }
  atomic_write(fs::path(out_dir) / "replications.csv", csv.str());

  std::ostringstream sum_csv;
  sum_csv << csv_prologue(resolved);
  sum_csv << "method,n";
  for (int k = 1; k <= q; ++k) sum_csv << ",median_" << k;
  for (int k = 1; k <= q; ++k) sum_csv << ",iqr_" << k;
  for (int k = 1; k <= q; ++k) sum_csv << ",bias_" << k;
  sum_csv << ",rmse,failures\n";
  for (const auto& [key, cell] : summary.cells) {
    sum_csv << key.first << "," << key.second;
    if (cell.estimates.empty()) {
      for (int k = 0; k < 3 * q + 1; ++k) sum_csv << ",nan";
      sum_csv << "," << cell.failures << "\n";
      continue;
    }
    for (int k = 0; k < q; ++k) sum_csv << "," << fmt(cell.median[k]);
    for (int k = 0; k < q; ++k) sum_csv << "," << fmt(cell.iqr[k]);
    for (int k = 0; k < q; ++k) sum_csv << "," << fmt(cell.bias[k]);
    sum_csv << "," << fmt(cell.rmse) << "," << cell.failures << "\n";
  }
  atomic_write(fs::path(out_dir) / "summary.csv", sum_csv.str());

  std::cout << "theta_star =";
  for (int k = 0; k < q; ++k) std::cout << " " << fmt(summary.theta_star[k]);
  std::cout << "; " << summary.records.size() << " records\n";

  if (check_assertions) {
    // consistency: RMSE shrinks from the smallest n to the largest for every
    // method with at least two sample sizes
    std::set<int> sizes(plan.sample_sizes.begin(), plan.sample_sizes.end());
    bool ok = true;
    if (sizes.size() >= 2) {
      const int n_lo = *sizes.begin();
      const int n_hi = *sizes.rbegin();
      for (const Method m : plan.methods) {
        if (m == Method::Pk && !plan.pk_search_box) continue;  // known pathology
        const auto lo = summary.cells.find({method_name(m), n_lo});
        const auto hi = summary.cells.find({method_name(m), n_hi});
        if (lo == summary.cells.end() || hi == summary.cells.end()) continue;
        if (lo->second.estimates.empty() || hi->second.estimates.empty()) continue;
        if (!(hi->second.rmse < lo->second.rmse)) {
          std::cerr << "assert failed: " << method_name(m) << " RMSE(n=" << n_hi
                    << ")=" << fmt(hi->second.rmse) << " not below RMSE(n=" << n_lo
                    << ")=" << fmt(lo->second.rmse) << "\n";
          ok = false;
        }
      }
    }
    if (!ok) return 2;
    std::cout << "assertions passed\n";
  }
  return 0;
}

int cmd_bayes(const json& cfg, std::optional<std::uint64_t> seed_flag,
              const std::string& out_dir) {
  Session s = build_session(cfg, seed_flag);
  CalibrationProblem problem(s.data, s.model, s.kernel, s.quad);
  const CalibrationResult ls = calibrate_ls(s.data, s.model, s.opt);
  const double lambda = resolve_lambda(s, problem, ls.theta);
  double gamma = 0.0;
  if (cfg.contains("gamma")) {
    gamma = cfg.at("gamma").get<double>();
  } else if (s.eta_policy == "fixed") {
    gamma = s.eta_fixed / lambda;
  } else if (s.eta_policy == "bic-nlo" || s.eta_policy == "bic-amp") {
    const RiKind kind = s.eta_policy == "bic-amp" ? RiKind::Amp : RiKind::Nlo;
    gamma = select_eta(problem, lambda, kind, default_eta_grid(), s.opt).eta / lambda;
  }
  if (gamma < 0.0) throw ConfigError("gamma must be nonnegative");
  const int iterations = cfg.value("iterations", 50000);
  const int burn_in = cfg.value("burn_in", 5000);
  if (iterations <= burn_in || burn_in < 0) {
    throw ConfigError("need iterations > burn_in >= 0");
  }

  PosteriorSpec spec{&problem, lambda, gamma};
  const Eigen::VectorXd init = ls.theta;
  const PosteriorChain chain = sample(spec, iterations, burn_in, s.seed, &init);

  const int q = static_cast<int>(chain.samples.cols());
  std::ostringstream csv;
  csv << csv_prologue(s.resolved);
  for (int k = 1; k <= q; ++k) csv << "theta" << k << ",";
  csv << "log_density\n";
  for (int i = 0; i < chain.samples.rows(); ++i) {
    for (int k = 0; k < q; ++k) csv << fmt(chain.samples(i, k)) << ",";
    csv << fmt(chain.log_density[i]) << "\n";
  }
  atomic_write(fs::path(out_dir) / "chain.csv", csv.str());

  // degenerate-chain guard
  std::set<std::vector<double>> distinct;
  for (int i = 0; i < chain.samples.rows() && distinct.size() < 100; ++i) {
    std::vector<double> row(q);
    for (int k = 0; k < q; ++k) row[k] = chain.samples(i, k);
    distinct.insert(std::move(row));
  }
  if (distinct.size() < 100) {
    std::cerr << "warning: too few effective samples (" << distinct.size()
              << " distinct states); posterior summaries unreliable\n";
  }

  const auto intervals = credible_interval(chain, cfg.value("level", 0.95));
  json out;
  out["schema_version"] = 1;
  out["level"] = cfg.value("level", 0.95);
  out["lambda"] = lambda;
  out["gamma"] = gamma;
  out["acceptance_rate"] = chain.acceptance_rate;
  for (const auto& [lo, hi] : intervals) {
    out["intervals"].push_back({lo, hi});
  }
  out["seeds"] = {{"data", s.seed}, {"quadrature", s.quad_seed}, {"chain", s.seed}};
  out["config"] = s.resolved;
  atomic_write(fs::path(out_dir) / "intervals.json", out.dump(2) + "\n");
  std::cout << "chain: " << chain.samples.rows() << " draws, acceptance "
            << fmt(chain.acceptance_rate) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized projected-kernel calibration"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", method = "ppk", index, loss_kind = "l2",
              plan_path;
  int resolution = 300;
  bool check_assertions = false;
  std::optional<std::uint64_t> seed_flag;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", config_path, "JSON config file");
    if (needs_config) c->required();
    cmd->add_option("--seed", seed_value, "override the config seed")
        ->each([&](const std::string&) { seed_flag = seed_value; });
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* calibrate = app.add_subcommand("calibrate", "estimate the calibration parameter");
  add_common(calibrate, true);
  calibrate->add_option("--method", method, "ls|l2|pk|ppk")
      ->check(CLI::IsMember({"ls", "l2", "pk", "ppk"}));
  calibrate->add_option("--index", index, "nlo|amp (ppk only)")
      ->check(CLI::IsMember({"nlo", "amp"}));

  CLI::App* scan_cmd = app.add_subcommand("scan", "loss landscape over the parameter box");
  add_common(scan_cmd, true);
  scan_cmd->add_option("--loss", loss_kind, "l2|pkl2|ls|pk|ppk");
  scan_cmd->add_option("--resolution", resolution, "grid points per axis");

  CLI::App* tune = app.add_subcommand("tune-eta", "trace the BIC rule over the eta grid");
  add_common(tune, true);
  tune->add_option("--index", index, "nlo|amp")->check(CLI::IsMember({"nlo", "amp"}));

  CLI::App* repl = app.add_subcommand("replicate", "repeated synthetic-data calibrations");
  repl->add_option("--config", plan_path, "replication plan JSON")->required();
  repl->add_option("--seed", seed_value, "override the plan base seed")
      ->each([&](const std::string&) { seed_flag = seed_value; });
  repl->add_option("--out", out_dir, "output directory");
  repl->add_flag("--assert", check_assertions, "check consistency invariants");

  CLI::App* bayes = app.add_subcommand("bayes", "posterior sampling under the penalized prior");
  add_common(bayes, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) {
      return cmd_calibrate(load_json_file(config_path), seed_flag, method, index, out_dir);
    }
    if (scan_cmd->parsed()) {
      return cmd_scan(load_json_file(config_path), seed_flag, loss_kind, resolution, out_dir);
    }
    if (tune->parsed()) {
      return cmd_tune_eta(load_json_file(config_path), seed_flag, index, out_dir);
    }
    if (repl->parsed()) {
      return cmd_replicate(plan_path, seed_flag, out_dir, check_assertions);
    }
    if (bayes->parsed()) {
      return cmd_bayes(load_json_file(config_path), seed_flag, out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
