#include "ppkcal/bench.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppkcal {

std::string method_name(Method m) {
  switch (m) {
    case Method::Ls: return "ls";
    case Method::L2Plugin: return "l2";
    case Method::Pk: return "pk";
    case Method::PpkNlo: return "ppk-nlo";
    case Method::PpkAmp: return "ppk-amp";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "ls") return Method::Ls;
  if (name == "l2") return Method::L2Plugin;
  if (name == "pk") return Method::Pk;
  if (name == "ppk-nlo") return Method::PpkNlo;
  if (name == "ppk-amp") return Method::PpkAmp;
  throw std::invalid_argument("unknown method '" + name + "'");
}

Eigen::VectorXd theta_star_oracle(const Benchmark& bench, int grid_resolution,
                                  int quad_size, std::uint64_t quad_seed) {
  const QuadratureSet quad =
      uniform_quadrature(bench.model.design_domain, quad_size, quad_seed);
  const Eigen::VectorXd truth_nodes = eval_at_nodes(bench.truth, quad);
  LossFn loss = [&](const Eigen::VectorXd& theta) {
    return l2_loss(truth_nodes, bench.model, theta, quad);
  };
  const BoxDomain& box = bench.model.param_domain;
  const int q = box.dim();
  // dense grid pass
  Eigen::VectorXd best;
  double best_val = std::numeric_limits<double>::infinity();
  if (q == 1) {
    for (int i = 0; i < grid_resolution; ++i) {
      Eigen::VectorXd t(1);
      t[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (grid_resolution - 1);
      const double v = loss(t);
      if (v < best_val) {
        best_val = v;
        best = t;
      }
    }
  } else if (q == 2) {
    for (int i = 0; i < grid_resolution; ++i) {
      for (int j = 0; j < grid_resolution; ++j) {
        Eigen::VectorXd t(2);
        t[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (grid_resolution - 1);
        t[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * j / (grid_resolution - 1);
        const double v = loss(t);
        if (v < best_val) {
          best_val = v;
          best = t;
        }
      }
    }
  } else {
    throw std::invalid_argument("theta_star_oracle: q <= 2 only");
  }
  // polish
  OptimizerConfig cfg;
  cfg.starts = 1;
  cfg.max_evals = 2000;
  StartTrace polished;
  {
    // tight local box around the grid winner
    BoxDomain local = box;
    const Eigen::VectorXd pad =
        2.0 * (box.hi - box.lo) / static_cast<double>(grid_resolution - 1);
    local.lo = (best - pad).cwiseMax(box.lo);
    local.hi = (best + pad).cwiseMin(box.hi);
    CalibrationResult res = minimize(loss, local, OptimizerConfig{1, 1e-12, 1e-9, 2000, 0});
    return res.theta;
  }
}

namespace {

Eigen::VectorXd column_quantile(const std::vector<Eigen::VectorXd>& pts, double p) {
  const int q = static_cast<int>(pts.front().size());
  Eigen::VectorXd out(q);
  for (int j = 0; j < q; ++j) {
    std::vector<double> v;
    v.reserve(pts.size());
    for (const auto& t : pts) v.push_back(t[j]);
    std::sort(v.begin(), v.end());
    const double pos = p * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    out[j] = i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v.back();
  }
  return out;
}

}  // namespace

ReplicationSummary run_plan(const ReplicationPlan& plan) {
  if (plan.replications < 1) throw std::invalid_argument("run_plan: R >= 1 required");
  if (plan.methods.empty()) throw std::invalid_argument("run_plan: methods must be nonempty");
  const Benchmark bench = builtin_benchmark(plan.benchmark);
  const int quad_size = plan.quad_size > 0 ? plan.quad_size : bench.default_quad_size;
  const QuadratureSet quad =
      uniform_quadrature(bench.model.design_domain, quad_size, plan.base_seed ^ 0xabcdu);

  ReplicationSummary summary;
  summary.theta_star = theta_star_oracle(bench, bench.model.param_domain.dim() == 1 ? 512 : 96,
                                         std::max(quad_size, 50000));

  for (int n : plan.sample_sizes) {
    for (int r = 0; r < plan.replications; ++r) {
      const std::uint64_t seed = plan.base_seed + static_cast<std::uint64_t>(r);
      const PhysicalData data = benchmark_data(bench, n, seed);
      OptimizerConfig cfg;
      cfg.seed = seed;

      // shared per-replication pieces
      CalibrationResult ls;
      bool have_ls = false;
      KernelSpec kernel = bench.kernel;
      std::unique_ptr<CalibrationProblem> problem;
      double lambda = -1.0;

      auto ensure_ls = [&]() -> const CalibrationResult& {
        if (!have_ls) {
          ls = calibrate_ls(data, bench.model, cfg);
          have_ls = true;
        }
        return ls;
      };
      auto ensure_problem = [&]() -> CalibrationProblem& {
        if (!problem) {
          if (bench.estimate_rho) {
            kernel.rho = estimate_rho_mle(data, bench.model, ensure_ls().theta, kernel.nu);
          }
          problem = std::make_unique<CalibrationProblem>(data, bench.model, kernel, quad);
        }
        return *problem;
      };
      auto ensure_lambda = [&]() {
        if (lambda < 0.0) {
          const double scale = select_lambda_scale(
              ensure_problem(), ensure_ls().theta,
              std::min(10, data.n()), {}, seed);
          lambda = lambda_from_scale(scale, data.n(), kernel.nu,
                                     bench.model.design_domain.dim());
        }
        return lambda;
      };

      for (Method m : plan.methods) {
        ReplicationRecord rec;
        rec.method = m;
        rec.n = n;
        rec.replication = r;
        try {
          CalibrationResult res;
          switch (m) {
            case Method::Ls:
              res = ensure_ls();
              break;
            case Method::L2Plugin:
              ensure_lambda();
              res = calibrate_l2_plugin(data, bench.model, kernel, lambda, quad, cfg);
              break;
            case Method::Pk:
              ensure_lambda();
              res = calibrate_pk(ensure_problem(), lambda, cfg, plan.pk_search_box);
              break;
            case Method::PpkNlo:
            case Method::PpkAmp: {
              PpkOptions opt;
              opt.index = (m == Method::PpkNlo) ? RiKind::Nlo : RiKind::Amp;
              ensure_lambda();
              opt.fixed_lambda_scale =
                  lambda / lambda_from_scale(1.0, data.n(), kernel.nu,
                                             bench.model.design_domain.dim());
              res = calibrate_ppk(ensure_problem(), cfg, opt);
              break;
            }
          }
          rec.theta_hat = res.theta;
          rec.loss_value = res.value;
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.error = e.what();
        }
        summary.records.push_back(std::move(rec));
      }
    }
  }

  // reduce cells
  for (const auto& rec : summary.records) {
    auto& cell = summary.cells[{method_name(rec.method), rec.n}];
    if (rec.failed) {
      ++cell.failures;
      continue;
    }
    cell.estimates.push_back(rec.theta_hat);
  }
  for (auto& [key, cell] : summary.cells) {
    if (cell.estimates.empty()) continue;
    cell.median = column_quantile(cell.estimates, 0.5);
    cell.iqr = column_quantile(cell.estimates, 0.75) - column_quantile(cell.estimates, 0.25);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(cell.estimates.front().size());
    double mse = 0.0;
    for (const auto& t : cell.estimates) {
      mean += t;
      mse += (t - summary.theta_star).squaredNorm();
    }
    mean /= static_cast<double>(cell.estimates.size());
    cell.bias = mean - summary.theta_star;
    cell.rmse = std::sqrt(mse / static_cast<double>(cell.estimates.size()));
  }
  return summary;
}

}  // namespace ppkcal
