#include "ppkcal/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ppkcal/rng.hpp"

namespace ppkcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const LossFn& loss, const Eigen::VectorXd& x, int& evals) {
  ++evals;
  const double v = loss(x);
  return std::isfinite(v) ? v : kInf;
}

// Bounded Nelder-Mead; proposals are clipped into the box.
StartTrace nelder_mead(const LossFn& loss, const BoxDomain& box, const Eigen::VectorXd& start,
                       const OptimizerConfig& cfg) {
  const int q = box.dim();
  const Eigen::VectorXd range = box.hi - box.lo;
  int evals = 0;

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(box.clip(start));
  for (int j = 0; j < q; ++j) {
    Eigen::VectorXd v = simplex[0];
    double step = 0.05 * range[j];
    if (v[j] + step > box.hi[j]) step = -step;
    v[j] += step;
    simplex.push_back(box.clip(v));
  }
  for (const auto& v : simplex) values.push_back(guarded(loss, v, evals));

  auto order = [&] {
    std::vector<int> idx(simplex.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (int i : idx) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex.swap(s2);
    values.swap(v2);
  };
  order();

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  while (evals < cfg.max_evals) {
    double spread = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      spread = std::max(spread, (simplex[i] - simplex[0]).norm());
    }
    if (std::abs(values.back() - values.front()) < cfg.loss_tol && spread < cfg.theta_tol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(q);
    for (std::size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i];
    centroid /= static_cast<double>(simplex.size() - 1);

    const Eigen::VectorXd refl = box.clip(centroid + alpha * (centroid - simplex.back()));
    const double frefl = guarded(loss, refl, evals);
    if (frefl < values.front()) {
      const Eigen::VectorXd exp_ = box.clip(centroid + gamma * (refl - centroid));
      const double fexp = guarded(loss, exp_, evals);
      if (fexp < frefl) {
        simplex.back() = exp_;
        values.back() = fexp;
      } else {
        simplex.back() = refl;
        values.back() = frefl;
      }
    } else if (frefl < values[values.size() - 2]) {
      simplex.back() = refl;
      values.back() = frefl;
    } else {
      const Eigen::VectorXd con = box.clip(centroid + rho * (simplex.back() - centroid));
      const double fcon = guarded(loss, con, evals);
      if (fcon < values.back()) {
        simplex.back() = con;
        values.back() = fcon;
      } else {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = box.clip(simplex[0] + sigma * (simplex[i] - simplex[0]));
          values[i] = guarded(loss, simplex[i], evals);
        }
      }
    }
    order();
  }

  // coordinatewise numerical-gradient polish with backtracking
  Eigen::VectorXd best = simplex[0];
  double fbest = values[0];
  for (int iter = 0; iter < 20 && evals < cfg.max_evals; ++iter) {
    Eigen::VectorXd grad(q);
    const double h0 = 1e-6;
    for (int j = 0; j < q; ++j) {
      const double h = h0 * range[j];
      Eigen::VectorXd up = best, dn = best;
      up[j] = std::min(best[j] + h, box.hi[j]);
      dn[j] = std::max(best[j] - h, box.lo[j]);
      const double fu = guarded(loss, up, evals);
      const double fd = guarded(loss, dn, evals);
      grad[j] = (up[j] > dn[j]) ? (fu - fd) / (up[j] - dn[j]) : 0.0;
    }
    const double gnorm = grad.norm();
    if (!(gnorm > 0.0) || !std::isfinite(gnorm)) break;
    double step = 0.01 * range.norm() / gnorm;
    bool moved = false;
    for (int bt = 0; bt < 12; ++bt) {
      const Eigen::VectorXd cand = box.clip(best - step * grad);
      const double fc = guarded(loss, cand, evals);
      if (fc < fbest - 1e-14) {
        best = cand;
        fbest = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  return StartTrace{start, best, fbest, evals};
}

}  // namespace

CalibrationResult minimize(const LossFn& loss, const BoxDomain& box,
                           const OptimizerConfig& config) {
  if (config.starts < 1) throw std::invalid_argument("minimize: starts >= 1 required");
  Eigen::MatrixXd starts;
  if (config.starts == 1) {
    starts = box.center().transpose();
  } else {
    starts = maximin_lhd(box, config.starts, config.seed);
  }
  CalibrationResult result;
  result.value = kInf;
  for (int s = 0; s < config.starts; ++s) {
    StartTrace trace = nelder_mead(loss, box, starts.row(s).transpose(), config);
    if (trace.value < result.value) {
      result.theta = trace.theta;
      result.value = trace.value;
    }
    result.traces.push_back(std::move(trace));
  }
  if (!std::isfinite(result.value)) {
    throw std::runtime_error("minimize: no start produced a finite loss value");
  }
  return result;
}

namespace {

// Numerical derivative used for 1-D stationary-point polish.
double num_deriv(const LossFn& loss, double t, double h) {
  return (loss(Eigen::VectorXd::Constant(1, t + h)) -
          loss(Eigen::VectorXd::Constant(1, t - h))) /
         (2.0 * h);
}

void scan_1d(const LossFn& loss, const BoxDomain& box, int resolution, LandscapeScan& out) {
  const double a = box.lo[0], b = box.hi[0];
  const double h = (b - a) / (resolution - 1);
  out.grid.resize(resolution, 1);
  out.raw.resize(resolution);
  for (int i = 0; i < resolution; ++i) {
    out.grid(i, 0) = a + i * h;
    out.raw[i] = loss(out.grid.row(i).transpose());
  }
  const double dh = std::max(1e-7 * (b - a), 1e-10);
  // derivative at interior grid points, then bisection on sign changes
  std::vector<double> deriv(resolution, 0.0);
  for (int i = 1; i + 1 < resolution; ++i) {
    deriv[i] = (out.raw[i + 1] - out.raw[i - 1]) / (2.0 * h);
  }
  for (int i = 1; i + 2 < resolution; ++i) {
    if (deriv[i] == 0.0 || deriv[i] * deriv[i + 1] >= 0.0) continue;
    double lo = out.grid(i, 0), hi = out.grid(i + 1, 0);
    double flo = num_deriv(loss, lo, dh);
    double fhi = num_deriv(loss, hi, dh);
    if (flo * fhi > 0.0) continue;  // grid slope artifact
    for (int it = 0; it < 60 && (hi - lo) > 1e-6; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fmid = num_deriv(loss, mid, dh);
      if (flo * fmid <= 0.0) {
        hi = mid;
        fhi = fmid;
      } else {
        lo = mid;
        flo = fmid;
      }
    }
    StationaryPoint sp;
    sp.theta = Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
    sp.value = loss(sp.theta);
    // second difference decides the classification
    const double hc = std::max(1e-4 * (b - a), 2e-6);
    const double d2 = loss(Eigen::VectorXd::Constant(1, sp.theta[0] + hc)) -
                      2.0 * sp.value +
                      loss(Eigen::VectorXd::Constant(1, sp.theta[0] - hc));
    sp.kind = d2 > 0   ? StationaryPoint::Kind::Min
              : d2 < 0 ? StationaryPoint::Kind::Max
                       : StationaryPoint::Kind::Unknown;
    out.stationary.push_back(std::move(sp));
  }
}

void scan_2d(const LossFn& loss, const BoxDomain& box, int resolution, LandscapeScan& out) {
  const int r = resolution;
  out.grid.resize(r * r, 2);
  out.raw.resize(r * r);
  auto at = [&](int i, int j) { return out.raw[i * r + j]; };
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      out.grid(i * r + j, 0) = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (r - 1);
      out.grid(i * r + j, 1) = box.lo[1] + (box.hi[1] - box.lo[1]) * j / (r - 1);
      out.raw[i * r + j] = loss(out.grid.row(i * r + j).transpose());
    }
  }
  OptimizerConfig local;
  local.starts = 1;
  local.max_evals = 600;
  const double dedupe = 1e-3 * box.diameter();
  const double edge_tol = 1e-6 * box.diameter();
  auto push_unique = [&](StationaryPoint sp) {
    for (int j = 0; j < 2; ++j) {
      if (sp.theta[j] - box.lo[j] < edge_tol || box.hi[j] - sp.theta[j] < edge_tol) return;
    }
    for (const auto& other : out.stationary) {
      if ((other.theta - sp.theta).norm() < dedupe) return;
    }
    out.stationary.push_back(std::move(sp));
  };
  for (int i = 1; i + 1 < r; ++i) {
    for (int j = 1; j + 1 < r; ++j) {
      const double v = at(i, j);
      bool below = true, above = true;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const double nb = at(i + di, j + dj);
          below = below && v < nb;
          above = above && v > nb;
        }
      }
      if (!below && !above) continue;
      const LossFn obj = below ? loss : LossFn([&loss](const Eigen::VectorXd& t) {
        return -loss(t);
      });
      StartTrace tr = nelder_mead(obj, box, out.grid.row(i * r + j).transpose(), local);
      StationaryPoint sp;
      sp.theta = tr.theta;
      sp.value = loss(tr.theta);
      sp.kind = below ? StationaryPoint::Kind::Min : StationaryPoint::Kind::Max;
      push_unique(std::move(sp));
    }
  }
}

}  // namespace

LandscapeScan scan(const LossFn& loss, const BoxDomain& box, int resolution) {
  if (resolution < 16) throw std::invalid_argument("scan: resolution >= 16 required");
  LandscapeScan out;
  if (box.dim() == 1) {
    scan_1d(loss, box, resolution, out);
  } else if (box.dim() == 2) {
    scan_2d(loss, box, resolution, out);
  } else {
    throw std::invalid_argument("scan: tensor grids supported for q <= 2 only");
  }
  out.scaled = scale_loss(out.raw);
  return out;
}

RuggednessReport nlo_index(const LossFn& loss, const BoxDomain& box,
                           const OptimizerConfig& config, int resolution) {
  RuggednessReport report;
  report.kind = "NLO";
  if (box.dim() <= 2) {
    LandscapeScan s = scan(loss, box, resolution);
    report.stationary = std::move(s.stationary);
    report.value = static_cast<double>(report.stationary.size());
    return report;
  }
  // q > 2: distinct converged multi-start optima
  CalibrationResult res = minimize(loss, box, config);
  const double dedupe = 1e-3 * box.diameter();
  std::vector<Eigen::VectorXd> distinct;
  for (const auto& tr : res.traces) {
    bool fresh = true;
    for (const auto& seen : distinct) {
      if ((seen - tr.theta).norm() < dedupe) fresh = false;
    }
    if (fresh) distinct.push_back(tr.theta);
  }
  report.value = static_cast<double>(distinct.size());
  return report;
}

RuggednessReport amp_index(const LossFn& loss, const BoxDomain& box, int n_sample,
                           std::uint64_t seed) {
  if (n_sample < 2) throw std::invalid_argument("amp_index: need at least 2 samples");
  Rng rng(seed);
  Eigen::VectorXd vals(n_sample);
  for (int k = 0; k < n_sample; ++k) {
    Eigen::VectorXd t(box.dim());
    for (int j = 0; j < box.dim(); ++j) t[j] = rng.uniform(box.lo[j], box.hi[j]);
    vals[k] = loss(t);
  }
  const double lo = vals.minCoeff(), hi = vals.maxCoeff();
  RuggednessReport report;
  report.kind = "Amp";
  const double denom = (vals.array() - lo).mean();
  report.value = denom > 0.0 ? (hi - lo) / denom : 0.0;
  return report;
}

double lambda_from_scale(double scale, int n, double nu, int d) {
  const double m = nu + 0.5 * d;
  return scale * std::pow(static_cast<double>(n), -2.0 * m / (2.0 * m + d));
}

double select_lambda_scale(const CalibrationProblem& problem, const Eigen::VectorXd& theta0,
                           int folds, std::vector<double> grid, std::uint64_t seed) {
  const PhysicalData& data = problem.data();
  const int n = data.n();
  if (folds < 2 || folds > n) {
    throw std::invalid_argument("select_lambda_scale: need 2 <= folds <= n");
  }
  if (grid.empty()) {
    for (int i = 0; i < 13; ++i) grid.push_back(std::pow(10.0, -5.0 + 0.5 * i));
  }
  const double nu = problem.kernel().nu;
  const int d = problem.model().design_domain.dim();

  // deterministic shuffled fold assignment
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed ^ 0xc2b2ae3d27d4eb4full);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[static_cast<int>(rng.below(i + 1))]);

  ContextPtr ctx = problem.engine().context(theta0);
  const Eigen::VectorXd all_delta = problem.residuals(theta0);

  double best_scale = grid.front();
  double best_err = kInf;
  for (double scale : grid) {
    double err = 0.0;
    int count = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train, test;
      for (int i = 0; i < n; ++i) {
        (i % folds == f ? test : train).push_back(perm[i]);
      }
      if (test.empty() || train.empty()) {
        throw std::runtime_error("select_lambda_scale: empty fold");
      }
      PhysicalData sub;
      sub.X.resize(static_cast<int>(train.size()), data.X.cols());
      sub.y.resize(static_cast<int>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        sub.X.row(static_cast<int>(i)) = data.X.row(train[i]);
        sub.y[static_cast<int>(i)] = data.y[train[i]];
      }
      const double lambda = lambda_from_scale(scale, static_cast<int>(train.size()), nu, d);
      DiscrepancyFit fit = fit_discrepancy(sub, ctx, lambda);
      for (int idx : test) {
        const double pred = predict(fit, data.X.row(idx).transpose());
        const double gap = all_delta[idx] - pred;
        err += gap * gap;
        ++count;
      }
    }
    err /= count;
    if (err < best_err) {
      best_err = err;
      best_scale = scale;
    }
  }
  return best_scale;
}

std::vector<double> default_eta_grid() {
  std::vector<double> grid{0.0};
  for (int i = 0; i <= 24; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.25 * i));
  return grid;
}

EtaSelection select_eta(CalibrationProblem& problem, double lambda, RiKind index,
                        const std::vector<double>& eta_grid, const OptimizerConfig& config) {
  if (eta_grid.empty()) throw std::invalid_argument("select_eta: empty grid");
  const BoxDomain& box = problem.model().param_domain;
  const int n = problem.data().n();
  EtaSelection sel;
  double best_bic = kInf;
  for (double eta : eta_grid) {
    LossFn loss = [&problem, lambda, eta](const Eigen::VectorXd& t) {
      return problem.ppk_loss(t, lambda, eta);
    };
    CalibrationResult res = minimize(loss, box, config);
    double ri;
    if (index == RiKind::Nlo && box.dim() <= 2) {
      ri = nlo_index(loss, box, config, box.dim() == 1 ? 200 : 24).value;
    } else if (index == RiKind::Nlo) {
      ri = nlo_index(loss, box, config).value;
    } else {
      ri = amp_index(loss, box, 100, config.seed ^ 0x51ed2701ull).value;
    }
    const double pk_at_hat = problem.pk_loss(res.theta, lambda);
    const double bic = std::log(std::max(pk_at_hat, 1e-300)) + ri * std::log(n) / n;
    sel.trace.push_back(EtaCandidate{eta, ri, bic, res.theta});
    if (bic < best_bic - 1e-12) {  // strict improvement; ties keep smaller eta
      best_bic = bic;
      sel.eta = eta;
    }
  }
  return sel;
}

CalibrationResult calibrate_ls(const PhysicalData& data, const ComputerModel& model,
                               const OptimizerConfig& config) {
  LossFn loss = [&data, &model](const Eigen::VectorXd& theta) {
    double s = 0.0;
    for (int i = 0; i < data.n(); ++i) {
      const double r = data.y[i] - model.eval(data.X.row(i).transpose(), theta);
      s += r * r;
    }
    return s / data.n();
  };
  CalibrationResult res = minimize(loss, model.param_domain, config);
  res.method = "ls";
  return res;
}

CalibrationResult calibrate_l2_plugin(const PhysicalData& data, const ComputerModel& model,
                                      const KernelSpec& kernel, double lambda,
                                      const QuadratureSet& quad, const OptimizerConfig& config) {
  const int n = data.n();
  Eigen::MatrixXd A = kernel_gram(kernel, data.X);
  A.diagonal().array() += n * lambda;
  const Eigen::VectorXd coef = safe_cholesky(A).solve(data.y);
  const Eigen::MatrixXd cross = kernel_cross(kernel, quad.nodes, data.X);
  const Eigen::VectorXd zeta_hat_nodes = cross * coef;
  LossFn loss = [&](const Eigen::VectorXd& theta) {
    return l2_loss(zeta_hat_nodes, model, theta, quad);
  };
  CalibrationResult res = minimize(loss, model.param_domain, config);
  res.method = "l2";
  res.lambda = lambda;
  return res;
}

CalibrationResult calibrate_pk(CalibrationProblem& problem, double lambda,
                               const OptimizerConfig& config,
                               const std::optional<BoxDomain>& search_box) {
  LossFn loss = [&problem, lambda](const Eigen::VectorXd& t) {
    return problem.pk_loss(t, lambda);
  };
  const BoxDomain& box = search_box ? *search_box : problem.model().param_domain;
  CalibrationResult res = minimize(loss, box, config);
  res.method = "pk";
  res.lambda = lambda;
  res.fit = problem.fit(res.theta, lambda);
  return res;
}

CalibrationResult calibrate_ppk(CalibrationProblem& problem, const OptimizerConfig& config,
                                const PpkOptions& options) {
  const CalibrationResult ls = calibrate_ls(problem.data(), problem.model(), config);
  const double scale =
      options.fixed_lambda_scale
          ? *options.fixed_lambda_scale
          : select_lambda_scale(problem, ls.theta, options.cv_folds, {}, config.seed);
  const double lambda = lambda_from_scale(scale, problem.data().n(), problem.kernel().nu,
                                          problem.model().design_domain.dim());
  double eta;
  if (options.fixed_eta) {
    eta = *options.fixed_eta;
  } else {
    eta = select_eta(problem, lambda, options.index, default_eta_grid(), config).eta;
  }
  LossFn loss = [&problem, lambda, eta](const Eigen::VectorXd& t) {
    return problem.ppk_loss(t, lambda, eta);
  };
  CalibrationResult res = minimize(loss, problem.model().param_domain, config);
  res.method = "ppk";
  res.lambda = lambda;
  res.eta = eta;
  res.fit = problem.fit(res.theta, lambda);
  return res;
}

namespace {

double golden_section(const std::function<double(double)>& f, double lo, double hi, int iters) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

double estimate_rho_mle(const PhysicalData& data, const ComputerModel& model,
                        const Eigen::VectorXd& theta0, double nu) {
  const int n = data.n();
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) {
    r[i] = data.y[i] - model.eval(data.X.row(i).transpose(), theta0);
  }
  const double diam = model.design_domain.diameter();
  const double spread = (r.array() - r.mean()).abs().maxCoeff();
  if (spread < 1e-12) {
    return 0.5 * diam;  // degenerate residuals; caller may warn
  }
  // profiled negative log-likelihood of tau^2 (K_rho + g I), g = sigma^2/tau^2
  auto nll = [&](double log_rho, double log_g) {
    const KernelSpec spec{nu, std::exp(log_rho)};
    Eigen::MatrixXd K = kernel_gram(spec, data.X);
    K.diagonal().array() += std::exp(log_g);
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) return kInf;
    const double quad = r.dot(llt.solve(r));
    if (!(quad > 0.0)) return kInf;
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
    return logdet + 0.5 * n * std::log(quad / n);
  };
  auto profile_g = [&](double log_rho) {
    const double lg = golden_section([&](double g) { return nll(log_rho, g); },
                                     std::log(1e-8), std::log(1e2), 40);
    return nll(log_rho, lg);
  };
  const double lo = std::log(0.01 * diam), hi = std::log(10.0 * diam);
  const double best = golden_section(profile_g, lo, hi, 40);
  // optimizer contract: no worse than the endpoints
  if (profile_g(best) > std::min(profile_g(lo), profile_g(hi))) {
    return profile_g(lo) < profile_g(hi) ? std::exp(lo) : std::exp(hi);
  }
  return std::exp(best);
}

double predict_truth(const CalibrationResult& result, const ComputerModel& model,
                     const Eigen::VectorXd& x) {
  double out = model.eval(x, result.theta);
  if (result.fit) out += predict(*result.fit, x);
  return out;
}

}  // namespace ppkcal
