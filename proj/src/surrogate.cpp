#include "ppkcal/surrogate.hpp"

#include <cmath>
#include <stdexcept>

#include "ppkcal/rng.hpp"

namespace ppkcal {

bool BoxDomain::contains(const Eigen::VectorXd& x, double slack) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] < lo[j] - slack || x[j] > hi[j] + slack) return false;
  }
  return true;
}

Eigen::VectorXd BoxDomain::clip(Eigen::VectorXd x) const {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    x[j] = std::min(std::max(x[j], lo[j]), hi[j]);
  }
  return x;
}

BoxDomain make_box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw std::invalid_argument("make_box: bound lists must match and be nonempty");
  }
  BoxDomain box;
  box.lo = Eigen::Map<const Eigen::VectorXd>(lo.begin(), lo.size());
  box.hi = Eigen::Map<const Eigen::VectorXd>(hi.begin(), hi.size());
  for (Eigen::Index j = 0; j < box.lo.size(); ++j) {
    if (!(box.lo[j] < box.hi[j])) {
      throw std::invalid_argument("make_box: lower bound must be below upper bound");
    }
  }
  return box;
}

ComputerModel make_computer_model(ComputerModel::Eval eval, ComputerModel::Grad grad,
                                  BoxDomain design_domain, BoxDomain param_domain,
                                  std::uint64_t probe_seed) {
  ComputerModel model{std::move(eval), std::move(grad), std::move(design_domain),
                      std::move(param_domain)};
  Rng rng(probe_seed ^ 0x9e3779b97f4a7c15ull);
  const int d = model.design_domain.dim();
  const int q = model.param_domain.dim();
  for (int probe = 0; probe < 32; ++probe) {
    Eigen::VectorXd x(d), theta(q);
    for (int j = 0; j < d; ++j) {
      x[j] = rng.uniform(model.design_domain.lo[j], model.design_domain.hi[j]);
    }
    for (int j = 0; j < q; ++j) {
      theta[j] = rng.uniform(model.param_domain.lo[j], model.param_domain.hi[j]);
    }
    if (!std::isfinite(model.eval(x, theta))) {
      throw std::runtime_error("make_computer_model: non-finite model output at probe point");
    }
  }
  return model;
}

Eigen::VectorXd model_gradient(const ComputerModel& model, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& theta) {
  if (model.grad) return model.grad(x, theta);
  const int q = static_cast<int>(theta.size());
  Eigen::VectorXd g(q);
  Eigen::VectorXd t = theta;
  for (int j = 0; j < q; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(theta[j]));
    const double up = std::min(theta[j] + h, model.param_domain.hi[j]);
    const double dn = std::max(theta[j] - h, model.param_domain.lo[j]);
    t[j] = up;
    const double fu = model.eval(x, t);
    t[j] = dn;
    const double fd = model.eval(x, t);
    t[j] = theta[j];
    if (!std::isfinite(fu) || !std::isfinite(fd)) {
      throw std::runtime_error("model_gradient: non-finite model output during differencing");
    }
    g[j] = (fu - fd) / (up - dn);
  }
  return g;
}

void validate_physical_data(const PhysicalData& data, const BoxDomain& omega) {
  if (data.n() < 2) throw std::invalid_argument("physical data needs n >= 2");
  if (data.X.rows() != data.y.size()) {
    throw std::invalid_argument("physical data: X rows must match y length");
  }
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    if (!omega.contains(data.X.row(i).transpose(), 1e-9)) {
      throw std::invalid_argument("physical data: design point outside the design domain");
    }
  }
}

QuadratureSet uniform_quadrature(const BoxDomain& omega, int N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("uniform_quadrature: N must be positive");
  Rng rng(seed);
  const int d = omega.dim();
  Eigen::MatrixXd nodes(N, d);
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < d; ++j) {
      nodes(k, j) = rng.uniform(omega.lo[j], omega.hi[j]);
    }
  }
  return QuadratureSet{std::move(nodes), omega.volume() / N, seed, omega};
}

double quad_inner(const QuadratureSet& quad, const Eigen::VectorXd& f1_nodes,
                  const Eigen::VectorXd& f2_nodes) {
  return quad.weight * f1_nodes.dot(f2_nodes);
}

Eigen::MatrixXd equispaced_design(const BoxDomain& omega, int n) {
  if (omega.dim() != 1) throw std::invalid_argument("equispaced_design: 1-D domains only");
  if (n < 2) throw std::invalid_argument("equispaced_design: n >= 2 required");
  Eigen::MatrixXd X(n, 1);
  const double a = omega.lo[0], b = omega.hi[0];
  for (int i = 0; i < n; ++i) {
    X(i, 0) = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return X;
}

namespace {

double min_pairwise_dist(const Eigen::MatrixXd& X) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      best = std::min(best, (X.row(i) - X.row(j)).squaredNorm());
    }
  }
  return best;
}

}  // namespace

Eigen::MatrixXd maximin_lhd(const BoxDomain& omega, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("maximin_lhd: n >= 2 required");
  const int d = omega.dim();
  Rng rng(seed);
  // stratum index per column is a random permutation of 0..n-1; the point is
  // jittered inside its stratum
  Eigen::MatrixXd U(n, d);
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      std::swap(perm[i], perm[static_cast<int>(rng.below(i + 1))]);
    }
    for (int i = 0; i < n; ++i) {
      U(i, j) = (perm[i] + rng.uniform01()) / n;
    }
  }
  // swap elements within a column; keep the swap when the min pairwise
  // distance does not get worse (Latin property is preserved by swaps)
  double cur = min_pairwise_dist(U);
  const int budget = 10 * n * d;
  for (int it = 0; it < budget; ++it) {
    const int j = static_cast<int>(rng.below(d));
    const int a = static_cast<int>(rng.below(n));
    int b = static_cast<int>(rng.below(n));
    if (a == b) continue;
    std::swap(U(a, j), U(b, j));
    const double cand = min_pairwise_dist(U);
    if (cand >= cur) {
      cur = cand;
    } else {
      std::swap(U(a, j), U(b, j));
    }
  }
  Eigen::MatrixXd X(n, d);
  for (int j = 0; j < d; ++j) {
    X.col(j) = omega.lo[j] + (omega.hi[j] - omega.lo[j]) * U.col(j).array();
  }
  return X;
}

Benchmark builtin_benchmark(const std::string& name) {
  if (name == "sine") {
    Benchmark b;
    b.name = "sine";
    b.truth = [](const Eigen::VectorXd& x) {
      return x[0] * std::cos(1.5 * x[0]) + x[0];
    };
    auto eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
      return std::sin(t[0] * x[0]) + std::exp(-2.0 * std::abs(x[0]));
    };
    auto grad = [](const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
      Eigen::VectorXd g(1);
      g[0] = x[0] * std::cos(t[0] * x[0]);
      return g;
    };
    b.model = make_computer_model(eval, grad, make_box({-5.0}, {5.0}), make_box({0.0}, {3.0}));
    b.noise_sd = 0.2;
    b.kernel = KernelSpec{0.5, 0.5};
    b.estimate_rho = false;
    b.design = DesignKind::Equispaced;
    b.default_quad_size = 2000;
    return b;
  }
  if (name == "park") {
    Benchmark b;
    b.name = "park";
    auto park = [](const Eigen::VectorXd& x) {
      const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
      const double x1s = std::max(x1 * x1, 1e-300);
      return 0.5 * x1 * (std::sqrt(1.0 + (x2 + x3 * x3) * x4 / x1s) - 1.0) +
             (x1 + 3.0 * x4) * std::exp(1.0 + std::sin(x3));
    };
    b.truth = park;
    auto eval = [park](const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
      const double x1 = x[0], x2 = x[1], x3 = x[2];
      return (t[0] + std::sin(x1) / 10.0) * park(x) +
             t[1] * (-2.0 * x1 + x2 * x2 + x3 * x3) + 0.5;
    };
    auto grad = [park](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
      Eigen::VectorXd g(2);
      g[0] = park(x);
      g[1] = -2.0 * x[0] + x[1] * x[1] + x[2] * x[2];
      return g;
    };
    b.model = make_computer_model(eval, grad, make_box({0, 0, 0, 0}, {1, 1, 1, 1}),
                                  make_box({-5.0, -5.0}, {5.0, 5.0}));
    b.noise_sd = 0.1;
    b.kernel = KernelSpec{3.5, 0.7};
    b.estimate_rho = true;
    b.design = DesignKind::MaximinLhd;
    b.default_quad_size = 5000;
    return b;
  }
  if (name == "exact") {
    // no-discrepancy, noise-free control case: model matches truth at theta = 1
    Benchmark b;
    b.name = "exact";
    b.truth = [](const Eigen::VectorXd& x) { return x[0]; };
    auto eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& t) { return t[0] * x[0]; };
    auto grad = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
      Eigen::VectorXd g(1);
      g[0] = x[0];
      return g;
    };
    b.model = make_computer_model(eval, grad, make_box({0.0}, {1.0}), make_box({0.0}, {2.0}));
    b.noise_sd = 0.0;
    b.kernel = KernelSpec{2.5, 0.3};
    b.estimate_rho = false;
    b.design = DesignKind::Equispaced;
    b.default_quad_size = 500;
    return b;
  }
  throw std::invalid_argument("builtin_benchmark: unknown benchmark '" + name + "'");
}

PhysicalData benchmark_data(const Benchmark& bench, int n, std::uint64_t seed) {
  PhysicalData data;
  switch (bench.design) {
    case DesignKind::Equispaced:
      data.X = equispaced_design(bench.model.design_domain, n);
      break;
    case DesignKind::MaximinLhd:
      data.X = maximin_lhd(bench.model.design_domain, n, seed * 2654435761ull + 1);
      break;
  }
  Rng noise(seed);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    data.y[i] = bench.truth(data.X.row(i).transpose()) + bench.noise_sd * noise.normal();
  }
  data.noise_sd = bench.noise_sd;
  return data;
}

}  // namespace ppkcal
