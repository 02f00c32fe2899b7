#include "ppkcal/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace ppkcal {

namespace {

bool half_integer_order(double nu, int& p) {
  const double pf = nu - 0.5;
  const double pr = std::round(pf);
  if (pr >= 0.0 && std::abs(pf - pr) < 1e-12) {
    p = static_cast<int>(pr);
    return true;
  }
  return false;
}

// K(t) = exp(-t) * p!/(2p)! * sum_{k=0}^{p} (p+k)!/(k!(p-k)!) (2t)^{p-k}
double matern_half_integer(int p, double t) {
  double coeff = 1.0;  // (p+k)!/(k!(p-k)!), k = 0
  double sum = std::pow(2.0 * t, p);
  for (int k = 1; k <= p; ++k) {
    coeff *= static_cast<double>((p + k) * (p - k + 1)) / static_cast<double>(k);
    sum += coeff * std::pow(2.0 * t, p - k);
  }
  double fact_ratio = 1.0;  // p!/(2p)!
  for (int i = p + 1; i <= 2 * p; ++i) fact_ratio /= static_cast<double>(i);
  return std::exp(-t) * fact_ratio * sum;
}

}  // namespace

double matern_eval(const KernelSpec& spec, double h) {
  if (!(spec.nu > 0.0) || !(spec.rho > 0.0)) {
    throw std::invalid_argument("matern_eval: nu and rho must be positive");
  }
  if (h < 0.0 || !std::isfinite(h)) {
    throw std::invalid_argument("matern_eval: distance must be finite and nonnegative");
  }
  if (h == 0.0) return 1.0;  // Bessel form is 0/0 at the origin
  const double t = h / spec.rho;
  int p = 0;
  if (half_integer_order(spec.nu, p)) {
    return matern_half_integer(p, t);
  }
  if (t > 700.0) return 0.0;  // exp underflow territory
  const double nu = spec.nu;
  const double val = std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(t, nu) *
                     std::cyl_bessel_k(nu, t);
  return std::min(val, 1.0);
}

CholeskyFactor safe_cholesky(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument("safe_cholesky: matrix must be square");
  }
  const double scale = M.trace() / static_cast<double>(M.rows());
  const double ladder[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6};
  for (double step : ladder) {
    const double j = step * scale;
    Eigen::MatrixXd A = M;
    A.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      return CholeskyFactor{std::move(llt), j};
    }
  }
  throw std::runtime_error("safe_cholesky: matrix not numerically PSD");
}

Eigen::MatrixXd kernel_gram(const KernelSpec& spec, const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw std::invalid_argument("kernel_gram: empty point set");
  if (!points.allFinite()) {
    throw std::invalid_argument("kernel_gram: non-finite coordinates");
  }
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = (points.row(i) - points.row(j)).norm();
      const double v = matern_eval(spec, h);
      M(i, j) = v;
      M(j, i) = v;
    }
  }
  return M;
}

KernelMatrix kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points) {
  KernelMatrix km;
  km.M = kernel_gram(spec, points);
  km.chol = safe_cholesky(km.M);
  return km;
}

Eigen::MatrixXd kernel_cross(const KernelSpec& spec, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b) {
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("kernel_cross: non-finite coordinates");
  }
  Eigen::MatrixXd M(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      M(i, j) = matern_eval(spec, (a.row(i) - b.row(j)).norm());
    }
  }
  return M;
}

}  // namespace ppkcal
