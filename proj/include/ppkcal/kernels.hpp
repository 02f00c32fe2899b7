#ifndef PPKCAL_KERNELS_HPP
#define PPKCAL_KERNELS_HPP

#include <Eigen/Dense>

namespace ppkcal {

/// Stationary Matern kernel with unit variance, k(0) = 1.
/// Uses the raw h/rho argument convention (no sqrt(2*nu) factor).
struct KernelSpec {
  enum class Family { Matern };
  double nu;
  double rho;
  Family family = Family::Matern;
};

/// Matern correlation at distance h >= 0. Half-integer nu uses the
/// polynomial-times-exponential closed form; general nu goes through the
/// modified Bessel function of the second kind.
double matern_eval(const KernelSpec& spec, double h);

struct CholeskyFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& b) const {
    return llt.solve(b).eval();
  }
};

/// Factors M + j*I with the smallest jitter j from a ladder relative to
/// trace(M)/n. Throws std::runtime_error if the ladder is exhausted.
CholeskyFactor safe_cholesky(const Eigen::MatrixXd& M);

struct KernelMatrix {
  Eigen::MatrixXd M;
  CholeskyFactor chol;  // of M + jitter*I
};

/// Gram matrix of kernel evaluations over row-wise points (n x d).
KernelMatrix kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points);

/// Gram without factorization (used where only the values are needed).
Eigen::MatrixXd kernel_gram(const KernelSpec& spec, const Eigen::MatrixXd& points);

/// Cross kernel matrix, (a.rows() x b.rows()).
Eigen::MatrixXd kernel_cross(const KernelSpec& spec, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b);

}  // namespace ppkcal

#endif  // PPKCAL_KERNELS_HPP
