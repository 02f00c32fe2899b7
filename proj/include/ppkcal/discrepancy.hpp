#ifndef PPKCAL_DISCREPANCY_HPP
#define PPKCAL_DISCREPANCY_HPP

#include <memory>

#include <Eigen/Dense>

#include "ppkcal/projection.hpp"

namespace ppkcal {

/// Kernel-ridge coefficients for delta_hat under the projected kernel:
/// (K_theta + n*lambda*I) c = Delta, Delta_i = y_i - y^s(x_i, theta).
struct DiscrepancyFit {
  ContextPtr ctx;
  double lambda = 0.0;
  Eigen::VectorXd delta;   // residuals at the design
  Eigen::VectorXd coef;    // c
  Eigen::MatrixXd gram;    // K_theta over the design
  double jitter = 0.0;     // jitter applied to K_theta + n*lambda*I
  Eigen::MatrixXd X;       // design points
  HwMatrices hw_data;      // h/w at the design points

  int n() const { return static_cast<int>(delta.size()); }
};

/// Fits the ridge system by Cholesky. cross_nodes_data, when supplied, is the
/// raw-kernel N x n matrix between quadrature nodes and design points (it is
/// theta-free and worth caching by the caller).
DiscrepancyFit fit_discrepancy(const PhysicalData& data, ContextPtr ctx, double lambda,
                               const Eigen::MatrixXd* cross_nodes_data = nullptr);

/// delta_hat(x) = sum_i c_i K_theta(x, x_i)
double predict(const DiscrepancyFit& fit, const Eigen::VectorXd& x);

/// delta_hat at the quadrature nodes in one shot.
Eigen::VectorXd predict_nodes(const DiscrepancyFit& fit,
                              const Eigen::MatrixXd* cross_nodes_data = nullptr);

/// c' K_theta c
double rkhs_norm_sq(const DiscrepancyFit& fit);

/// (vol/N) sum_k delta_hat(xi_k)^2
double l2_norm_sq(const DiscrepancyFit& fit,
                  const Eigen::MatrixXd* cross_nodes_data = nullptr);

/// (1/n) sum_i v_i^2
double empirical_norm_sq(const Eigen::VectorXd& values);

}  // namespace ppkcal

#endif  // PPKCAL_DISCREPANCY_HPP
