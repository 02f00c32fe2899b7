#ifndef PPKCAL_LOSSES_HPP
#define PPKCAL_LOSSES_HPP

#include <functional>
#include <memory>
#include <unordered_map>

#include <Eigen/Dense>

#include "ppkcal/discrepancy.hpp"

namespace ppkcal {

enum class LossKind { L2True, L2Plugin, PK, PPK, PKL2 };

/// Bundles one calibration session: data, model, kernel, one shared
/// quadrature set, and the caches that make repeated loss evaluations cheap
/// (theta-free cross gram, per-theta contexts, per-(theta, lambda) PK terms).
class CalibrationProblem {
 public:
  CalibrationProblem(PhysicalData data, ComputerModel model, KernelSpec kernel,
                     QuadratureSet quad);

  const PhysicalData& data() const { return data_; }
  const ProjectionEngine& engine() const { return engine_; }
  const QuadratureSet& quad() const { return engine_.quad(); }
  const ComputerModel& model() const { return engine_.model(); }
  const KernelSpec& kernel() const { return engine_.kernel(); }

  /// Raw-kernel N x n matrix between quadrature nodes and design points.
  const Eigen::MatrixXd& cross_nodes_data() const;

  /// Residual vector y - y^s(X, theta).
  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const;

  /// Cached ridge fit at (theta, lambda).
  std::shared_ptr<const DiscrepancyFit> fit(const Eigen::VectorXd& theta, double lambda) const;

  /// L_PK = lambda * Delta' (K_theta + n lambda I)^-1 Delta
  double pk_loss(const Eigen::VectorXd& theta, double lambda) const;

  /// L_PPK = L_PK + eta * ||delta_hat||^2_L2
  double ppk_loss(const Eigen::VectorXd& theta, double lambda, double eta) const;

  /// ||delta_hat^theta||^2_L2 alone (shares the cached fit).
  double fitted_l2_norm_sq(const Eigen::VectorXd& theta, double lambda) const;

  void clear_caches() const;

 private:
  struct PkTerms {
    std::shared_ptr<const DiscrepancyFit> fit;
    double quad_form;    // Delta' (K+n lambda I)^-1 Delta
    double l2_norm_sq;   // of delta_hat
  };
  const PkTerms& pk_terms(const Eigen::VectorXd& theta, double lambda) const;

  PhysicalData data_;
  ProjectionEngine engine_;
  mutable Eigen::MatrixXd cross_;
  mutable std::unordered_map<std::string, PkTerms> pk_cache_;
};

/// (vol/N) sum_k (zeta(xi_k) - y^s(xi_k, theta))^2, with the truth supplied
/// as values at the quadrature nodes.
double l2_loss(const Eigen::VectorXd& truth_nodes, const ComputerModel& model,
               const Eigen::VectorXd& theta, const QuadratureSet& quad);

/// Convenience overload evaluating the truth function at the nodes.
double l2_loss(const std::function<double(const Eigen::VectorXd&)>& truth,
               const ComputerModel& model, const Eigen::VectorXd& theta,
               const QuadratureSet& quad);

Eigen::VectorXd eval_at_nodes(const std::function<double(const Eigen::VectorXd&)>& f,
                              const QuadratureSet& quad);

Eigen::VectorXd model_at_nodes(const ComputerModel& model, const Eigen::VectorXd& theta,
                               const QuadratureSet& quad);

/// PK loss via the closed quadratic form (one Cholesky solve).
double pk_loss(CalibrationProblem& problem, const Eigen::VectorXd& theta, double lambda);

double ppk_loss(CalibrationProblem& problem, const Eigen::VectorXd& theta, double lambda,
                double eta);

/// ||P_G delta^theta||^2_L2 + C = a' E^-1 a + C with a = <delta^theta, g>.
double pkl2_loss(const Eigen::VectorXd& truth_nodes, const ProjectionEngine& engine,
                 const Eigen::VectorXd& theta, double C);

/// (v - min) / (max - min); all zeros when the input is constant.
Eigen::VectorXd scale_loss(const Eigen::VectorXd& values);

}  // namespace ppkcal

#endif  // PPKCAL_LOSSES_HPP
