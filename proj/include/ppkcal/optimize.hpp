#ifndef PPKCAL_OPTIMIZE_HPP
#define PPKCAL_OPTIMIZE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppkcal/losses.hpp"

namespace ppkcal {

using LossFn = std::function<double(const Eigen::VectorXd&)>;

struct OptimizerConfig {
  int starts = 12;
  double loss_tol = 1e-7;
  double theta_tol = 1e-6;
  int max_evals = 2000;
  std::uint64_t seed = 0;
};

struct StartTrace {
  Eigen::VectorXd start;
  Eigen::VectorXd theta;
  double value;
  int evals;
};

struct CalibrationResult {
  Eigen::VectorXd theta;
  double value = 0.0;
  std::string method;
  double lambda = 0.0;
  double eta = 0.0;
  std::vector<StartTrace> traces;
  std::shared_ptr<const DiscrepancyFit> fit;  // set by PK/PPK pipelines
};

/// Multi-start bounded simplex descent (reflection/expansion/contraction with
/// coefficients 1, 2, 0.5, 0.5) followed by a coordinatewise numerical
/// gradient polish. Starts come from a maximin LHD over the box.
CalibrationResult minimize(const LossFn& loss, const BoxDomain& box,
                           const OptimizerConfig& config);

struct StationaryPoint {
  Eigen::VectorXd theta;
  double value;
  enum class Kind { Min, Max, Unknown } kind;
};

struct LandscapeScan {
  Eigen::MatrixXd grid;   // points x q
  Eigen::VectorXd raw;
  Eigen::VectorXd scaled;
  std::vector<StationaryPoint> stationary;
};

/// Tensor-grid scan with stationary-point detection (q <= 2).
LandscapeScan scan(const LossFn& loss, const BoxDomain& box, int resolution);

struct RuggednessReport {
  std::string kind;  // "NLO" or "Amp"
  double value = 0.0;
  std::vector<StationaryPoint> stationary;  // NLO detail
};

/// Interior stationary-point count from a scan (q <= 2) or multi-start
/// dedupe count (q > 2).
RuggednessReport nlo_index(const LossFn& loss, const BoxDomain& box,
                           const OptimizerConfig& config, int resolution = 200);

/// (max - min) / mean(L - min) over a uniform sample of the box.
RuggednessReport amp_index(const LossFn& loss, const BoxDomain& box, int n_sample,
                           std::uint64_t seed);

/// lambda = scale * n^{-2m/(2m+d)} with m = nu + d/2.
double lambda_from_scale(double scale, int n, double nu, int d);

/// K-fold CV of the held-out squared prediction error of the ridge fit at a
/// preliminary theta; returns the best scale from a log grid.
double select_lambda_scale(const CalibrationProblem& problem, const Eigen::VectorXd& theta0,
                           int folds = 10, std::vector<double> grid = {},
                           std::uint64_t seed = 0);

enum class RiKind { Nlo, Amp };

struct EtaCandidate {
  double eta;
  double ri;
  double bic;
  Eigen::VectorXd theta;
};

struct EtaSelection {
  double eta = 0.0;
  std::vector<EtaCandidate> trace;
};

/// BIC-type rule: argmin over the grid of
/// log L_PK(theta_hat_PPK(eta)) + RI(L_PPK(. ; eta)) log(n)/n,
/// ties broken toward smaller eta.
EtaSelection select_eta(CalibrationProblem& problem, double lambda, RiKind index,
                        const std::vector<double>& eta_grid, const OptimizerConfig& config);

std::vector<double> default_eta_grid();

/// (1/n) sum (y_i - y^s(x_i, theta))^2 minimized over Theta.
CalibrationResult calibrate_ls(const PhysicalData& data, const ComputerModel& model,
                               const OptimizerConfig& config);

/// Plug-in L2: KRR of Y on X under the raw kernel, then L2 distance between
/// the plug-in truth and the model over the quadrature nodes.
CalibrationResult calibrate_l2_plugin(const PhysicalData& data, const ComputerModel& model,
                                      const KernelSpec& kernel, double lambda,
                                      const QuadratureSet& quad, const OptimizerConfig& config);

CalibrationResult calibrate_pk(CalibrationProblem& problem, double lambda,
                               const OptimizerConfig& config,
                               const std::optional<BoxDomain>& search_box = {});

struct PpkOptions {
  RiKind index = RiKind::Nlo;
  std::optional<double> fixed_lambda_scale;
  std::optional<double> fixed_eta;
  int cv_folds = 10;
};

/// Full two-step pipeline: LS start, lambda scale by K-fold CV, eta by the
/// BIC rule, then multi-start PPK minimization.
CalibrationResult calibrate_ppk(CalibrationProblem& problem, const OptimizerConfig& config,
                                const PpkOptions& options = {});

/// Profile-likelihood estimate of the kernel length-scale from residuals at
/// theta0 under tau^2 K_rho + sigma^2 I.
double estimate_rho_mle(const PhysicalData& data, const ComputerModel& model,
                        const Eigen::VectorXd& theta0, double nu);

/// zeta_hat(x) = delta_hat(x) + y^s(x, theta_hat); falls back to the bare
/// model when the result carries no discrepancy fit.
double predict_truth(const CalibrationResult& result, const ComputerModel& model,
                     const Eigen::VectorXd& x);

}  // namespace ppkcal

#endif  // PPKCAL_OPTIMIZE_HPP
