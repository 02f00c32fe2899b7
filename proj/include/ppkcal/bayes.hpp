#ifndef PPKCAL_BAYES_HPP
#define PPKCAL_BAYES_HPP

#include <cstdint>
#include <vector>

#include "ppkcal/losses.hpp"

namespace ppkcal {

/// Unnormalized posterior under the penalized prior:
/// log pi(theta | Y) = -1/2 Delta'(K_theta + n lambda I)^-1 Delta
///                     - gamma/2 ||delta_hat^theta||^2_L2,
/// gamma = eta / lambda. gamma = 0 recovers the flat-prior posterior.
struct PosteriorSpec {
  CalibrationProblem* problem = nullptr;
  double lambda = 0.0;
  double gamma = 0.0;
};

double log_posterior(const PosteriorSpec& spec, const Eigen::VectorXd& theta);

struct PosteriorChain {
  Eigen::MatrixXd samples;       // post-burn-in, rows = draws
  Eigen::VectorXd log_density;
  double acceptance_rate = 0.0;
  int burn_in = 0;
  std::uint64_t seed = 0;
};

/// Random-walk Metropolis with a Gaussian proposal. The per-dimension scale
/// adapts toward acceptance 0.25-0.40 during burn-in only; proposals are
/// reflected at the box boundary.
PosteriorChain sample(const PosteriorSpec& spec, int iterations, int burn_in,
                      std::uint64_t seed, const Eigen::VectorXd* init = nullptr);

/// Per-dimension empirical (alpha/2, 1-alpha/2) quantiles.
std::vector<std::pair<double, double>> credible_interval(const PosteriorChain& chain,
                                                         double level = 0.95);

}  // namespace ppkcal

#endif  // PPKCAL_BAYES_HPP
