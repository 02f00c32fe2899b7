#include "ppkcal/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ppkcal/rng.hpp"

namespace ppkcal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double reflect_into(double v, double lo, double hi) {
  const double width = hi - lo;
  if (width <= 0.0) return lo;
  // fold the real line onto [lo, hi]
  double t = std::fmod(v - lo, 2.0 * width);
  if (t < 0.0) t += 2.0 * width;
  return t <= width ? lo + t : hi - (t - width);
}
}  // namespace

double log_posterior(const PosteriorSpec& spec, const Eigen::VectorXd& theta) {
  if (!spec.problem) throw std::invalid_argument("log_posterior: missing problem");
  if (!(spec.lambda > 0.0)) throw std::invalid_argument("log_posterior: lambda must be positive");
  if (spec.gamma < 0.0) throw std::invalid_argument("log_posterior: gamma must be nonnegative");
  const BoxDomain& box = spec.problem->model().param_domain;
  if (!box.contains(theta)) return kNegInf;
  try {
    const double quad_form = spec.problem->pk_loss(theta, spec.lambda) / spec.lambda;
    const double prior = spec.gamma > 0.0
                             ? spec.gamma * spec.problem->fitted_l2_norm_sq(theta, spec.lambda)
                             : 0.0;
    return -0.5 * quad_form - 0.5 * prior;
  } catch (const std::runtime_error&) {
    return kNegInf;  // degenerate context at this theta
  }
}

PosteriorChain sample(const PosteriorSpec& spec, int iterations, int burn_in,
                      std::uint64_t seed, const Eigen::VectorXd* init) {
  if (iterations <= burn_in || burn_in < 0) {
    throw std::invalid_argument("sample: need iterations > burn_in >= 0");
  }
  const BoxDomain& box = spec.problem->model().param_domain;
  const int q = box.dim();
  Eigen::VectorXd theta = init ? *init : box.center();
  double lp = log_posterior(spec, theta);
  if (!std::isfinite(lp)) {
    throw std::runtime_error("sample: non-finite log-density at the initial point");
  }

  Rng rng(seed);
  Eigen::VectorXd scale = 0.1 * (box.hi - box.lo);
  const int kept = iterations - burn_in;
  PosteriorChain chain;
  chain.samples.resize(kept, q);
  chain.log_density.resize(kept);
  chain.burn_in = burn_in;
  chain.seed = seed;

  int accepted_post = 0;
  int window_accepted = 0, window_count = 0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd prop(q);
    for (int j = 0; j < q; ++j) {
      prop[j] = reflect_into(theta[j] + scale[j] * rng.normal(), box.lo[j], box.hi[j]);
    }
    const double lp_prop = log_posterior(spec, prop);
    const double u = rng.uniform01();
    const bool accept = std::isfinite(lp_prop) && std::log(std::max(u, 1e-300)) < lp_prop - lp;
    if (accept) {
      theta = prop;
      lp = lp_prop;
    }
    if (it < burn_in) {
      window_accepted += accept ? 1 : 0;
      ++window_count;
      if (window_count == 50) {
        const double rate = static_cast<double>(window_accepted) / window_count;
        if (rate < 0.25) scale *= 0.8;
        if (rate > 0.40) scale *= 1.25;
        window_accepted = 0;
        window_count = 0;
      }
    } else {
      const int k = it - burn_in;
      chain.samples.row(k) = theta.transpose();
      chain.log_density[k] = lp;
      accepted_post += accept ? 1 : 0;
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted_post) / kept;
  return chain;
}

std::vector<std::pair<double, double>> credible_interval(const PosteriorChain& chain,
                                                         double level) {
  const int m = static_cast<int>(chain.samples.rows());
  if (m < 100) throw std::invalid_argument("credible_interval: need at least 100 samples");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("credible_interval: level must be in (0,1)");
  }
  const double alpha = 1.0 - level;
  std::vector<std::pair<double, double>> out;
  auto quantile = [&](std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v.back();
  };
  for (int j = 0; j < chain.samples.cols(); ++j) {
    std::vector<double> col(chain.samples.col(j).data(), chain.samples.col(j).data() + m);
    std::vector<double> col2 = col;
    out.emplace_back(quantile(col, alpha / 2.0), quantile(col2, 1.0 - alpha / 2.0));
  }
  return out;
}

}  // namespace ppkcal
