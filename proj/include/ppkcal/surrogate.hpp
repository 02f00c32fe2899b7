#ifndef PPKCAL_SURROGATE_HPP
#define PPKCAL_SURROGATE_HPP

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "ppkcal/kernels.hpp"

namespace ppkcal {

struct BoxDomain {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
  double diameter() const { return (hi - lo).norm(); }
  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const;
  Eigen::VectorXd clip(Eigen::VectorXd x) const;
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
};

BoxDomain make_box(std::initializer_list<double> lo, std::initializer_list<double> hi);

/// Evaluator y^s(x, theta) with optional analytic parameter gradient.
struct ComputerModel {
  using Eval = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using Grad = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  Eval eval;
  Grad grad;  // empty -> central differences
  BoxDomain design_domain;
  BoxDomain param_domain;
};

/// Constructs a model and probes it for finiteness on 32 random points of
/// Omega x Theta. Throws if a probe returns a non-finite value.
ComputerModel make_computer_model(ComputerModel::Eval eval, ComputerModel::Grad grad,
                                  BoxDomain design_domain, BoxDomain param_domain,
                                  std::uint64_t probe_seed = 0);

/// d y^s / d theta at (x, theta). Analytic gradient when supplied, otherwise
/// central differences with per-coordinate step 1e-5*(1+|theta_j|) clipped to
/// the parameter box (one-sided at the boundary).
Eigen::VectorXd model_gradient(const ComputerModel& model, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& theta);

struct PhysicalData {
  Eigen::MatrixXd X;  // n x d
  Eigen::VectorXd y;  // n
  double noise_sd = -1.0;  // < 0: unknown
  int n() const { return static_cast<int>(y.size()); }
};

void validate_physical_data(const PhysicalData& data, const BoxDomain& omega);

/// Seeded uniform Monte Carlo nodes over Omega with weight vol(Omega)/N, so
/// weighted sums approximate Lebesgue integrals over Omega.
struct QuadratureSet {
  Eigen::MatrixXd nodes;  // N x d
  double weight;          // vol / N
  std::uint64_t seed;
  BoxDomain domain;
  int size() const { return static_cast<int>(nodes.rows()); }
};

QuadratureSet uniform_quadrature(const BoxDomain& omega, int N, std::uint64_t seed);

/// <f1, f2>_quad = weight * sum_k f1(xi_k) f2(xi_k)
double quad_inner(const QuadratureSet& quad, const Eigen::VectorXd& f1_nodes,
                  const Eigen::VectorXd& f2_nodes);

/// Equispaced 1-D design x_i = a + (b-a)(i-1)/(n-1).
Eigen::MatrixXd equispaced_design(const BoxDomain& omega, int n);

/// Random Latin hypercube improved by min-distance-increasing element swaps.
Eigen::MatrixXd maximin_lhd(const BoxDomain& omega, int n, std::uint64_t seed);

enum class DesignKind { Equispaced, MaximinLhd };

struct Benchmark {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> truth;
  ComputerModel model;
  double noise_sd;
  KernelSpec kernel;
  bool estimate_rho;  // rho by residual GP likelihood instead of the default
  DesignKind design;
  int default_quad_size;
};

/// Built-in truth/model pairs: "sine" and "park".
Benchmark builtin_benchmark(const std::string& name);

/// Draws a synthetic dataset from a benchmark: design per its DesignKind,
/// y_i = zeta(x_i) + noise.
PhysicalData benchmark_data(const Benchmark& bench, int n, std::uint64_t seed);

}  // namespace ppkcal

#endif  // PPKCAL_SURROGATE_HPP
