#ifndef PPKCAL_PROJECTION_HPP
#define PPKCAL_PROJECTION_HPP

#include <memory>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>

#include "ppkcal/kernels.hpp"
#include "ppkcal/surrogate.hpp"

namespace ppkcal {

/// Per-theta cached quadrature integrals enabling closed-form evaluation of
/// the projected kernel
///   K_theta(x1,x2) = K(x1,x2) + w(x1)' H^-1 w(x2) - h(x1)' H^-1 h(x2),
/// with h(x) = <K(x,.), g(.)>, E = <g, g'>, H = <<K(t1,t2) g(t1) g(t2)'>>
/// and w(x) = H E^-1 g(x) - h(x). All integrals share one quadrature set,
/// which makes the orthogonality of K_theta(x,.) to the gradient directions
/// exact in the quadrature measure.
struct ProjectionContext {
  Eigen::VectorXd theta;
  Eigen::MatrixXd E;  // q x q
  Eigen::MatrixXd H;  // q x q
  CholeskyFactor E_chol;
  CholeskyFactor H_chol;
  Eigen::MatrixXd node_grads;  // N x q, g_theta at quadrature nodes
  Eigen::MatrixXd h_nodes;     // N x q, h_theta at quadrature nodes
  Eigen::MatrixXd w_nodes;     // N x q
  const class ProjectionEngine* engine = nullptr;
};

using ContextPtr = std::shared_ptr<const ProjectionContext>;

/// Owns the model/kernel/quadrature triple and the theta-free caches (the
/// node Gram). Contexts built for different theta share those caches.
class ProjectionEngine {
 public:
  ProjectionEngine(ComputerModel model, KernelSpec kernel, QuadratureSet quad);

  const ComputerModel& model() const { return model_; }
  const KernelSpec& kernel() const { return kernel_; }
  const QuadratureSet& quad() const { return quad_; }

  /// Gram of the raw kernel over quadrature nodes (built lazily, reused
  /// across theta).
  const Eigen::MatrixXd& node_gram() const;

  /// Cached per-theta context; key is theta rounded to 12 decimal digits.
  ContextPtr context(const Eigen::VectorXd& theta) const;

  std::size_t cache_hits() const { return cache_hits_; }

 private:
  ComputerModel model_;
  KernelSpec kernel_;
  QuadratureSet quad_;
  mutable Eigen::MatrixXd node_gram_;
  mutable std::unordered_map<std::string, ContextPtr> cache_;
  mutable std::size_t cache_hits_ = 0;
};

/// Builds the context directly (uncached path used by the engine).
ProjectionContext build_context(const ProjectionEngine& engine, const Eigen::VectorXd& theta);

Eigen::VectorXd h_vec(const ProjectionContext& ctx, const Eigen::VectorXd& x);
Eigen::VectorXd w_vec(const ProjectionContext& ctx, const Eigen::VectorXd& x);

double projected_kernel(const ProjectionContext& ctx, const Eigen::VectorXd& x1,
                        const Eigen::VectorXd& x2);

/// Orthogonal-Gaussian-process kernel K - h' H^-1 h.
double ogp_kernel(const ProjectionContext& ctx, const Eigen::VectorXd& x1,
                  const Eigen::VectorXd& x2);

/// n x n matrix of projected-kernel evaluations with h/w computed once per
/// point.
KernelMatrix projected_gram(const ProjectionContext& ctx, const Eigen::MatrixXd& points);

/// h_theta and w_theta stacked row-wise over a point set (each n x q).
struct HwMatrices {
  Eigen::MatrixXd h;
  Eigen::MatrixXd w;
};
HwMatrices hw_matrices(const ProjectionContext& ctx, const Eigen::MatrixXd& points);

/// Cross matrix [K_theta(a_i, b_j)] from precomputed h/w blocks and the
/// raw-kernel cross matrix between the same point sets.
Eigen::MatrixXd projected_cross(const ProjectionContext& ctx, const HwMatrices& a,
                                const HwMatrices& b, const Eigen::MatrixXd& raw_cross);

}  // namespace ppkcal

#endif  // PPKCAL_PROJECTION_HPP
