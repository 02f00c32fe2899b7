#include "ppkcal/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ppkcal {

namespace {

std::string theta_key(const Eigen::VectorXd& theta) {
  std::string key;
  char buf[32];
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.12f|", theta[j]);
    key += buf;
  }
  return key;
}

// ~100 MB of cached node arrays; each context holds three N x q matrices
constexpr std::size_t kContextCacheBudget = 100'000'000;

}  // namespace

ProjectionEngine::ProjectionEngine(ComputerModel model, KernelSpec kernel, QuadratureSet quad)
    : model_(std::move(model)), kernel_(kernel), quad_(std::move(quad)) {}

const Eigen::MatrixXd& ProjectionEngine::node_gram() const {
  if (node_gram_.size() == 0) {
    node_gram_ = kernel_gram(kernel_, quad_.nodes);
  }
  return node_gram_;
}

ContextPtr ProjectionEngine::context(const Eigen::VectorXd& theta) const {
  const std::string key = theta_key(theta);
  auto it = cache_.find(key);
  if (it != cache_.end()) {
    ++cache_hits_;
    return it->second;
  }
  const std::size_t per_ctx = sizeof(double) * 3 *
                              static_cast<std::size_t>(quad_.nodes.rows()) *
                              std::max(1, model_.param_domain.dim());
  const std::size_t cap = std::clamp<std::size_t>(kContextCacheBudget / per_ctx, 64, 20000);
  if (cache_.size() >= cap) cache_.clear();
  auto ctx = std::make_shared<ProjectionContext>(build_context(*this, theta));
  cache_.emplace(key, ctx);
  return ctx;
}

ProjectionContext build_context(const ProjectionEngine& engine, const Eigen::VectorXd& theta) {
  const QuadratureSet& quad = engine.quad();
  const ComputerModel& model = engine.model();
  const int N = quad.size();
  const int q = model.param_domain.dim();
  if (N < q + 1) {
    throw std::invalid_argument("build_context: quadrature needs at least q+1 nodes");
  }
  if (!model.param_domain.contains(theta, 1e-9)) {
    throw std::invalid_argument("build_context: theta outside the parameter domain");
  }

  ProjectionContext ctx;
  ctx.theta = theta;
  ctx.engine = &engine;
  ctx.node_grads.resize(N, q);
  for (int k = 0; k < N; ++k) {
    ctx.node_grads.row(k) = model_gradient(model, quad.nodes.row(k).transpose(), theta).transpose();
  }
  const double w = quad.weight;
  ctx.E = w * ctx.node_grads.transpose() * ctx.node_grads;
  if (ctx.E.trace() <= 0.0) {
    throw std::runtime_error("build_context: parameter gradient directions degenerate at theta");
  }
  // A = K_nodes * G; h at the nodes is w*A, H = w^2 * G' * A
  Eigen::MatrixXd A = engine.node_gram() * ctx.node_grads;
  ctx.h_nodes = w * A;
  ctx.H = w * ctx.node_grads.transpose() * ctx.h_nodes;
  ctx.H = 0.5 * (ctx.H + ctx.H.transpose());  // symmetrize roundoff
  try {
    ctx.E_chol = safe_cholesky(ctx.E);
    ctx.H_chol = safe_cholesky(ctx.H);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("build_context: parameter gradient directions degenerate at theta");
  }
  // w(x) = H E^-1 g(x) - h(x); rows here, so G * (E^-1 H) - h_nodes
  ctx.w_nodes = ctx.node_grads * ctx.E_chol.solve(ctx.H) - ctx.h_nodes;
  return ctx;
}

Eigen::VectorXd h_vec(const ProjectionContext& ctx, const Eigen::VectorXd& x) {
  const QuadratureSet& quad = ctx.engine->quad();
  const KernelSpec& kernel = ctx.engine->kernel();
  const int N = quad.size();
  Eigen::VectorXd kx(N);
  for (int k = 0; k < N; ++k) {
    kx[k] = matern_eval(kernel, (x.transpose() - quad.nodes.row(k)).norm());
  }
  return quad.weight * ctx.node_grads.transpose() * kx;
}

Eigen::VectorXd w_vec(const ProjectionContext& ctx, const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = model_gradient(ctx.engine->model(), x, ctx.theta);
  return ctx.H * ctx.E_chol.solve(g) - h_vec(ctx, x);
}

double projected_kernel(const ProjectionContext& ctx, const Eigen::VectorXd& x1,
                        const Eigen::VectorXd& x2) {
  const double k = matern_eval(ctx.engine->kernel(), (x1 - x2).norm());
  const Eigen::VectorXd h1 = h_vec(ctx, x1), h2 = h_vec(ctx, x2);
  const Eigen::VectorXd w1 = ctx.H * ctx.E_chol.solve(model_gradient(ctx.engine->model(), x1, ctx.theta)) - h1;
  const Eigen::VectorXd w2 = ctx.H * ctx.E_chol.solve(model_gradient(ctx.engine->model(), x2, ctx.theta)) - h2;
  return k + w1.dot(ctx.H_chol.solve(w2)) - h1.dot(ctx.H_chol.solve(h2));
}

double ogp_kernel(const ProjectionContext& ctx, const Eigen::VectorXd& x1,
                  const Eigen::VectorXd& x2) {
  const double k = matern_eval(ctx.engine->kernel(), (x1 - x2).norm());
  const Eigen::VectorXd h1 = h_vec(ctx, x1), h2 = h_vec(ctx, x2);
  return k - h1.dot(ctx.H_chol.solve(h2));
}

HwMatrices hw_matrices(const ProjectionContext& ctx, const Eigen::MatrixXd& points) {
  const int n = static_cast<int>(points.rows());
  const int q = static_cast<int>(ctx.E.rows());
  HwMatrices out;
  out.h.resize(n, q);
  Eigen::MatrixXd grads(n, q);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = points.row(i).transpose();
    out.h.row(i) = h_vec(ctx, x).transpose();
    grads.row(i) = model_gradient(ctx.engine->model(), x, ctx.theta).transpose();
  }
  out.w = grads * ctx.E_chol.solve(ctx.H) - out.h;
  return out;
}

Eigen::MatrixXd projected_cross(const ProjectionContext& ctx, const HwMatrices& a,
                                const HwMatrices& b, const Eigen::MatrixXd& raw_cross) {
  return raw_cross + a.w * ctx.H_chol.solve(b.w.transpose()) -
         a.h * ctx.H_chol.solve(b.h.transpose());
}

KernelMatrix projected_gram(const ProjectionContext& ctx, const Eigen::MatrixXd& points) {
  const HwMatrices hw = hw_matrices(ctx, points);
  const Eigen::MatrixXd raw = kernel_gram(ctx.engine->kernel(), points);
  KernelMatrix km;
  km.M = projected_cross(ctx, hw, hw, raw);
  km.M = 0.5 * (km.M + km.M.transpose());
  km.chol = safe_cholesky(km.M);
  return km;
}

}  // namespace ppkcal
