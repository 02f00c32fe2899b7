#include "ppkcal/discrepancy.hpp"

#include <stdexcept>

namespace ppkcal {

namespace {

// h at design points from the theta-free node/data cross gram:
// h(x_i) = weight * sum_k K(x_i, xi_k) g(xi_k)
HwMatrices hw_from_cross(const ProjectionContext& ctx, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& cross_nodes_data) {
  HwMatrices out;
  out.h = ctx.engine->quad().weight * cross_nodes_data.transpose() * ctx.node_grads;
  const int n = static_cast<int>(X.rows());
  const int q = static_cast<int>(ctx.E.rows());
  Eigen::MatrixXd grads(n, q);
  for (int i = 0; i < n; ++i) {
    grads.row(i) =
        model_gradient(ctx.engine->model(), X.row(i).transpose(), ctx.theta).transpose();
  }
  out.w = grads * ctx.E_chol.solve(ctx.H) - out.h;
  return out;
}

}  // namespace

DiscrepancyFit fit_discrepancy(const PhysicalData& data, ContextPtr ctx, double lambda,
                               const Eigen::MatrixXd* cross_nodes_data) {
  if (!(lambda > 0.0)) throw std::invalid_argument("fit_discrepancy: lambda must be positive");
  DiscrepancyFit fit;
  fit.ctx = ctx;
  fit.lambda = lambda;
  fit.X = data.X;
  const int n = data.n();

  fit.delta.resize(n);
  for (int i = 0; i < n; ++i) {
    fit.delta[i] = data.y[i] - ctx->engine->model().eval(data.X.row(i).transpose(), ctx->theta);
  }

  fit.hw_data = cross_nodes_data ? hw_from_cross(*ctx, data.X, *cross_nodes_data)
                                 : hw_matrices(*ctx, data.X);
  const Eigen::MatrixXd raw = kernel_gram(ctx->engine->kernel(), data.X);
  fit.gram = projected_cross(*ctx, fit.hw_data, fit.hw_data, raw);
  fit.gram = 0.5 * (fit.gram + fit.gram.transpose());

  Eigen::MatrixXd A = fit.gram;
  A.diagonal().array() += static_cast<double>(n) * lambda;
  const CholeskyFactor chol = safe_cholesky(A);
  fit.jitter = chol.jitter;
  fit.coef = chol.solve(fit.delta);
  return fit;
}

double predict(const DiscrepancyFit& fit, const Eigen::VectorXd& x) {
  const ProjectionContext& ctx = *fit.ctx;
  const Eigen::VectorXd hx = h_vec(ctx, x);
  const Eigen::VectorXd wx =
      ctx.H * ctx.E_chol.solve(model_gradient(ctx.engine->model(), x, ctx.theta)) - hx;
  double out = 0.0;
  const Eigen::MatrixXd Hw = ctx.H_chol.solve(fit.hw_data.w.transpose());  // q x n
  const Eigen::MatrixXd Hh = ctx.H_chol.solve(fit.hw_data.h.transpose());
  for (int i = 0; i < fit.n(); ++i) {
    const double raw = matern_eval(ctx.engine->kernel(), (x.transpose() - fit.X.row(i)).norm());
    out += fit.coef[i] * (raw + wx.dot(Hw.col(i)) - hx.dot(Hh.col(i)));
  }
  return out;
}

Eigen::VectorXd predict_nodes(const DiscrepancyFit& fit,
                              const Eigen::MatrixXd* cross_nodes_data) {
  const ProjectionContext& ctx = *fit.ctx;
  const QuadratureSet& quad = ctx.engine->quad();
  Eigen::MatrixXd raw;
  const Eigen::MatrixXd* crossp = cross_nodes_data;
  if (!crossp) {
    raw = kernel_cross(ctx.engine->kernel(), quad.nodes, fit.X);
    crossp = &raw;
  }
  HwMatrices nodes_hw{ctx.h_nodes, ctx.w_nodes};
  const Eigen::MatrixXd cross_theta = projected_cross(ctx, nodes_hw, fit.hw_data, *crossp);
  return cross_theta * fit.coef;
}

double rkhs_norm_sq(const DiscrepancyFit& fit) {
  return fit.coef.dot(fit.gram * fit.coef);
}

double l2_norm_sq(const DiscrepancyFit& fit, const Eigen::MatrixXd* cross_nodes_data) {
  const Eigen::VectorXd vals = predict_nodes(fit, cross_nodes_data);
  return fit.ctx->engine->quad().weight * vals.squaredNorm();
}

double empirical_norm_sq(const Eigen::VectorXd& values) {
  return values.squaredNorm() / static_cast<double>(values.size());
}

}  // namespace ppkcal
