#include "ppkcal/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ppkcal {

namespace {

std::string cache_key(const Eigen::VectorXd& theta, double lambda) {
  std::string key;
  char buf[48];
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.12f|", theta[j]);
    key += buf;
  }
  std::snprintf(buf, sizeof(buf), "%.16e", lambda);
  key += buf;
  return key;
}

constexpr std::size_t kPkCacheCap = 50000;
// full ridge fits (gram + factor) are retained only for this many entries;
// past it the cache keeps the scalars and fit() refits on demand
constexpr std::size_t kFitRetainCap = 256;

}  // namespace

CalibrationProblem::CalibrationProblem(PhysicalData data, ComputerModel model,
                                       KernelSpec kernel, QuadratureSet quad)
    : data_(std::move(data)), engine_(std::move(model), kernel, std::move(quad)) {
  validate_physical_data(data_, engine_.model().design_domain);
}

const Eigen::MatrixXd& CalibrationProblem::cross_nodes_data() const {
  if (cross_.size() == 0) {
    cross_ = kernel_cross(engine_.kernel(), engine_.quad().nodes, data_.X);
  }
  return cross_;
}

Eigen::VectorXd CalibrationProblem::residuals(const Eigen::VectorXd& theta) const {
  const int n = data_.n();
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) {
    r[i] = data_.y[i] - engine_.model().eval(data_.X.row(i).transpose(), theta);
  }
  return r;
}

const CalibrationProblem::PkTerms& CalibrationProblem::pk_terms(const Eigen::VectorXd& theta,
                                                                double lambda) const {
  const std::string key = cache_key(theta, lambda);
  auto it = pk_cache_.find(key);
  if (it != pk_cache_.end()) return it->second;
  if (pk_cache_.size() >= kPkCacheCap) pk_cache_.clear();

  ContextPtr ctx = engine_.context(theta);
  auto fitp = std::make_shared<DiscrepancyFit>(
      fit_discrepancy(data_, ctx, lambda, &cross_nodes_data()));
  PkTerms terms;
  terms.quad_form = fitp->delta.dot(fitp->coef);
  terms.l2_norm_sq = l2_norm_sq(*fitp, &cross_nodes_data());
  if (pk_cache_.size() < kFitRetainCap) terms.fit = std::move(fitp);
  return pk_cache_.emplace(key, std::move(terms)).first->second;
}

std::shared_ptr<const DiscrepancyFit> CalibrationProblem::fit(const Eigen::VectorXd& theta,
                                                              double lambda) const {
  const PkTerms& terms = pk_terms(theta, lambda);
  if (terms.fit) return terms.fit;
  return std::make_shared<DiscrepancyFit>(
      fit_discrepancy(data_, engine_.context(theta), lambda, &cross_nodes_data()));
}

double CalibrationProblem::pk_loss(const Eigen::VectorXd& theta, double lambda) const {
  return lambda * pk_terms(theta, lambda).quad_form;
}

double CalibrationProblem::fitted_l2_norm_sq(const Eigen::VectorXd& theta, double lambda) const {
  return pk_terms(theta, lambda).l2_norm_sq;
}

double CalibrationProblem::ppk_loss(const Eigen::VectorXd& theta, double lambda,
                                    double eta) const {
  const PkTerms& terms = pk_terms(theta, lambda);
  return lambda * terms.quad_form + eta * terms.l2_norm_sq;
}

void CalibrationProblem::clear_caches() const { pk_cache_.clear(); }

Eigen::VectorXd eval_at_nodes(const std::function<double(const Eigen::VectorXd&)>& f,
                              const QuadratureSet& quad) {
  const int N = quad.size();
  Eigen::VectorXd out(N);
  for (int k = 0; k < N; ++k) out[k] = f(quad.nodes.row(k).transpose());
  return out;
}

Eigen::VectorXd model_at_nodes(const ComputerModel& model, const Eigen::VectorXd& theta,
                               const QuadratureSet& quad) {
  const int N = quad.size();
  Eigen::VectorXd out(N);
  for (int k = 0; k < N; ++k) out[k] = model.eval(quad.nodes.row(k).transpose(), theta);
  return out;
}

double l2_loss(const Eigen::VectorXd& truth_nodes, const ComputerModel& model,
               const Eigen::VectorXd& theta, const QuadratureSet& quad) {
  const Eigen::VectorXd ys = model_at_nodes(model, theta, quad);
  return quad.weight * (truth_nodes - ys).squaredNorm();
}

double l2_loss(const std::function<double(const Eigen::VectorXd&)>& truth,
               const ComputerModel& model, const Eigen::VectorXd& theta,
               const QuadratureSet& quad) {
  return l2_loss(eval_at_nodes(truth, quad), model, theta, quad);
}

double pk_loss(CalibrationProblem& problem, const Eigen::VectorXd& theta, double lambda) {
  return problem.pk_loss(theta, lambda);
}

double ppk_loss(CalibrationProblem& problem, const Eigen::VectorXd& theta, double lambda,
                double eta) {
  return problem.ppk_loss(theta, lambda, eta);
}

double pkl2_loss(const Eigen::VectorXd& truth_nodes, const ProjectionEngine& engine,
                 const Eigen::VectorXd& theta, double C) {
  ContextPtr ctx = engine.context(theta);
  const Eigen::VectorXd d =
      truth_nodes - model_at_nodes(engine.model(), theta, engine.quad());
  const Eigen::VectorXd a = engine.quad().weight * ctx->node_grads.transpose() * d;
  return a.dot(ctx->E_chol.solve(a)) + C;
}

Eigen::VectorXd scale_loss(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw std::invalid_argument("scale_loss: empty input");
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (hi == lo) return Eigen::VectorXd::Zero(values.size());
  return (values.array() - lo) / (hi - lo);
}

}  // namespace ppkcal
