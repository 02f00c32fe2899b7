#include <cmath>

#include "doctest.h"
#include "ppkcal/optimize.hpp"

using namespace ppkcal;

TEST_CASE("minimize finds interior quadratic minima") {
  const BoxDomain box = make_box({0.0}, {3.0});
  const LossFn f = [](const Eigen::VectorXd& t) { return (t[0] - 1.7) * (t[0] - 1.7); };
  const CalibrationResult res = minimize(f, box, OptimizerConfig{4, 1e-10, 1e-8, 500, 1});
  CHECK(res.theta[0] == doctest::Approx(1.7).epsilon(1e-4));
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(res.traces.size() == 4);
}

TEST_CASE("minimize in two dimensions with a rotated bowl") {
  const BoxDomain box = make_box({-2.0, -2.0}, {2.0, 2.0});
  const LossFn f = [](const Eigen::VectorXd& t) {
    const double a = t[0] - 0.3, b = t[1] + 0.8;
    return 2.0 * a * a + a * b + b * b;
  };
  const CalibrationResult res = minimize(f, box, OptimizerConfig{6, 1e-12, 1e-9, 1000, 2});
  CHECK(res.theta[0] == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(res.theta[1] == doctest::Approx(-0.8).epsilon(1e-3));
}

TEST_CASE("minimize clamps to the boundary when the minimum is outside") {
  const BoxDomain box = make_box({0.0}, {1.0});
  const LossFn f = [](const Eigen::VectorXd& t) { return (t[0] - 2.0) * (t[0] - 2.0); };
  const CalibrationResult res = minimize(f, box, OptimizerConfig{3, 1e-10, 1e-8, 500, 3});
  CHECK(res.theta[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("minimize is deterministic in the seed") {
  const BoxDomain box = make_box({0.0, 0.0}, {1.0, 1.0});
  const LossFn f = [](const Eigen::VectorXd& t) {
    return std::sin(9.0 * t[0]) * std::cos(7.0 * t[1]) + t.squaredNorm();
  };
  const CalibrationResult a = minimize(f, box, OptimizerConfig{8, 1e-9, 1e-7, 800, 11});
  const CalibrationResult b = minimize(f, box, OptimizerConfig{8, 1e-9, 1e-7, 800, 11});
  CHECK(a.theta == b.theta);
  CHECK(a.value == b.value);
}

TEST_CASE("scan classifies the stationary points of cos(2 theta)") {
  const BoxDomain box = make_box({0.0}, {3.0});
  const LossFn f = [](const Eigen::VectorXd& t) { return std::cos(2.0 * t[0]); };
  const LandscapeScan s = scan(f, box, 400);
  CHECK(s.grid.rows() == 400);
  CHECK(s.scaled.minCoeff() == 0.0);
  CHECK(s.scaled.maxCoeff() == 1.0);
  REQUIRE(s.stationary.size() == 1);  // only pi/2 is interior (pi > 3)
  CHECK(s.stationary[0].theta[0] == doctest::Approx(M_PI / 2).epsilon(1e-4));
  CHECK(s.stationary[0].kind == StationaryPoint::Kind::Min);
}

TEST_CASE("scan on a wiggly surface finds every interior stationary point") {
  const BoxDomain box = make_box({0.0}, {3.0});
  const LossFn f = [](const Eigen::VectorXd& t) { return std::cos(10.0 * t[0]); };
  const LandscapeScan s = scan(f, box, 600);
  // stationary at k*pi/10 for k = 1..9
  REQUIRE(s.stationary.size() == 9);
  for (int k = 1; k <= 9; ++k) {
    CHECK(s.stationary[k - 1].theta[0] == doctest::Approx(k * M_PI / 10).epsilon(1e-4));
    CHECK(s.stationary[k - 1].kind ==
          (k % 2 == 1 ? StationaryPoint::Kind::Min : StationaryPoint::Kind::Max));
  }
}

TEST_CASE("two-dimensional scan isolates the single bowl minimum") {
  const BoxDomain box = make_box({-1.0, -1.0}, {1.0, 1.0});
  const LossFn f = [](const Eigen::VectorXd& t) {
    return (t[0] - 0.2) * (t[0] - 0.2) + (t[1] + 0.3) * (t[1] + 0.3);
  };
  const LandscapeScan s = scan(f, box, 41);
  REQUIRE(s.stationary.size() == 1);
  CHECK(s.stationary[0].theta[0] == doctest::Approx(0.2).epsilon(1e-2));
  CHECK(s.stationary[0].theta[1] == doctest::Approx(-0.3).epsilon(1e-2));
  CHECK(s.stationary[0].kind == StationaryPoint::Kind::Min);
}

TEST_CASE("NLO counts stationary points and ignores positive affine maps") {
  const BoxDomain box = make_box({0.0}, {3.0});
  const LossFn f = [](const Eigen::VectorXd& t) { return std::cos(10.0 * t[0]); };
  const LossFn g = [&](const Eigen::VectorXd& t) { return 2.0 * f(t) + 0.5; };
  const OptimizerConfig cfg{4, 1e-9, 1e-7, 400, 5};
  const RuggednessReport a = nlo_index(f, box, cfg, 600);
  const RuggednessReport b = nlo_index(g, box, cfg, 600);
  CHECK(a.kind == "NLO");
  CHECK(a.value == 9.0);
  CHECK(b.value == a.value);
}

TEST_CASE("Amp axioms hold exactly on a shared sample") {
  const BoxDomain box = make_box({0.0}, {3.0});
  // values on a 0.25 lattice so scaling and shifting stay exact in binary
  const LossFn f = [](const Eigen::VectorXd& t) {
    return std::floor(4.0 * std::sin(3.0 * t[0]) + 0.5) / 4.0;
  };
  const LossFn f2 = [&](const Eigen::VectorXd& t) { return 2.0 * f(t); };
  const LossFn f7 = [&](const Eigen::VectorXd& t) { return f(t) + 7.0; };
  const RuggednessReport base = amp_index(f, box, 200, 9);
  CHECK(base.kind == "Amp");
  CHECK(base.value > 0.0);
  CHECK(amp_index(f2, box, 200, 9).value == base.value);
  CHECK(amp_index(f7, box, 200, 9).value == base.value);
  // constant surface has zero amplitude
  const LossFn c = [](const Eigen::VectorXd&) { return 3.3; };
  CHECK(amp_index(c, box, 200, 9).value == 0.0);
}

TEST_CASE("lambda rate rule") {
  // lambda = scale * n^{-2m/(2m+d)}, m = nu + d/2
  const double nu = 0.5;
  const int d = 1, n = 100;
  const double m = nu + d / 2.0;
  CHECK(lambda_from_scale(0.00138, n, nu, d) ==
        doctest::Approx(0.00138 * std::pow(n, -2.0 * m / (2.0 * m + d))).epsilon(1e-14));
  CHECK(lambda_from_scale(1.0, n, 0.5, 1) == doctest::Approx(std::pow(100.0, -2.0 / 3.0)));
}

TEST_CASE("lambda scale CV returns a grid member deterministically") {
  const Benchmark b = builtin_benchmark("sine");
  CalibrationProblem p(benchmark_data(b, 20, 1), b.model, b.kernel,
                       uniform_quadrature(b.model.design_domain, 200, 2));
  Eigen::VectorXd theta0(1);
  theta0 << 0.4;
  const double s1 = select_lambda_scale(p, theta0, 5, {}, 3);
  const double s2 = select_lambda_scale(p, theta0, 5, {}, 3);
  CHECK(s1 == s2);
  CHECK(s1 > 0.0);
  const double custom = select_lambda_scale(p, theta0, 5, {0.25}, 3);
  CHECK(custom == 0.25);
}

TEST_CASE("eta selection with a singleton grid") {
  const Benchmark b = builtin_benchmark("sine");
  CalibrationProblem p(benchmark_data(b, 12, 2), b.model, b.kernel,
                       uniform_quadrature(b.model.design_domain, 200, 3));
  const double lambda = lambda_from_scale(0.00138, 12, 0.5, 1);
  const EtaSelection sel =
      select_eta(p, lambda, RiKind::Nlo, {0.0}, OptimizerConfig{4, 1e-7, 1e-5, 300, 4});
  CHECK(sel.eta == 0.0);
  REQUIRE(sel.trace.size() == 1);
  CHECK(sel.trace[0].eta == 0.0);
  CHECK(sel.trace[0].ri >= 0.0);
}

TEST_CASE("default eta grid starts at zero and spans quarter decades") {
  const std::vector<double> grid = default_eta_grid();
  REQUIRE(grid.size() >= 2);
  CHECK(grid.front() == 0.0);
  CHECK(grid[1] == doctest::Approx(1e-4));
  CHECK(grid.back() == doctest::Approx(100.0));
  for (std::size_t i = 2; i < grid.size(); ++i) {
    CHECK(grid[i] / grid[i - 1] == doctest::Approx(std::pow(10.0, 0.25)).epsilon(1e-12));
  }
}

TEST_CASE("least squares recovers the parameter on exact data") {
  const Benchmark b = builtin_benchmark("exact");
  PhysicalData data = benchmark_data(b, 20, 1);
  // truth is x and the model is theta x, so theta0 = 1 reproduces the data
  const CalibrationResult res = calibrate_ls(data, b.model, OptimizerConfig{6, 1e-12, 1e-9, 500, 1});
  CHECK(res.theta[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(res.method == "ls");
}

TEST_CASE("rho profile likelihood stays inside its bracket and is deterministic") {
  const Benchmark b = builtin_benchmark("park");
  const PhysicalData data = benchmark_data(b, 20, 1);
  Eigen::VectorXd theta0(2);
  theta0 << 0.9, 0.3;
  const double rho = estimate_rho_mle(data, b.model, theta0, 3.5);
  CHECK(rho > 0.0);
  const double diam = b.model.design_domain.diameter();
  CHECK(rho >= 0.01 * diam);
  CHECK(rho <= 10.0 * diam);
  CHECK(estimate_rho_mle(data, b.model, theta0, 3.5) == rho);
}

TEST_CASE("predict_truth adds the fitted discrepancy to the model") {
  const Benchmark b = builtin_benchmark("sine");
  CalibrationProblem p(benchmark_data(b, 25, 3), b.model, b.kernel,
                       uniform_quadrature(b.model.design_domain, 300, 4));
  const double lambda = lambda_from_scale(0.00138, 25, 0.5, 1);
  const CalibrationResult res = calibrate_pk(p, lambda, OptimizerConfig{6, 1e-8, 1e-6, 500, 5});
  REQUIRE(res.fit);
  Eigen::VectorXd x(1);
  x << 0.7;
  const double expect = predict(*res.fit, x) + b.model.eval(x, res.theta);
  CHECK(predict_truth(res, b.model, x) == doctest::Approx(expect).epsilon(1e-12));
}
