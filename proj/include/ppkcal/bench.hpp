#ifndef PPKCAL_BENCH_HPP
#define PPKCAL_BENCH_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppkcal/optimize.hpp"

namespace ppkcal {

enum class Method { Ls, L2Plugin, Pk, PpkNlo, PpkAmp };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ReplicationPlan {
  std::string benchmark;
  std::vector<int> sample_sizes;
  std::vector<Method> methods;
  int replications = 20;
  std::uint64_t base_seed = 0;
  std::optional<BoxDomain> pk_search_box;  // narrowed PK search region
  int quad_size = 0;                       // 0: benchmark default
};

struct ReplicationRecord {
  Method method;
  int n;
  int replication;
  Eigen::VectorXd theta_hat;
  double loss_value;
  bool failed = false;
  std::string error;
};

struct CellSummary {
  std::vector<Eigen::VectorXd> estimates;
  Eigen::VectorXd median;
  Eigen::VectorXd iqr;
  Eigen::VectorXd bias;   // vs theta*
  double rmse = 0.0;      // vs theta*
  int failures = 0;
};

struct ReplicationSummary {
  Eigen::VectorXd theta_star;
  std::vector<ReplicationRecord> records;
  std::map<std::pair<std::string, int>, CellSummary> cells;  // (method, n)
};

ReplicationSummary run_plan(const ReplicationPlan& plan);

/// Dense-grid plus polish minimization of the L2 loss against the true
/// process; the independent brute-force oracle for theta*.
Eigen::VectorXd theta_star_oracle(const Benchmark& bench, int grid_resolution,
                                  int quad_size = 200000, std::uint64_t quad_seed = 9001);

}  // namespace ppkcal

#endif  // PPKCAL_BENCH_HPP
