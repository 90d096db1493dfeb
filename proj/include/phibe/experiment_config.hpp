#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "phibe/basis.hpp"
#include "phibe/environments.hpp"
#include "phibe/policy_iteration.hpp"

namespace phibe {

inline constexpr int kConfigSchemaVersion = 1;

struct EnvironmentSpec {
  enum class Kind { kLqr, kMerton };
  Kind kind = Kind::kLqr;
  // LQR
  Eigen::MatrixXd A, B, Q, R;
  double sigma = 0.0;
  double beta = 0.0;
  // Merton (sigma and beta above are shared)
  double r = 0.0;
  double r_b = 0.0;
  double mu = 0.0;
  double gamma = 0.5;

  bool is_lqr() const { return kind == Kind::kLqr; }
  LqrSystem lqr() const;
  MertonMarket merton() const;
  std::unique_ptr<Environment> make() const;
  int state_dim() const { return is_lqr() ? static_cast<int>(A.rows()) : 1; }
  int action_dim() const { return is_lqr() ? static_cast<int>(B.cols()) : 1; }
};

/// "auto" picks a per-algorithm default; otherwise K (rows = actions) and offset.
struct InitialPolicySpec {
  bool automatic = true;
  Eigen::MatrixXd K;
  Eigen::VectorXd offset;
};

struct AlgorithmSpec {
  enum class Kind { kPhibe, kBe };
  Kind kind = Kind::kPhibe;
  int order = 1;
  /// Overrides the config-level initial policy unless automatic.
  InitialPolicySpec initial;
  /// "phibe1", "phibe2", ..., "be".
  std::string label() const;
};

struct PlanSpec {
  int num_traj = 16;
  int steps = 5;
  double init_lo = -3.0, init_hi = 3.0;
  double action_lo = -3.0, action_hi = 3.0;
  SamplingPlan plan(int state_dim, int action_dim) const;
};

struct OptionsSpec {
  std::string q_solver = "galerkin";  // galerkin | gd
  double gd_alpha = 0.0;
  int gd_max_iters = 10000;
  double gd_tol = 1e-9;
  std::string diffusion = "zero";        // zero | empirical
  std::string moments = "sampled";       // sampled | exact
  std::string discount = "exp";          // exp | optimal
  std::string be_next = "on_policy";     // on_policy | current_action
  std::string drift = "normalized";      // normalized | printed
  std::string q_windows = "held";        // held | all
  std::string policy_rollout = "held";   // held | every_step
  double early_stop_tol = 0.0;
  double a_max = 5.0;
  bool branch_refit = true;
  int threads = 0;  // 0: hardware concurrency
};

struct EvaluationSpec {
  double lo = -3.0, hi = 3.0;
  int grid_points = 0;  // 0: default for the dimension
};

struct SweepSpec {
  std::vector<double> dts;
  std::string mode = "oracle";  // oracle | sampled
  std::vector<long long> sizes;
  int points_per_traj = 4;
};

struct AtlasPanel {
  std::string param;  // beta | dt | q_over_r | A | B
  std::vector<double> values;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name;
  std::string notes;
  EnvironmentSpec env;
  double dt = 0.1;
  std::vector<AlgorithmSpec> algorithms;
  PlanSpec q_plan;
  PlanSpec policy_plan;
  std::string value_basis = "quadratic";  // quadratic | quadratic+1 | merton
  std::string q_basis = "quadratic";
  int iterations = 15;
  int repetitions = 1;
  std::uint64_t seed = 0;
  std::string output = "out";
  OptionsSpec options;
  InitialPolicySpec initial_policy;
  EvaluationSpec evaluation;
  SweepSpec sweep;
  std::vector<AtlasPanel> atlas;

  BasisSet make_value_basis() const;
  BasisSet make_q_basis() const;
  BatchPlan batch_plan() const;
  PiOptions pi_options(const AlgorithmSpec& algo, std::uint64_t seed) const;
  Box evaluation_box() const;
  int grid_points() const;
};

/// Strict parse: unknown keys, wrong types and inadmissible environments are
/// rejected with Error(kConfig) before anything runs.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Full normalized form; parse_config(config_to_json(c)) reproduces c.
nlohmann::ordered_json config_to_json(const ExperimentConfig& c);

/// FNV-1a 64 of the normalized config without the output path, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace phibe
