#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "phibe/experiment_config.hpp"
#include "phibe/policy.hpp"

namespace phibe {

/// Tidy table plus aggregates. Every row starts with the config hash and the
/// seed it was produced from; wall times live only in the summary.
struct ResultRecord {
  std::string kind;  // run-case | dt-sweep | batch-sweep | atlas
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  nlohmann::ordered_json summary;
  double wall_ms = 0.0;

  std::string csv() const;
};

enum class SweepMode { kOracle, kSampled };

SweepMode parse_sweep_mode(const std::string& s);

/// Starting policy when the config says "auto". LQR PhiBE starts from K = 0
/// if A - beta/2 is stable and from the gain placing the closed loop at -I
/// otherwise; LQR BE starts from K = 0 if the discounted held-action map is
/// contracting and from the one-step deadbeat gain otherwise; Merton starts
/// from the allocation 0.5.
LinearPolicy default_initial_policy(const ExperimentConfig& config,
                                    const AlgorithmSpec& algo, double dt);

/// Runs every algorithm `repetitions` times (seed derive_seed(seed, rep)) and
/// scores each iterate against the analytic optimum.
ResultRecord run_case(const ExperimentConfig& config);

/// Oracle mode: |K_hat_i - K| and |K_tilde - K| per dt, independent of the seed.
/// Sampled mode: full policy iteration per dt. Slopes are fitted when at least
/// two finite positive errors exist.
ResultRecord dt_sweep(const ExperimentConfig& config, const std::vector<double>& dts,
                      SweepMode mode);

/// Total data budget D split into floor(D / points_per_traj) trajectories.
/// Runs that cannot be carried out are marked failed, not thrown.
ResultRecord batch_sweep(const ExperimentConfig& config, const std::vector<long long>& sizes);

/// Analytic gain errors over one-parameter families around the base system.
ResultRecord error_atlas(const ExperimentConfig& config);

/// results.csv, config.echo.json and summary.json under `dir`.
void write_outputs(const ExperimentConfig& config, const ResultRecord& record,
                   const std::string& dir);

/// Least-squares slope of log(y) against log(x) over finite positive y.
/// Returns NaN with fewer than two usable points.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman rank correlation; NaN with fewer than two points.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace phibe
