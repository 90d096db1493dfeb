// Command-line front end: runs experiment configs and prints analytic oracles.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "phibe/error.hpp"
#include "phibe/experiment_config.hpp"
#include "phibe/experiments.hpp"
#include "phibe/oracles.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::string out;
  std::string mode;
};

void add_common(CLI::App* sub, Common& c, bool with_mode) {
  sub->add_option("config", c.config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the master seed");
  sub->add_option("--reps", c.reps, "override the number of repetitions")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory (default: the config's output)");
  if (with_mode) {
    sub->add_option("--mode", c.mode, "oracle or sampled")->check(CLI::IsMember({"oracle", "sampled"}));
  }
}

phibe::ExperimentConfig load(const Common& c) {
  phibe::ExperimentConfig cfg = phibe::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.reps) cfg.repetitions = *c.reps;
  if (!c.mode.empty()) cfg.sweep.mode = c.mode;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

void finish(const phibe::ExperimentConfig& cfg, const phibe::ResultRecord& rec) {
  phibe::write_outputs(cfg, rec, cfg.output);
  std::cout << rec.kind << " " << cfg.name << " hash=" << rec.config_hash << " rows=" << rec.rows.size()
            << " wall_ms=" << static_cast<long long>(rec.wall_ms) << "\n";
  std::cout << "wrote " << cfg.output << "/{results.csv,config.echo.json,summary.json}\n";
}

std::string mat(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os.precision(10);
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << (i ? "; " : "");
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << m(i, j);
  }
  os << "]";
  return os.str();
}

struct OracleArgs {
  double a = 1.0, b = 1.0, q = -1.0, r = -1.0, sigma = 0.0, beta = 0.0, dt = 0.1;
  std::vector<int> orders{1, 2};
  std::string config_path;
};

void print_oracle(const OracleArgs& o) {
  std::optional<phibe::LqrSystem> sys;
  double dt = o.dt;
  if (!o.config_path.empty()) {
    const auto cfg = phibe::load_config(o.config_path);
    sys = cfg.env.lqr();
    dt = cfg.dt;
  } else {
    sys = phibe::LqrSystem::scalar(o.a, o.b, o.q, o.r, o.sigma, o.beta);
  }
  const auto opt = phibe::lqr_optimal(*sys);
  std::cout << "dt        " << dt << "\n";
  std::cout << "K         " << mat(opt.policy.K) << "\n";
  std::cout << "P         " << mat(opt.value.P) << "  (+ " << opt.value.constant << ")\n";
  for (int i : o.orders) {
    const auto k = phibe::phibe_optimal(*sys, dt, i).K;
    std::cout << "K_hat_" << i << "   " << mat(k) << "  err " << (k - opt.policy.K).norm() << "\n";
  }
  const auto kt = phibe::be_optimal(*sys, dt).K;
  std::cout << "K_tilde   " << mat(kt) << "  err " << (kt - opt.policy.K).norm() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PhiBE policy iteration experiments"};
  app.require_subcommand(1);

  Common run_args, sweep_args, batch_args, atlas_args;
  auto* run = app.add_subcommand("run-case", "policy iteration per algorithm and repetition");
  add_common(run, run_args, false);
  auto* sweep = app.add_subcommand("dt-sweep", "gain error against the sampling interval");
  add_common(sweep, sweep_args, true);
  auto* batch = app.add_subcommand("batch-sweep", "value error against the data budget");
  add_common(batch, batch_args, false);
  auto* atlas = app.add_subcommand("atlas", "analytic gain errors over parameter families");
  add_common(atlas, atlas_args, false);

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle", "print K, P, K_hat_i and K_tilde for a system");
  oracle->add_option("--a", oa.a, "drift A");
  oracle->add_option("--b", oa.b, "input B");
  oracle->add_option("--q", oa.q, "state reward Q (negative)");
  oracle->add_option("--r", oa.r, "action reward R (negative)");
  oracle->add_option("--sigma", oa.sigma, "noise level");
  oracle->add_option("--beta", oa.beta, "discount rate");
  oracle->add_option("--dt", oa.dt, "sampling interval")->check(CLI::PositiveNumber);
  oracle->add_option("--order", oa.orders, "PhiBE orders")->expected(1, -1);
  oracle->add_option("--config", oa.config_path, "take the system and dt from a config")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const auto cfg = load(run_args);
      finish(cfg, phibe::run_case(cfg));
    } else if (*sweep) {
      const auto cfg = load(sweep_args);
      if (cfg.sweep.dts.empty()) phibe::fail_config("sweep.dts: no dt values configured");
      finish(cfg, phibe::dt_sweep(cfg, cfg.sweep.dts, phibe::parse_sweep_mode(cfg.sweep.mode)));
    } else if (*batch) {
      const auto cfg = load(batch_args);
      if (cfg.sweep.sizes.empty()) phibe::fail_config("sweep.sizes: no batch sizes configured");
      finish(cfg, phibe::batch_sweep(cfg, cfg.sweep.sizes));
    } else if (*atlas) {
      const auto cfg = load(atlas_args);
      finish(cfg, phibe::error_atlas(cfg));
    } else if (*oracle) {
      print_oracle(oa);
    }
  } catch (const phibe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == phibe::ErrorKind::kNumerical ? kExitNumerical : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
