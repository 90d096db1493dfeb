// End-to-end acceptance checks. Prints one [PASS]/[FAIL] line per criterion,
// with the measured numbers underneath; exits non-zero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phibe/basis.hpp"
#include "phibe/coefficients.hpp"
#include "phibe/environments.hpp"
#include "phibe/error.hpp"
#include "phibe/experiment_config.hpp"
#include "phibe/experiments.hpp"
#include "phibe/increments.hpp"
#include "phibe/matcore.hpp"
#include "phibe/oracles.hpp"
#include "phibe/policy_eval.hpp"
#include "phibe/q_approx.hpp"
#include "rational.hpp"

#ifndef PHIBE_CONFIG_DIR
#define PHIBE_CONFIG_DIR "configs"
#endif

using namespace phibe;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("  violated: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back("  " + s); }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string g(double x) { return fmt("%.6g", x); }

ExperimentConfig config(const std::string& name) {
  return load_config(std::string(PHIBE_CONFIG_DIR) + "/" + name + ".json");
}

// Printed-decimal agreement: |x - printed| within half a unit in the last place.
bool matches_printed(double x, double printed, int decimals) {
  return std::abs(x - printed) <= 0.5 * std::pow(10.0, -decimals) + 1e-12;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome coefficient_identities() {
  Outcome o;
  for (int i = 1; i <= 6; ++i) {
    const auto& c = bellman_order_coefficients(i).coeffs;
    double worst = 0.0;
    for (int k = 1; k <= i; ++k) {
      double s = 0.0;
      for (int j = 1; j <= i; ++j) s += c[j - 1] * std::pow(j, k);
      worst = std::max(worst, std::abs(s - (k == 1 ? 1.0 : 0.0)));
    }
    o.check(worst < 1e-10, "moment identity, order " + std::to_string(i) + ": " + g(worst));
  }
  const std::vector<std::vector<Rational>> expect = {
      {Rational(2), Rational(-1, 2)}, {Rational(3), Rational(-3, 2), Rational(1, 3)}};
  for (int order : {2, 3}) {
    const auto exact = exact_order_coefficients(order);
    const auto& c = bellman_order_coefficients(order).coeffs;
    for (int j = 0; j < order; ++j) {
      o.check(exact[j] == expect[order - 2][j], "rational elimination, order " + std::to_string(order));
      o.check(std::abs(c[j] - exact[j].to_double()) < 1e-12,
              "order " + std::to_string(order) + " coefficient " + std::to_string(j + 1));
    }
  }
  const auto& c3 = bellman_order_coefficients(3).coeffs;
  o.note("a(2) = (" + g(bellman_order_coefficients(2).coeffs[0]) + ", " +
         g(bellman_order_coefficients(2).coeffs[1]) + "), a(3) = (" + g(c3[0]) + ", " + g(c3[1]) +
         ", " + g(c3[2]) + ")");
  return o;
}

Outcome riccati_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ua(-5, 5), ub(0.2, 3), uq(0.1, 5), us(0, 1), ubeta(0.05, 2);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    const double beta = ubeta(rng);
    const LqrSystem sys = LqrSystem::scalar(ua(rng), (n % 2 ? 1 : -1) * ub(rng), -uq(rng), -uq(rng),
                                            us(rng), beta);
    const double k = lqr_optimal(sys).policy.K(0, 0);
    const double k1 = lqr_optimal_1d(sys).K(0, 0);
    worst = std::max(worst, std::abs(k - k1) / std::max(1.0, std::abs(k1)));
  }
  o.check(worst < 1e-10, "200 random 1D systems, worst gap " + g(worst));
  o.note("200 random 1D systems: worst |K - K_1d| = " + g(worst));

  const struct {
    const char* name;
    double printed;
    int decimals;
  } cases[] = {{"lqr1d_case1_det", -2.4142, 4},
               {"lqr1d_case2_det", -20.050, 3},
               {"lqr1d_case3_det", -101.00, 2},
               {"lqr1d_case4_det", -200.0050, 4}};
  for (const auto& c : cases) {
    const double k = lqr_optimal(config(c.name).env.lqr()).policy.K(0, 0);
    o.check(matches_printed(k, c.printed, c.decimals), std::string(c.name) + " K = " + fmt("%.6f", k));
    o.note(std::string(c.name) + ": K = " + fmt("%.6f", k));
  }
  const MatrixXd k2 = lqr_optimal(config("lqr2d_case1_det").env.lqr()).policy.K;
  const double printed[2][2] = {{-0.3994, 0.1253}, {0.1163, -0.5850}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      o.check(matches_printed(k2(i, j), printed[i][j], 4),
              "lqr2d_case1_det K(" + std::to_string(i) + "," + std::to_string(j) + ") = " + fmt("%.6f", k2(i, j)));
  o.note("lqr2d_case1_det: K = [" + fmt("%.4f", k2(0, 0)) + " " + fmt("%.4f", k2(0, 1)) + "; " +
         fmt("%.4f", k2(1, 0)) + " " + fmt("%.4f", k2(1, 1)) + "]");
  return o;
}

Outcome zero_discount_recovery() {
  Outcome o;
  const char* names[] = {"lqr1d_case1_det", "lqr1d_case2_det", "lqr1d_case3_det", "lqr1d_case4_det",
                         "lqr2d_case1_det", "lqr2d_case2_det"};
  for (const char* name : names) {
    const auto cfg = config(name);
    const LqrSystem sys = cfg.env.lqr();
    const MatrixXd k = lqr_optimal(sys).policy.K;
    std::string line = std::string(name) + " (dt " + g(cfg.dt) + "):";
    for (int order : {1, 2}) {
      double err = INFINITY;
      std::string why;
      try {
        err = (phibe_optimal(sys, cfg.dt, order).K - k).norm();
      } catch (const Error& e) {
        why = e.what();
      }
      line += " |K_hat_" + std::to_string(order) + " - K| = " + g(err);
      if (!why.empty()) line += " (" + why + ")";
      o.check(err < 1e-8, std::string(name) + " order " + std::to_string(order) + " error " + g(err));
      if (order == 2 && sys.state_dim() == 1) {
        const auto eff = phibe_effective_dynamics(sys, cfg.dt, 2);
        if (eff.B_hat(0, 0) * sys.B()(0, 0) < 0.0) {
          line += " [B_hat_2 = " + g(eff.B_hat(0, 0)) + " has flipped sign; K_hat_2 is the optimum of a"
                  " system with reversed control]";
        }
      }
    }
    o.note(line);
  }
  if (!o.pass) {
    o.note("analysis: in 1D the effective pair is (A_hat, B_hat) = c (A, B) for a scalar c, and with"
           " beta = 0 the optimal gain is invariant under that rescaling as long as c > 0. For order 2"
           " c turns negative once A dt exceeds about 1.26 (case 1 has A dt = 2), so K_hat_2 becomes the"
           " optimum of the reversed-control system. In 2D the factor is a matrix that does not commute"
           " with the Riccati data, so neither order is exact.");
  }
  return o;
}

Outcome convergence_order() {
  Outcome o;
  for (const char* name : {"dt_sweep_1d", "dt_sweep_2d"}) {
    const auto cfg = config(name);
    const auto rec = dt_sweep(cfg, cfg.sweep.dts, SweepMode::kOracle);
    const auto& s = rec.summary["slopes"];
    const auto slope = [&](const char* k) {
      return s.contains(k) && s[k].is_number() ? s[k].get<double>() : NAN;
    };
    const double s1 = slope("phibe1"), s2 = slope("phibe2"), sb = slope("be");
    o.note(std::string(name) + ": slope(K_hat_1) = " + fmt("%.3f", s1) + ", slope(K_hat_2) = " +
           fmt("%.3f", s2) + ", slope(K_tilde) = " + fmt("%.3f", sb));
    o.check(std::abs(s1 - 1.0) <= 0.2, std::string(name) + " K_hat_1 slope " + fmt("%.3f", s1));
    o.check(std::abs(s2 - 2.0) <= 0.3, std::string(name) + " K_hat_2 slope " + fmt("%.3f", s2));
    o.check(std::abs(sb - 1.0) <= 0.2, std::string(name) + " K_tilde slope " + fmt("%.3f", sb));
    std::string table = "  errors:";
    for (const auto& row : rec.summary["table"]) {
      table += " " + row["algorithm"].get<std::string>() + "@" + g(row["dt"].get<double>()) + "=" +
               (row["median"].is_number() ? g(row["median"].get<double>()) : std::string("nan"));
    }
    o.notes.push_back(table);
  }
  if (!o.pass) {
    o.note("analysis: the 2D system has beta = 10 and a closed loop an order of magnitude faster"
           " than A; dt = 1 sits outside the asymptotic range and bends the least-squares fit.");
  }
  return o;
}

Outcome kernel_moments() {
  Outcome o;
  const LqrSystem sys = LqrSystem::scalar(-1, 1, -1, -1, 1, 1);
  const double dt = 0.1, s0 = 1.3, a0 = -0.8;
  const int n = 100000;
  const SamplingPlan plan{n, 1, Box::uniform(1, s0, s0), Box::uniform(1, a0, a0)};
  const auto batch = sample_lqr_batch(sys, dt, plan, 1, 555);
  double mean = 0.0, sq = 0.0;
  for (const auto& tr : batch.trajectories) {
    mean += tr.states(1, 0);
    sq += tr.states(1, 0) * tr.states(1, 0);
  }
  mean /= n;
  const double var = sq / n - mean * mean;
  const double b1 = phibe_effective_dynamics(sys, dt, 1).B_hat(0, 0);
  const double mu = std::exp(-dt) * s0 + b1 * a0 * dt;
  const double sigma2 = (1.0 - std::exp(-2.0 * dt)) / 2.0;
  const double se_mean = std::sqrt(sigma2 / n), se_var = sigma2 * std::sqrt(2.0 / n);
  o.note("mean " + g(mean) + " vs " + g(mu) + " (" + fmt("%.2f", (mean - mu) / se_mean) + " SE)");
  o.note("variance " + g(var) + " vs " + g(sigma2) + " (" + fmt("%.2f", (var - sigma2) / se_var) + " SE)");
  o.check(std::abs(mean - mu) < 4.0 * se_mean, "mean outside 4 SE");
  o.check(std::abs(var - sigma2) < 4.0 * se_var, "variance outside 4 SE");
  o.check(std::abs(b1 - (1.0 - std::exp(-dt)) / dt) < 1e-12, "B_hat_1 closed form");
  return o;
}

// Closed loop of K = -1 on A = 0, B = 1, Q = R = -1: F = -1, M = -2. The
// policy is folded into the drift so that the data follow it continuously.
Outcome evaluation_order() {
  Outcome o;
  const double f = -1.0, m = -2.0, beta = 1.0;
  const double p = solve_policy_lyapunov(MatrixXd::Constant(1, 1, f), MatrixXd::Constant(1, 1, m), beta)(0, 0);
  const BasisSet basis = quadratic_state_basis(1, true);
  const LinearPolicy zero(MatrixXd::Zero(1, 1));
  const SamplingPlan plan{40, 6, Box::uniform(1, -3, 3), Box::uniform(1, -3, 3)};
  const std::vector<double> dts = {0.2, 0.1, 0.05, 0.025};

  for (double sigma : {0.0, 0.5}) {
    const LqrSystem sys = LqrSystem::scalar(f, 1.0, m, -1.0, sigma, beta);
    const LqrEnvironment env(sys);
    for (int order : {1, 2}) {
      std::vector<double> errs;
      for (double dt : dts) {
        const auto b = sample_policy_lqr_batch(sys, dt, zero, plan, 77);
        // Deterministic data are used as sampled; with noise the exact
        // conditional moments replace the increments.
        const auto windows = sigma == 0.0
                                 ? sampled_windows(b, order, DiffusionMode::kZero, WindowMode::kAll)
                                 : exact_policy_windows(b, env, zero, order, DiffusionMode::kEmpirical);
        const auto v = phibe_policy_evaluation(windows, basis, beta);
        errs.push_back(std::abs(v.theta(1) - p));
      }
      const double slope = fit_loglog_slope(dts, errs);
      std::string line = "sigma " + g(sigma) + ", order " + std::to_string(order) + ": slope " +
                         fmt("%.3f", slope) + ", errors";
      for (double e : errs) line += " " + g(e);
      o.note(line);
      o.check(std::abs(slope - order) <= 0.3, "sigma " + g(sigma) + " order " + std::to_string(order) +
                                                  " slope " + fmt("%.3f", slope));
    }
  }
  return o;
}

Outcome end_to_end_case1() {
  Outcome o;
  const auto rec = run_case(config("lqr1d_case1_det"));
  const auto& algos = rec.summary["algorithms"];
  const double vnorm = rec.summary["reference"]["value_star_l2_norm"].get<double>();
  const auto median = [&](const char* a, const char* metric) {
    const auto& m = algos[a]["final"][metric]["median"];
    return m.is_number() ? m.get<double>() : INFINITY;
  };
  for (const char* a : {"phibe1", "phibe2", "be"}) {
    o.note(std::string(a) + ": median value_l2 " + g(median(a, "value_l2")) + ", median k_err " +
           g(median(a, "k_err")) + ", completed " + std::to_string(algos[a]["completed"].get<int>()) + "/" +
           std::to_string(algos[a]["runs"].get<int>()));
  }
  const double phibe = median("phibe1", "value_l2"), be = median("be", "value_l2");
  o.note("|V*|_L2 = " + g(vnorm) + ", wall " + fmt("%.1f", rec.wall_ms / 1000.0) + " s");
  o.check(10.0 * phibe <= be, "PhiBE median " + g(phibe) + " is not 10x below BE " + g(be));
  o.check(phibe < 0.01 * vnorm, "PhiBE median " + g(phibe) + " above 1% of |V*|");
  return o;
}

Outcome merton_case1() {
  Outcome o;
  const MertonMarket market = config("merton_case1").env.merton();
  const double a_star = merton_optimal(market), c_star = merton_policy_value(market, a_star);
  o.note("optimum: allocation " + g(a_star) + ", value coefficient " + g(c_star));
  for (const char* name : {"merton_case1", "merton_case1_exact"}) {
    const auto rec = run_case(config(name));
    const auto& fin = rec.summary["algorithms"]["phibe2"]["final"];
    const auto get = [&](const char* k) {
      return fin.contains(k) && fin[k]["median"].is_number() ? fin[k]["median"].get<double>() : NAN;
    };
    const double a = get("allocation"), c = get("value_coef");
    o.note(std::string(name) + ": allocation " + g(a) + ", value coefficient " + g(c) + ", wall " +
           fmt("%.1f", rec.wall_ms / 1000.0) + " s");
    if (std::string(name) == "merton_case1") {
      o.check(std::abs(a - 1.5) <= 0.1, "sampled allocation " + g(a) + " not within 0.1 of 1.5");
      o.check(std::abs(c - c_star) <= 0.05 * std::abs(c_star), "sampled value coefficient " + g(c));
    } else {
      o.check(std::abs(a - 1.5) <= 1e-3, "exact-moment allocation " + g(a) + " not within 1e-3 of 1.5");
    }
  }
  if (!o.pass) {
    o.note("analysis: the allocation is the vertex of a fitted quadratic in a whose curvature comes"
           " from the wealth-squared diffusion estimate; at 10^6 points its Monte Carlo error dominates"
           " (seed-to-seed spread of several tenths) while the exact-moment run recovers 1.5.");
  }
  return o;
}

Outcome galerkin_gd() {
  Outcome o;
  const LqrSystem sys = LqrSystem::scalar(-1, 0.5, -1, -1, 0.3, 1.0);
  const SamplingPlan plan{300, 4, Box::uniform(1, -1, 1), Box::uniform(1, -1, 1)};
  const auto b = sample_lqr_batch(sys, 0.1, plan, 1, 4242);
  const BasisSet psi = quadratic_state_action_basis(1, 1, true);
  const BasisSet phi = quadratic_state_basis(1, true);
  ValueEstimate v;
  v.theta = VectorXd(2);
  v.theta << -0.05, -0.4;
  QOptions opt;
  opt.diffusion = DiffusionMode::kEmpirical;
  const auto gal = phibe_q_galerkin(b, psi, phi, v, opt);
  const auto windows = sampled_windows(b, 1, DiffusionMode::kEmpirical, WindowMode::kHeldOnly);
  const QSystem qs = assemble_q_system(windows, psi, phi, v, b.dt);
  const auto gd = phibe_q_gradient_descent(qs, VectorXd::Zero(psi.size()), 1.0 / q_gram_lambda_max(qs),
                                           GdStopping{500000, 1e-11});
  const double rel = (gd.omega - gal.omega).norm() / gal.omega.norm();
  o.note("Gram condition " + g(gal.condition) + ", GD iterations " + std::to_string(gd.iterations) +
         ", relative gap " + g(rel));
  o.check(rel < 1e-5, "relative gap " + g(rel));
  return o;
}

Outcome atlas_shapes() {
  Outcome o;
  const auto rec = error_atlas(config("atlas"));
  for (const auto& panel : rec.summary["panels"]) {
    const std::string param = panel["param"];
    if (param != "q_over_r" && param != "beta") continue;
    const auto& a = panel["algorithms"];
    const auto show = [&](const char* k) {
      return std::string(k) + " " + a[k]["shape"].get<std::string>() + " [" +
             g(a[k]["min"].get<double>()) + ", " + g(a[k]["max"].get<double>()) + "]";
    };
    o.note(param + ": " + show("phibe1") + "; " + show("be"));
    if (param == "q_over_r") {
      o.check(a["be"]["shape"] == "increasing", "BE is not strictly increasing in Q/R");
      o.check(a["phibe1"]["range"].get<double>() < 1e-10, "PhiBE order 1 varies along Q/R");
    } else {
      o.check(a["phibe1"]["shape"] == "rises_then_falls", "PhiBE is not rise-then-fall in beta");
      o.check(a["phibe1"]["min"].get<double>() < 1e-10, "beta = 0 endpoint is not zero");
    }
  }
  // The beta = 0 endpoint on its own.
  const auto base = config("atlas");
  const double e0 = (phibe_optimal(base.env.lqr(), base.dt, 1).K - lqr_optimal(base.env.lqr()).policy.K).norm();
  o.note("beta = 0 endpoint |K_hat_1 - K| = " + g(e0));
  o.check(e0 < 1e-10, "beta = 0 endpoint " + g(e0));
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "phibe_acceptance_determinism";
  fs::remove_all(root);
  const auto check_one = [&](const std::string& tag, ExperimentConfig cfg,
                             const std::function<ResultRecord(const ExperimentConfig&)>& run) {
    const fs::path first = root / (tag + "_a"), second = root / (tag + "_b");
    write_outputs(cfg, run(cfg), first.string());
    const ExperimentConfig echoed = load_config((first / "config.echo.json").string());
    write_outputs(echoed, run(echoed), second.string());
    const std::string a = slurp(first / "results.csv"), b = slurp(second / "results.csv");
    o.note(tag + ": " + std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "DIFFERENT"));
    o.check(!a.empty() && a == b, tag + " results.csv differs after re-run from the echo");
  };
  auto rc = config("lqr1d_case1_sto");
  rc.repetitions = 2;
  rc.iterations = 3;
  check_one("run-case", rc, [](const ExperimentConfig& c) { return run_case(c); });
  auto bs = config("batch_sweep");
  bs.repetitions = 2;
  bs.sweep.sizes = {500, 2000};
  check_one("batch-sweep", bs,
            [](const ExperimentConfig& c) { return batch_sweep(c, c.sweep.sizes); });
  auto ds = config("dt_sweep_1d");
  ds.sweep.mode = "sampled";
  ds.sweep.dts = {0.1, 1.0};
  ds.repetitions = 1;
  ds.iterations = 3;
  check_one("dt-sweep", ds, [](const ExperimentConfig& c) {
    return dt_sweep(c, c.sweep.dts, parse_sweep_mode(c.sweep.mode));
  });
  check_one("atlas", config("atlas"), [](const ExperimentConfig& c) { return error_atlas(c); });
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  const struct {
    int id;
    const char* name;
    std::function<Outcome()> run;
  } criteria[] = {
      {1, "coefficient identities", coefficient_identities},
      {2, "Riccati oracle vs closed form", riccati_oracle},
      {3, "beta = 0 exact recovery", zero_discount_recovery},
      {4, "order of convergence (oracle)", convergence_order},
      {5, "kernel sampler moments", kernel_moments},
      {6, "policy evaluation order", evaluation_order},
      {7, "end-to-end PI, 1D case 1", end_to_end_case1},
      {8, "Merton case 1", merton_case1},
      {9, "Galerkin / gradient descent q", galerkin_gd},
      {10, "error atlas shapes", atlas_shapes},
      {11, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
    for (const auto& n : o.notes) std::printf("%s\n", n.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
