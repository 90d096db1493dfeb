#include "phibe/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "phibe/error.hpp"
#include "phibe/matcore.hpp"
#include "phibe/oracles.hpp"
#include "phibe/rng.hpp"

namespace phibe {
namespace {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// JSON has no inf/nan; store them as null.
ordered_json jnum(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

int worker_count(const ExperimentConfig& c, std::size_t units) {
  int n = c.options.threads > 0 ? c.options.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, n);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), units));
}

// Results are written by index, so the output order never depends on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex err_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

struct Stats {
  double mean = kNaN, median = kNaN, min = kNaN, max = kNaN;
  std::size_t count = 0;
};

Stats stats_of(std::vector<double> v) {
  Stats s;
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return s;
}

ordered_json stats_json(const Stats& s) {
  return {{"mean", jnum(s.mean)},
          {"median", jnum(s.median)},
          {"min", jnum(s.min)},
          {"max", jnum(s.max)},
          {"count", s.count}};
}

// Scores iterates against the analytic optimum of the configured environment.
class Truth {
 public:
  explicit Truth(const ExperimentConfig& c)
      : lqr_(c.env.is_lqr()), box_(c.evaluation_box()), grid_(c.grid_points()) {
    if (lqr_) {
      sys_ = std::make_unique<LqrSystem>(c.env.lqr());
      opt_ = lqr_optimal(*sys_);
      const QuadraticValue v = opt_.value;
      v_norm_ = l2_distance_on_box(
          [v](const Eigen::VectorXd& s) { return v(s); },
          [](const Eigen::VectorXd&) { return 0.0; }, box_, grid_);
    } else {
      market_ = std::make_unique<MertonMarket>(c.env.merton());
      power_ = 1.0 - c.env.gamma;
      a_star_ = merton_optimal(*market_);
      c_star_ = merton_policy_value(*market_, a_star_);
      const double p = power_;
      pow_norm_ = l2_distance_on_box(
          [p](const Eigen::VectorXd& s) { return std::pow(s(0), p); },
          [](const Eigen::VectorXd&) { return 0.0; }, box_, grid_);
      v_norm_ = std::abs(c_star_) * pow_norm_;
    }
  }

  bool lqr() const { return lqr_; }
  const char* primary() const { return lqr_ ? "k_err" : "a_err"; }

  std::vector<Metric> score(const LinearPolicy& pi, const ValueEstimate& value,
                            const BasisSet& phi) const {
    std::vector<Metric> out;
    if (lqr_) {
      out.push_back({"k_err", (pi.K - opt_.policy.K).norm()});
      double err = kInf;
      try {
        const QuadraticValue v = lqr_policy_value(*sys_, pi);
        const QuadraticValue star = opt_.value;
        err = l2_distance_on_box([v](const Eigen::VectorXd& s) { return v(s); },
                                 [star](const Eigen::VectorXd& s) { return star(s); }, box_,
                                 grid_);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumerical) throw;
      }
      out.push_back({"value_l2", err});
    } else {
      const double a = pi.offset(0);
      out.push_back({"a_err", std::abs(a - a_star_)});
      double coef = kNaN;
      try {
        coef = merton_policy_value(*market_, a);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumerical) throw;
      }
      out.push_back({"value_coef", coef});
      out.push_back({"value_l2", std::isnan(coef) ? kInf : std::abs(coef - c_star_) * pow_norm_});
    }
    if (value.theta.size() == phi.size()) {
      out.push_back({"value_est_l2", estimate_error(value, phi)});
      if (!lqr_ && phi.size() == 1) out.push_back({"value_est_coef", value.theta(0)});
    }
    for (Eigen::Index i = 0; i < pi.K.rows(); ++i) {
      if (lqr_) {
        for (Eigen::Index j = 0; j < pi.K.cols(); ++j) {
          out.push_back({"K_" + std::to_string(i) + "_" + std::to_string(j), pi.K(i, j)});
        }
      } else {
        out.push_back({"allocation", pi.offset(i)});
      }
    }
    return out;
  }

  double estimate_error(const ValueEstimate& value, const BasisSet& phi) const {
    if (lqr_) {
      const QuadraticValue star = opt_.value;
      return l2_distance_on_box([&](const Eigen::VectorXd& s) { return value(phi, s); },
                                [star](const Eigen::VectorXd& s) { return star(s); }, box_,
                                grid_);
    }
    const double cs = c_star_, p = power_;
    return l2_distance_on_box([&](const Eigen::VectorXd& s) { return value(phi, s); },
                              [cs, p](const Eigen::VectorXd& s) { return cs * std::pow(s(0), p); },
                              box_, grid_);
  }

  ordered_json reference() const {
    ordered_json j;
    if (lqr_) {
      std::vector<std::vector<double>> k;
      for (Eigen::Index i = 0; i < opt_.policy.K.rows(); ++i) {
        k.emplace_back();
        for (Eigen::Index c = 0; c < opt_.policy.K.cols(); ++c) k.back().push_back(opt_.policy.K(i, c));
      }
      j["K_star"] = k;
    } else {
      j["allocation_star"] = a_star_;
      j["value_coef_star"] = c_star_;
    }
    j["value_star_l2_norm"] = v_norm_;
    j["evaluation_box"] = {box_.lo(0), box_.hi(0)};
    j["grid_points"] = grid_;
    return j;
  }

 private:
  bool lqr_;
  Box box_;
  int grid_;
  std::unique_ptr<LqrSystem> sys_;
  LqrSolution opt_;
  std::unique_ptr<MertonMarket> market_;
  double power_ = 0.5, a_star_ = 0.0, c_star_ = 0.0, pow_norm_ = 0.0;
  double v_norm_ = 0.0;
};

struct RunOutcome {
  std::string algorithm;
  int repetition = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  IterationTrace trace;
  double final_value_est = kNaN;
  double wall_ms = 0.0;

  double final_metric(const std::string& name) const {
    if (trace.records.empty()) return kNaN;
    for (const auto& m : trace.records.back().metrics) {
      if (m.name == name) return m.value;
    }
    return kNaN;
  }
};

RunOutcome run_one(const ExperimentConfig& c, const AlgorithmSpec& algo, int rep,
                   std::uint64_t seed, const Truth& truth) {
  RunOutcome out;
  out.algorithm = algo.label();
  out.repetition = rep;
  out.seed = seed;
  const auto t0 = Clock::now();
  try {
    const auto env = c.env.make();
    const BasisSet phi = c.make_value_basis();
    const BasisSet psi = c.make_q_basis();
    const LinearPolicy pi0 = default_initial_policy(c, algo, c.dt);
    const PiOptions opt = c.pi_options(algo, seed);
    const IterateOracle oracle = [&](const LinearPolicy& pi, const ValueEstimate& v) {
      return truth.score(pi, v, phi);
    };
    const PiResult res = algo.kind == AlgorithmSpec::Kind::kBe
                             ? optimal_be_pi(*env, c.dt, phi, psi, pi0, c.batch_plan(), opt, oracle)
                             : optimal_phibe_pi(*env, c.dt, phi, psi, pi0, c.batch_plan(), opt,
                                                oracle);
    out.trace = res.trace;
    out.ok = res.completed;
    out.failure = res.failure;
    if (res.completed && res.value.theta.size() == phi.size()) {
      out.final_value_est = truth.estimate_error(res.value, phi);
    }
  } catch (const Error& e) {
    out.ok = false;
    out.failure = e.what();
  }
  out.wall_ms = ms_since(t0);
  return out;
}

std::vector<std::string> metric_names(const std::vector<RunOutcome>& runs) {
  std::vector<std::string> names;
  for (const auto& r : runs) {
    if (r.trace.records.empty()) continue;
    for (const auto& m : r.trace.records.back().metrics) {
      if (std::find(names.begin(), names.end(), m.name) == names.end()) names.push_back(m.name);
    }
  }
  return names;
}

LqrSystem with_param(const LqrSystem& s, const std::string& param, double v) {
  if (param == "beta") return LqrSystem(s.A(), s.B(), s.Q(), s.R(), s.sigma(), v);
  if (param == "q_over_r") {
    return LqrSystem(s.A(), s.B(), s.R() * v, s.R(), s.sigma(), s.beta());
  }
  if (param == "A") return LqrSystem::scalar(v, s.B()(0, 0), s.Q()(0, 0), s.R()(0, 0), s.sigma(), s.beta());
  if (param == "B") return LqrSystem::scalar(s.A()(0, 0), v, s.Q()(0, 0), s.R()(0, 0), s.sigma(), s.beta());
  return s;  // dt
}

// Gain error of the algorithm's analytic fixed point.
double oracle_gain_error(const LqrSystem& sys, double dt, const AlgorithmSpec& algo,
                         DiscountChoice discount, const Eigen::MatrixXd& k_star) {
  const LinearPolicy pi = algo.kind == AlgorithmSpec::Kind::kBe
                              ? be_optimal(sys, dt, discount)
                              : phibe_optimal(sys, dt, algo.order);
  return (pi.K - k_star).norm();
}

DiscountChoice discount_of(const ExperimentConfig& c) {
  return c.options.discount == "optimal" ? DiscountChoice::kOptimal : DiscountChoice::kExp;
}

std::string shape_of(const std::vector<double>& y) {
  std::vector<int> signs;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double d = y[i] - y[i - 1];
    if (!std::isfinite(d)) return "undefined";
    signs.push_back(std::abs(d) <= 1e-10 ? 0 : (d > 0 ? 1 : -1));
  }
  if (signs.empty()) return "single";
  if (std::all_of(signs.begin(), signs.end(), [](int s) { return s == 0; })) return "constant";
  if (std::all_of(signs.begin(), signs.end(), [](int s) { return s > 0; })) return "increasing";
  if (std::all_of(signs.begin(), signs.end(), [](int s) { return s < 0; })) return "decreasing";
  const auto first_down = std::find(signs.begin(), signs.end(), -1);
  if (first_down != signs.begin() && std::all_of(signs.begin(), first_down, [](int s) { return s >= 0; }) &&
      std::all_of(first_down, signs.end(), [](int s) { return s <= 0; })) {
    return "rises_then_falls";
  }
  return "mixed";
}

}  // namespace

std::string ResultRecord::csv() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  return os.str();
}

SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "oracle") return SweepMode::kOracle;
  if (s == "sampled") return SweepMode::kSampled;
  fail_config("mode must be 'oracle' or 'sampled', got '" + s + "'");
}

LinearPolicy default_initial_policy(const ExperimentConfig& c, const AlgorithmSpec& algo,
                                    double dt) {
  if (!algo.initial.automatic) return LinearPolicy(algo.initial.K, algo.initial.offset);
  if (!c.initial_policy.automatic) return LinearPolicy(c.initial_policy.K, c.initial_policy.offset);
  if (!c.env.is_lqr()) return LinearPolicy::constant(1, 0.5);
  const LqrSystem sys = c.env.lqr();
  const int d = sys.state_dim(), m = sys.action_dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  if (algo.kind == AlgorithmSpec::Kind::kPhibe) {
    const Eigen::MatrixXd shifted = sys.A() - 0.5 * sys.beta() * eye;
    if (spectral_abscissa(shifted) < 0.0) return LinearPolicy(Eigen::MatrixXd::Zero(m, d));
    return LinearPolicy(-sys.B().completeOrthogonalDecomposition().pseudoInverse() * (shifted + eye));
  }
  const TransitionKernel ker = lqr_exact_transition(sys, dt);
  const double gamma = be_discount(sys.beta(), dt, discount_of(c));
  if (std::sqrt(gamma) * spectral_radius(ker.mean_state) < 1.0) {
    return LinearPolicy(Eigen::MatrixXd::Zero(m, d));
  }
  return LinearPolicy(-ker.mean_action.completeOrthogonalDecomposition().pseudoInverse() *
                      ker.mean_state);
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0 && y[i] > 0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return kNaN;
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : kNaN;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return kNaN;
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double m = 0.5 * static_cast<double>(n - 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - m) * (ry[i] - m);
    sxx += (rx[i] - m) * (rx[i] - m);
    syy += (ry[i] - m) * (ry[i] - m);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

ResultRecord run_case(const ExperimentConfig& c) {
  const auto t0 = Clock::now();
  ResultRecord rec;
  rec.kind = "run-case";
  rec.config_hash = config_hash(c);
  rec.seed = c.seed;
  rec.header = {"config_hash", "seed", "repetition", "algorithm", "iteration", "metric", "value"};

  const Truth truth(c);
  const std::size_t na = c.algorithms.size();
  const std::size_t units = static_cast<std::size_t>(c.repetitions) * na;
  std::vector<RunOutcome> runs(units);
  parallel_for(units, worker_count(c, units), [&](std::size_t u) {
    const int rep = static_cast<int>(u / na);
    runs[u] = run_one(c, c.algorithms[u % na], rep, derive_seed(c.seed, rep), truth);
  });

  for (const auto& r : runs) {
    for (const auto& it : r.trace.records) {
      for (const auto& m : it.metrics) {
        rec.rows.push_back({rec.config_hash, std::to_string(r.seed), std::to_string(r.repetition),
                            r.algorithm, std::to_string(it.iteration), m.name, num(m.value)});
      }
    }
    if (!std::isnan(r.final_value_est)) {
      rec.rows.push_back({rec.config_hash, std::to_string(r.seed), std::to_string(r.repetition),
                          r.algorithm, "final", "value_est_l2", num(r.final_value_est)});
    }
    if (!r.ok) {
      rec.rows.push_back({rec.config_hash, std::to_string(r.seed), std::to_string(r.repetition),
                          r.algorithm, "final", "failed", "1"});
    }
  }

  ordered_json algos;
  ordered_json walls = ordered_json::array();
  for (const auto& algo : c.algorithms) {
    std::vector<RunOutcome> mine;
    for (const auto& r : runs) {
      if (r.algorithm == algo.label()) mine.push_back(r);
    }
    ordered_json a;
    a["runs"] = mine.size();
    a["completed"] = std::count_if(mine.begin(), mine.end(), [](const RunOutcome& r) { return r.ok; });
    ordered_json failures = ordered_json::array();
    for (const auto& r : mine) {
      if (!r.ok) failures.push_back({{"repetition", r.repetition}, {"message", r.failure}});
    }
    a["failures"] = failures;
    ordered_json fin;
    for (const auto& name : metric_names(mine)) {
      std::vector<double> v;
      for (const auto& r : mine) v.push_back(r.final_metric(name));
      fin[name] = stats_json(stats_of(v));
    }
    std::vector<double> est;
    for (const auto& r : mine) est.push_back(r.final_value_est);
    fin["final_value_est_l2"] = stats_json(stats_of(est));
    a["final"] = fin;
    algos[algo.label()] = a;
  }
  for (const auto& r : runs) {
    walls.push_back({{"algorithm", r.algorithm}, {"repetition", r.repetition}, {"wall_ms", r.wall_ms}});
  }

  const PlanSpec& q = c.q_plan;
  const PlanSpec& p = c.policy_plan;
  rec.summary["kind"] = rec.kind;
  rec.summary["name"] = c.name;
  rec.summary["config_hash"] = rec.config_hash;
  rec.summary["seed"] = c.seed;
  rec.summary["repetitions"] = c.repetitions;
  rec.summary["iterations"] = c.iterations;
  rec.summary["data_points"] = {{"q_batch", q.num_traj * (q.steps + 1)},
                                {"policy_batch_per_iteration", p.num_traj * (p.steps + 1)}};
  rec.summary["reference"] = truth.reference();
  rec.summary["algorithms"] = algos;
  rec.summary["run_wall_ms"] = walls;
  rec.wall_ms = ms_since(t0);
  rec.summary["wall_ms"] = rec.wall_ms;
  return rec;
}

ResultRecord dt_sweep(const ExperimentConfig& c, const std::vector<double>& dts, SweepMode mode) {
  const auto t0 = Clock::now();
  if (dts.empty()) fail_config("dt_sweep: empty dt list");
  for (double dt : dts) {
    if (!(dt > 0.0)) fail_config("dt_sweep: dt values must be positive");
  }
  ResultRecord rec;
  rec.kind = "dt-sweep";
  rec.config_hash = config_hash(c);
  rec.seed = c.seed;
  rec.header = {"config_hash", "seed", "repetition", "algorithm", "dt", "metric", "value"};
  const std::size_t na = c.algorithms.size();
  // errors[algo][dt index]: one value per repetition
  std::vector<std::vector<std::vector<double>>> errors(
      na, std::vector<std::vector<double>>(dts.size()));
  ordered_json failures = ordered_json::array();
  const char* metric = c.env.is_lqr() ? "k_err" : "a_err";

  if (mode == SweepMode::kOracle) {
    if (!c.env.is_lqr()) fail_config("dt_sweep: oracle mode needs an LQR environment");
    const LqrSystem sys = c.env.lqr();
    const Eigen::MatrixXd k_star = lqr_optimal(sys).policy.K;
    std::vector<double> flat(na * dts.size(), kNaN);
    std::vector<std::string> why(na * dts.size());
    parallel_for(flat.size(), worker_count(c, flat.size()), [&](std::size_t u) {
      try {
        flat[u] = oracle_gain_error(sys, dts[u / na], c.algorithms[u % na], discount_of(c), k_star);
      } catch (const Error& e) {
        why[u] = e.what();
      }
    });
    for (std::size_t u = 0; u < flat.size(); ++u) {
      const std::size_t i = u / na, a = u % na;
      errors[a][i].push_back(flat[u]);
      rec.rows.push_back({rec.config_hash, std::to_string(c.seed), "0", c.algorithms[a].label(),
                          num(dts[i]), metric, num(flat[u])});
      if (!why[u].empty()) {
        failures.push_back({{"algorithm", c.algorithms[a].label()}, {"dt", dts[i]}, {"message", why[u]}});
      }
    }
  } else {
    const Truth truth(c);
    const std::size_t units = dts.size() * static_cast<std::size_t>(c.repetitions) * na;
    std::vector<RunOutcome> runs(units);
    parallel_for(units, worker_count(c, units), [&](std::size_t u) {
      const std::size_t i = u / (na * c.repetitions);
      const int rep = static_cast<int>((u / na) % c.repetitions);
      ExperimentConfig ci = c;
      ci.dt = dts[i];
      runs[u] = run_one(ci, c.algorithms[u % na], rep, derive_seed(c.seed, rep), truth);
    });
    for (std::size_t u = 0; u < units; ++u) {
      const std::size_t i = u / (na * c.repetitions), a = u % na;
      const RunOutcome& r = runs[u];
      const double e = r.ok ? r.final_metric(metric) : kNaN;
      errors[a][i].push_back(e);
      rec.rows.push_back({rec.config_hash, std::to_string(r.seed), std::to_string(r.repetition),
                          r.algorithm, num(dts[i]), metric, num(e)});
      if (!r.ok) {
        failures.push_back({{"algorithm", r.algorithm}, {"dt", dts[i]}, {"repetition", r.repetition},
                            {"message", r.failure}});
      }
    }
  }

  ordered_json table = ordered_json::array();
  ordered_json slopes;
  for (std::size_t a = 0; a < na; ++a) {
    std::vector<double> med;
    for (std::size_t i = 0; i < dts.size(); ++i) {
      const Stats s = stats_of(errors[a][i]);
      med.push_back(s.median);
      table.push_back({{"algorithm", c.algorithms[a].label()}, {"dt", dts[i]}, {"median", jnum(s.median)}});
    }
    slopes[c.algorithms[a].label()] = jnum(fit_loglog_slope(dts, med));
  }
  rec.summary["kind"] = rec.kind;
  rec.summary["name"] = c.name;
  rec.summary["config_hash"] = rec.config_hash;
  rec.summary["mode"] = mode == SweepMode::kOracle ? "oracle" : "sampled";
  if (mode == SweepMode::kSampled) rec.summary["seed"] = c.seed;
  rec.summary["metric"] = metric;
  rec.summary["table"] = table;
  rec.summary["slopes"] = slopes;
  if (dts.size() < 2) rec.summary["note"] = "fewer than two dt values; no slope fit";
  rec.summary["failures"] = failures;
  rec.wall_ms = ms_since(t0);
  rec.summary["wall_ms"] = rec.wall_ms;
  return rec;
}

ResultRecord batch_sweep(const ExperimentConfig& c, const std::vector<long long>& sizes) {
  const auto t0 = Clock::now();
  if (sizes.empty()) fail_config("batch_sweep: empty size list");
  ResultRecord rec;
  rec.kind = "batch-sweep";
  rec.config_hash = config_hash(c);
  rec.seed = c.seed;
  rec.header = {"config_hash", "seed", "repetition", "algorithm", "size", "metric", "value"};
  const Truth truth(c);
  const std::size_t na = c.algorithms.size();
  const std::size_t reps = static_cast<std::size_t>(c.repetitions);
  const int ppt = c.sweep.points_per_traj;
  const std::size_t units = sizes.size() * reps * na;
  std::vector<RunOutcome> runs(units);
  parallel_for(units, worker_count(c, units), [&](std::size_t u) {
    const std::size_t i = u / (na * reps);
    const int rep = static_cast<int>((u / na) % reps);
    const AlgorithmSpec& algo = c.algorithms[u % na];
    const std::uint64_t seed = derive_seed(derive_seed(c.seed, static_cast<std::uint64_t>(sizes[i])), rep);
    const long long traj = sizes[i] / ppt;
    if (traj < 1) {
      RunOutcome& r = runs[u];
      r.algorithm = algo.label();
      r.repetition = rep;
      r.seed = seed;
      r.failure = "batch of " + std::to_string(sizes[i]) + " points holds no trajectory of " +
                  std::to_string(ppt) + " points";
      return;
    }
    ExperimentConfig ci = c;
    for (PlanSpec* p : {&ci.q_plan, &ci.policy_plan}) {
      p->num_traj = static_cast<int>(traj);
      p->steps = ppt - 1;
    }
    runs[u] = run_one(ci, algo, rep, seed, truth);
  });

  ordered_json per_algo;
  for (std::size_t a = 0; a < na; ++a) {
    ordered_json rows_json = ordered_json::array();
    std::vector<double> xs, means;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      std::vector<double> v;
      ordered_json failures = ordered_json::array();
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const RunOutcome& r = runs[(i * reps + rep) * na + a];
        const double e = r.ok ? r.final_metric("value_l2") : kNaN;
        v.push_back(e);
        rec.rows.push_back({rec.config_hash, std::to_string(r.seed), std::to_string(rep),
                            r.algorithm, std::to_string(sizes[i]), "value_l2", num(e)});
        rec.rows.push_back({rec.config_hash, std::to_string(r.seed), std::to_string(rep),
                            r.algorithm, std::to_string(sizes[i]), "failed", r.ok ? "0" : "1"});
        if (!r.ok) failures.push_back({{"repetition", rep}, {"message", r.failure}});
      }
      const Stats s = stats_of(v);
      if (s.count > 0 && std::isfinite(s.mean)) {
        xs.push_back(static_cast<double>(sizes[i]));
        means.push_back(s.mean);
      }
      ordered_json row = stats_json(s);
      row["size"] = sizes[i];
      row["failed"] = failures.size();
      row["failures"] = failures;
      rows_json.push_back(row);
    }
    per_algo[c.algorithms[a].label()] = {{"sizes", rows_json},
                                         {"spearman_size_vs_mean", jnum(spearman(xs, means))}};
  }
  rec.summary["kind"] = rec.kind;
  rec.summary["name"] = c.name;
  rec.summary["config_hash"] = rec.config_hash;
  rec.summary["seed"] = c.seed;
  rec.summary["repetitions"] = c.repetitions;
  rec.summary["points_per_traj"] = ppt;
  rec.summary["reference"] = truth.reference();
  rec.summary["algorithms"] = per_algo;
  rec.wall_ms = ms_since(t0);
  rec.summary["wall_ms"] = rec.wall_ms;
  return rec;
}

ResultRecord error_atlas(const ExperimentConfig& c) {
  const auto t0 = Clock::now();
  if (!c.env.is_lqr()) fail_config("error_atlas: needs an LQR environment");
  if (c.atlas.empty()) fail_config("error_atlas: no panels configured");
  ResultRecord rec;
  rec.kind = "atlas";
  rec.config_hash = config_hash(c);
  rec.seed = c.seed;
  rec.header = {"config_hash", "seed", "panel", "param_value", "algorithm", "metric", "value"};
  const LqrSystem base = c.env.lqr();
  const std::size_t na = c.algorithms.size();

  struct Point {
    std::size_t panel, index;
  };
  std::vector<Point> points;
  for (std::size_t p = 0; p < c.atlas.size(); ++p) {
    for (std::size_t i = 0; i < c.atlas[p].values.size(); ++i) points.push_back({p, i});
  }
  std::vector<double> err(points.size() * na, kNaN);
  std::vector<std::string> why(points.size());
  parallel_for(points.size(), worker_count(c, points.size()), [&](std::size_t u) {
    const AtlasPanel& panel = c.atlas[points[u].panel];
    const double v = panel.values[points[u].index];
    try {
      const LqrSystem sys = with_param(base, panel.param, v);
      const double dt = panel.param == "dt" ? v : c.dt;
      const Eigen::MatrixXd k_star = lqr_optimal(sys).policy.K;
      for (std::size_t a = 0; a < na; ++a) {
        try {
          err[u * na + a] = oracle_gain_error(sys, dt, c.algorithms[a], discount_of(c), k_star);
        } catch (const Error& e) {
          why[u] += c.algorithms[a].label() + ": " + e.what() + "; ";
        }
      }
    } catch (const Error& e) {
      why[u] = e.what();
    }
  });

  ordered_json panels = ordered_json::array();
  for (std::size_t p = 0; p < c.atlas.size(); ++p) {
    ordered_json pj;
    pj["param"] = c.atlas[p].param;
    pj["values"] = c.atlas[p].values;
    ordered_json per;
    ordered_json failures = ordered_json::array();
    for (std::size_t a = 0; a < na; ++a) {
      std::vector<double> curve;
      for (std::size_t u = 0; u < points.size(); ++u) {
        if (points[u].panel != p) continue;
        const double v = c.atlas[p].values[points[u].index];
        curve.push_back(err[u * na + a]);
        rec.rows.push_back({rec.config_hash, std::to_string(c.seed), c.atlas[p].param, num(v),
                            c.algorithms[a].label(), "k_err", num(err[u * na + a])});
        if (a == 0 && !why[u].empty()) failures.push_back({{"value", v}, {"message", why[u]}});
      }
      const Stats s = stats_of(curve);
      per[c.algorithms[a].label()] = {{"min", jnum(s.min)},
                                      {"max", jnum(s.max)},
                                      {"range", jnum(s.max - s.min)},
                                      {"shape", shape_of(curve)}};
    }
    pj["algorithms"] = per;
    pj["failures"] = failures;
    panels.push_back(pj);
  }
  rec.summary["kind"] = rec.kind;
  rec.summary["name"] = c.name;
  rec.summary["config_hash"] = rec.config_hash;
  rec.summary["panels"] = panels;
  rec.wall_ms = ms_since(t0);
  rec.summary["wall_ms"] = rec.wall_ms;
  return rec;
}

void write_outputs(const ExperimentConfig& c, const ResultRecord& record, const std::string& dir) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_argument("cannot create output directory '" + dir + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_argument("cannot write '" + path.string() + "'");
    out << text;
  };
  write("results.csv", record.csv());
  write("config.echo.json", config_to_json(c).dump(2) + "\n");
  write("summary.json", record.summary.dump(2) + "\n");
}

}  // namespace phibe
