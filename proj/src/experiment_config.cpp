#include "phibe/experiment_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "phibe/error.hpp"
#include "phibe/oracles.hpp"

namespace phibe {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Tracks which keys of an object were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail_config(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) fail_config(where_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key, double fallback, bool required = false) {
    if (!has(key)) {
      if (required) fail_config(where_ + ": missing key '" + key + "'");
      seen_.insert(key);
      return fallback;
    }
    const json& v = raw(key);
    if (!v.is_number()) fail_config(where_ + "." + key + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail_config(where_ + "." + key + ": not finite");
    return x;
  }

  long long integer(const std::string& key, long long fallback, bool required = false) {
    if (!has(key)) {
      if (required) fail_config(where_ + ": missing key '" + key + "'");
      seen_.insert(key);
      return fallback;
    }
    const json& v = raw(key);
    if (!v.is_number_integer()) fail_config(where_ + "." + key + ": expected an integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    const json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) {
      return static_cast<std::uint64_t>(v.get<long long>());
    }
    fail_config(where_ + "." + key + ": expected a non-negative integer");
  }

  std::string text(const std::string& key, const std::string& fallback,
                   bool required = false) {
    if (!has(key)) {
      if (required) fail_config(where_ + ": missing key '" + key + "'");
      seen_.insert(key);
      return fallback;
    }
    const json& v = raw(key);
    if (!v.is_string()) fail_config(where_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    const std::string v = text(key, fallback);
    for (const char* a : allowed) {
      if (v == a) return v;
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    fail_config(where_ + "." + key + ": '" + v + "' is not one of " + list);
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    const json& v = raw(key);
    if (!v.is_boolean()) fail_config(where_ + "." + key + ": expected true or false");
    return v.get<bool>();
  }

  std::string where(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        fail_config(where_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Eigen::MatrixXd read_matrix(const json& v, const std::string& where) {
  if (v.is_number()) return Eigen::MatrixXd::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) fail_config(where + ": expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (!v[0].is_array() || v[0].empty()) fail_config(where + ": expected a matrix (array of rows)");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail_config(where + ": ragged matrix");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      const json& x = row[static_cast<std::size_t>(k)];
      if (!x.is_number()) fail_config(where + ": non-numeric entry");
      m(i, k) = x.get<double>();
    }
  }
  if (!m.allFinite()) fail_config(where + ": non-finite entry");
  return m;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> read_numbers(const json& v, const std::string& where) {
  if (!v.is_array()) fail_config(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail_config(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void read_interval(Reader& r, const std::string& key, double& lo, double& hi) {
  if (!r.has(key)) {
    r.text(key, "");  // mark as seen; defaults stay
    return;
  }
  const auto v = read_numbers(r.raw(key), r.where(key));
  if (v.size() != 2 || !(v[0] <= v[1]) || !std::isfinite(v[0]) || !std::isfinite(v[1])) {
    fail_config(r.where(key) + ": expected [lo, hi] with lo <= hi");
  }
  lo = v[0];
  hi = v[1];
}

EnvironmentSpec read_environment(const json& j) {
  Reader r(j, "environment");
  EnvironmentSpec e;
  const std::string type = r.choice("type", "", {"lqr", "merton"});
  if (type == "lqr") {
    e.kind = EnvironmentSpec::Kind::kLqr;
    e.A = read_matrix(r.raw("A"), "environment.A");
    e.B = read_matrix(r.raw("B"), "environment.B");
    e.Q = read_matrix(r.raw("Q"), "environment.Q");
    e.R = read_matrix(r.raw("R"), "environment.R");
    e.sigma = r.number("sigma", 0.0);
    e.beta = r.number("beta", 0.0);
  } else {
    e.kind = EnvironmentSpec::Kind::kMerton;
    e.r = r.number("r", 0.0, true);
    e.r_b = r.number("r_b", 0.0, true);
    e.mu = r.number("mu", 0.0, true);
    e.sigma = r.number("sigma", 0.0, true);
    e.gamma = r.number("gamma", 0.5);
    e.beta = r.number("beta", 0.0, true);
  }
  r.finish();
  // Admissibility checks live in the environment constructors.
  try {
    if (e.is_lqr()) {
      (void)e.lqr();
    } else {
      (void)e.merton();
    }
  } catch (const Error& err) {
    fail_config(std::string("environment: ") + err.what());
  }
  return e;
}

PlanSpec read_plan(const json& j, const std::string& where) {
  Reader r(j, where);
  PlanSpec p;
  p.num_traj = static_cast<int>(r.integer("num_traj", 0, true));
  p.steps = static_cast<int>(r.integer("steps", 0, true));
  read_interval(r, "init_box", p.init_lo, p.init_hi);
  read_interval(r, "action_box", p.action_lo, p.action_hi);
  r.finish();
  if (p.num_traj < 1 || p.steps < 1) fail_config(where + ": num_traj and steps must be >= 1");
  return p;
}

ordered_json plan_json(const PlanSpec& p) {
  ordered_json j;
  j["num_traj"] = p.num_traj;
  j["steps"] = p.steps;
  j["init_box"] = {p.init_lo, p.init_hi};
  j["action_box"] = {p.action_lo, p.action_hi};
  return j;
}

InitialPolicySpec read_initial(const json& ip, const std::string& where,
                               const EnvironmentSpec& env) {
  InitialPolicySpec out;
  if (ip.is_string()) {
    if (ip.get<std::string>() != "auto") fail_config(where + ": expected \"auto\" or an object");
    return out;
  }
  Reader pr(ip, where);
  out.automatic = false;
  if (pr.has("K")) {
    out.K = read_matrix(pr.raw("K"), where + ".K");
  } else {
    pr.text("K", "");
    out.K = Eigen::MatrixXd::Zero(env.action_dim(), env.state_dim());
  }
  if (pr.has("offset")) {
    const auto v = read_numbers(pr.raw("offset"), where + ".offset");
    out.offset = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    pr.text("offset", "");
    out.offset = Eigen::VectorXd::Zero(out.K.rows());
  }
  pr.finish();
  if (out.K.rows() != env.action_dim() || out.K.cols() != env.state_dim() ||
      out.offset.size() != env.action_dim()) {
    fail_config(where + ": K must be m x d and offset of length m");
  }
  return out;
}

ordered_json initial_json(const InitialPolicySpec& ip) {
  if (ip.automatic) return "auto";
  return {{"K", matrix_json(ip.K)},
          {"offset", std::vector<double>(ip.offset.data(), ip.offset.data() + ip.offset.size())}};
}

void validate(const ExperimentConfig& c) {
  const bool lqr = c.env.is_lqr();
  if (c.name.empty()) fail_config("name: must not be empty");
  if (!(c.dt > 0.0)) fail_config("dt: must be positive");
  if (c.algorithms.empty()) fail_config("algorithms: at least one algorithm is required");
  int max_order = 1;
  for (const auto& a : c.algorithms) {
    if (a.kind == AlgorithmSpec::Kind::kPhibe && (a.order < 1 || a.order > 8)) {
      fail_config("algorithms: order must be in 1..8");
    }
    max_order = std::max(max_order, a.order);
  }
  if (c.q_plan.steps < max_order || c.policy_plan.steps < max_order) {
    fail_config("batch: trajectories shorter than the highest order");
  }
  auto check_basis = [&](const std::string& name, const char* key) {
    const bool merton = name == "merton";
    if (merton == lqr) {
      fail_config(std::string("bases.") + key + ": '" + name +
                  "' does not fit the environment");
    }
  };
  check_basis(c.value_basis, "value");
  check_basis(c.q_basis, "q");
  if (c.iterations < 1) fail_config("iterations: must be >= 1");
  if (c.repetitions < 1) fail_config("repetitions: must be >= 1");
  if (!(c.evaluation.lo < c.evaluation.hi)) fail_config("evaluation.box: empty");
  if (!lqr && !(c.evaluation.lo > 0.0)) fail_config("evaluation.box: wealth must be positive");
  if (!lqr && !(c.q_plan.init_lo > 0.0 && c.policy_plan.init_lo > 0.0)) {
    fail_config("batch: initial wealth must be positive");
  }
  if (c.evaluation.grid_points < 0 || c.evaluation.grid_points == 1) {
    fail_config("evaluation.grid_points: must be 0 (default) or >= 2");
  }
  if (c.options.gd_max_iters < 1 || !(c.options.gd_tol >= 0.0)) {
    fail_config("options: invalid gradient-descent stopping rule");
  }
  if (!(c.options.a_max > 0.0)) fail_config("options.a_max: must be positive");
  if (c.options.threads < 0) fail_config("options.threads: must be >= 0");
  for (double dt : c.sweep.dts) {
    if (!(dt > 0.0)) fail_config("sweep.dts: entries must be positive");
  }
  for (long long d : c.sweep.sizes) {
    if (d < 1) fail_config("sweep.sizes: entries must be positive");
  }
  if (c.sweep.points_per_traj < 2) fail_config("sweep.points_per_traj: must be >= 2");
  const bool scalar = lqr && c.env.state_dim() == 1 && c.env.action_dim() == 1;
  for (const auto& p : c.atlas) {
    if (!lqr) fail_config("atlas: needs an LQR environment");
    if ((p.param == "A" || p.param == "B" || p.param == "q_over_r") && !scalar) {
      fail_config("atlas: parameter '" + p.param + "' needs a scalar system");
    }
    if (p.values.empty()) fail_config("atlas: panel '" + p.param + "' has no values");
  }
}

}  // namespace

LqrSystem EnvironmentSpec::lqr() const {
  if (!is_lqr()) fail_config("environment: not an LQR system");
  return LqrSystem(A, B, Q, R, sigma, beta);
}

MertonMarket EnvironmentSpec::merton() const {
  if (is_lqr()) fail_config("environment: not a Merton market");
  return MertonMarket(r, r_b, mu, sigma, gamma, beta);
}

std::unique_ptr<Environment> EnvironmentSpec::make() const {
  if (is_lqr()) return std::make_unique<LqrEnvironment>(lqr());
  return std::make_unique<MertonEnvironment>(merton());
}

std::string AlgorithmSpec::label() const {
  return kind == Kind::kBe ? "be" : "phibe" + std::to_string(order);
}

SamplingPlan PlanSpec::plan(int state_dim, int action_dim) const {
  return SamplingPlan{num_traj, steps,
                      Box{Eigen::VectorXd::Constant(state_dim, init_lo),
                          Eigen::VectorXd::Constant(state_dim, init_hi)},
                      Box{Eigen::VectorXd::Constant(action_dim, action_lo),
                          Eigen::VectorXd::Constant(action_dim, action_hi)}};
}

BasisSet ExperimentConfig::make_value_basis() const {
  if (value_basis == "merton") return merton_value_basis(1.0 - env.gamma);
  return quadratic_state_basis(env.state_dim(), value_basis == "quadratic+1");
}

BasisSet ExperimentConfig::make_q_basis() const {
  if (q_basis == "merton") return merton_q_basis(1.0 - env.gamma);
  return quadratic_state_action_basis(env.state_dim(), env.action_dim(), q_basis == "quadratic+1");
}

BatchPlan ExperimentConfig::batch_plan() const {
  const int d = env.state_dim(), m = env.action_dim();
  return BatchPlan{q_plan.plan(d, m), policy_plan.plan(d, m)};
}

PiOptions ExperimentConfig::pi_options(const AlgorithmSpec& algo, std::uint64_t run_seed) const {
  PiOptions o;
  o.order = algo.kind == AlgorithmSpec::Kind::kPhibe ? algo.order : 1;
  o.iterations = iterations;
  o.q_solver = options.q_solver == "gd" ? QSolver::kGradientDescent : QSolver::kGalerkin;
  o.gd_alpha = options.gd_alpha;
  o.gd_stopping = GdStopping{options.gd_max_iters, options.gd_tol};
  o.diffusion = options.diffusion == "empirical" ? DiffusionMode::kEmpirical : DiffusionMode::kZero;
  o.q_windows = options.q_windows == "all" ? WindowMode::kAll : WindowMode::kHeldOnly;
  o.drift = options.drift == "printed" ? DriftScaling::kPrinted : DriftScaling::kNormalized;
  o.rollout = options.policy_rollout == "every_step" ? PolicyRollout::kEveryStep
                                                     : PolicyRollout::kHeldWindow;
  o.moments = options.moments == "exact" ? MomentSource::kExact : MomentSource::kSampled;
  o.discount = options.discount == "optimal" ? DiscountChoice::kOptimal : DiscountChoice::kExp;
  o.be_next = options.be_next == "current_action" ? BeNextAction::kCurrentAction
                                                   : BeNextAction::kOnPolicy;
  o.constraint.a_max = options.a_max;
  o.constraint.branch_refit = options.branch_refit;
  o.early_stop_tol = options.early_stop_tol;
  o.seed = run_seed;
  return o;
}

Box ExperimentConfig::evaluation_box() const {
  return Box::uniform(env.state_dim(), evaluation.lo, evaluation.hi);
}

int ExperimentConfig::grid_points() const {
  return evaluation.grid_points > 0 ? evaluation.grid_points
                                    : default_grid_points(env.state_dim());
}

ExperimentConfig parse_config(const json& j) {
  Reader r(j, "config");
  ExperimentConfig c;
  c.schema_version = static_cast<int>(r.integer("schema_version", 0, true));
  if (c.schema_version != kConfigSchemaVersion) {
    fail_config("schema_version: unsupported version " + std::to_string(c.schema_version));
  }
  c.name = r.text("name", "", true);
  c.notes = r.text("notes", "");
  c.env = read_environment(r.raw("environment"));
  c.dt = r.number("dt", 0.0, true);

  const json& algos = r.raw("algorithms");
  if (!algos.is_array()) fail_config("algorithms: expected an array");
  for (const auto& a : algos) {
    Reader ar(a, "algorithms[]");
    AlgorithmSpec spec;
    const std::string kind = ar.choice("kind", "", {"phibe", "be"});
    spec.kind = kind == "be" ? AlgorithmSpec::Kind::kBe : AlgorithmSpec::Kind::kPhibe;
    spec.order = static_cast<int>(ar.integer("order", 1));
    if (spec.kind == AlgorithmSpec::Kind::kBe) spec.order = 1;
    if (ar.has("initial_policy")) {
      spec.initial = read_initial(ar.raw("initial_policy"), "algorithms[].initial_policy", c.env);
    } else {
      ar.text("initial_policy", "");
    }
    ar.finish();
    c.algorithms.push_back(spec);
  }

  {
    Reader br(r.raw("batch"), "batch");
    c.q_plan = read_plan(br.raw("q"), "batch.q");
    c.policy_plan = br.has("policy") ? read_plan(br.raw("policy"), "batch.policy") : c.q_plan;
    if (!br.has("policy")) br.text("policy", "");
    br.finish();
  }
  const bool lqr = c.env.is_lqr();
  if (r.has("bases")) {
    Reader br(r.raw("bases"), "bases");
    const char* def = lqr ? "quadratic" : "merton";
    c.value_basis = br.choice("value", def, {"quadratic", "quadratic+1", "merton"});
    c.q_basis = br.choice("q", def, {"quadratic", "quadratic+1", "merton"});
    br.finish();
  } else {
    r.text("bases", "");
    c.value_basis = c.q_basis = lqr ? "quadratic" : "merton";
  }
  c.iterations = static_cast<int>(r.integer("iterations", lqr ? 15 : 10));
  c.repetitions = static_cast<int>(r.integer("repetitions", 1));
  c.seed = r.unsigned_integer("seed", 0);
  c.output = r.text("output", "out/" + c.name);

  if (r.has("options")) {
    Reader o(r.raw("options"), "options");
    auto& s = c.options;
    s.q_solver = o.choice("q_solver", s.q_solver, {"galerkin", "gd"});
    s.gd_alpha = o.number("gd_alpha", s.gd_alpha);
    s.gd_max_iters = static_cast<int>(o.integer("gd_max_iters", s.gd_max_iters));
    s.gd_tol = o.number("gd_tol", s.gd_tol);
    s.diffusion = o.choice("diffusion", lqr ? "zero" : "empirical", {"zero", "empirical"});
    s.moments = o.choice("moments", s.moments, {"sampled", "exact"});
    s.discount = o.choice("discount", s.discount, {"exp", "optimal"});
    s.be_next = o.choice("be_next", s.be_next, {"on_policy", "current_action"});
    s.drift = o.choice("drift", s.drift, {"normalized", "printed"});
    s.q_windows = o.choice("q_windows", s.q_windows, {"held", "all"});
    s.policy_rollout = o.choice("policy_rollout", s.policy_rollout, {"held", "every_step"});
    s.early_stop_tol = o.number("early_stop_tol", s.early_stop_tol);
    s.a_max = o.number("a_max", s.a_max);
    s.branch_refit = o.flag("branch_refit", s.branch_refit);
    s.threads = static_cast<int>(o.integer("threads", s.threads));
    o.finish();
  } else {
    r.text("options", "");
    c.options.diffusion = lqr ? "zero" : "empirical";
  }

  if (r.has("initial_policy")) {
    c.initial_policy = read_initial(r.raw("initial_policy"), "initial_policy", c.env);
  } else {
    r.text("initial_policy", "");
  }

  if (r.has("evaluation")) {
    Reader er(r.raw("evaluation"), "evaluation");
    if (!lqr) c.evaluation.lo = 0.1, c.evaluation.hi = 6.0;
    read_interval(er, "box", c.evaluation.lo, c.evaluation.hi);
    c.evaluation.grid_points = static_cast<int>(er.integer("grid_points", 0));
    er.finish();
  } else {
    r.text("evaluation", "");
    if (!lqr) c.evaluation.lo = 0.1, c.evaluation.hi = 6.0;
  }

  if (r.has("sweep")) {
    Reader sr(r.raw("sweep"), "sweep");
    if (sr.has("dts")) {
      c.sweep.dts = read_numbers(sr.raw("dts"), "sweep.dts");
    } else {
      sr.text("dts", "");
    }
    c.sweep.mode = sr.choice("mode", "oracle", {"oracle", "sampled"});
    if (sr.has("sizes")) {
      for (double d : read_numbers(sr.raw("sizes"), "sweep.sizes")) {
        if (d != std::floor(d)) fail_config("sweep.sizes: entries must be integers");
        c.sweep.sizes.push_back(static_cast<long long>(d));
      }
    } else {
      sr.text("sizes", "");
    }
    c.sweep.points_per_traj = static_cast<int>(sr.integer("points_per_traj", 4));
    sr.finish();
  } else {
    r.text("sweep", "");
  }

  if (r.has("atlas")) {
    const json& a = r.raw("atlas");
    if (!a.is_array()) fail_config("atlas: expected an array of panels");
    for (const auto& p : a) {
      Reader pr(p, "atlas[]");
      AtlasPanel panel;
      panel.param = pr.choice("param", "", {"beta", "dt", "q_over_r", "A", "B"});
      panel.values = read_numbers(pr.raw("values"), "atlas[].values");
      pr.finish();
      c.atlas.push_back(panel);
    }
  } else {
    r.text("atlas", "");
  }
  r.finish();
  validate(c);
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail_config(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_config("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["notes"] = c.notes;
  ordered_json env;
  if (c.env.is_lqr()) {
    env["type"] = "lqr";
    env["A"] = matrix_json(c.env.A);
    env["B"] = matrix_json(c.env.B);
    env["Q"] = matrix_json(c.env.Q);
    env["R"] = matrix_json(c.env.R);
    env["sigma"] = c.env.sigma;
    env["beta"] = c.env.beta;
  } else {
    env["type"] = "merton";
    env["r"] = c.env.r;
    env["r_b"] = c.env.r_b;
    env["mu"] = c.env.mu;
    env["sigma"] = c.env.sigma;
    env["gamma"] = c.env.gamma;
    env["beta"] = c.env.beta;
  }
  j["environment"] = env;
  j["dt"] = c.dt;
  ordered_json algos = ordered_json::array();
  for (const auto& a : c.algorithms) {
    ordered_json x;
    x["kind"] = a.kind == AlgorithmSpec::Kind::kBe ? "be" : "phibe";
    if (a.kind == AlgorithmSpec::Kind::kPhibe) x["order"] = a.order;
    if (!a.initial.automatic) x["initial_policy"] = initial_json(a.initial);
    algos.push_back(x);
  }
  j["algorithms"] = algos;
  j["batch"] = {{"q", plan_json(c.q_plan)}, {"policy", plan_json(c.policy_plan)}};
  j["bases"] = {{"value", c.value_basis}, {"q", c.q_basis}};
  j["iterations"] = c.iterations;
  j["repetitions"] = c.repetitions;
  j["seed"] = c.seed;
  j["output"] = c.output;
  const auto& s = c.options;
  ordered_json o;
  o["q_solver"] = s.q_solver;
  o["gd_alpha"] = s.gd_alpha;
  o["gd_max_iters"] = s.gd_max_iters;
  o["gd_tol"] = s.gd_tol;
  o["diffusion"] = s.diffusion;
  o["moments"] = s.moments;
  o["discount"] = s.discount;
  o["be_next"] = s.be_next;
  o["drift"] = s.drift;
  o["q_windows"] = s.q_windows;
  o["policy_rollout"] = s.policy_rollout;
  o["early_stop_tol"] = s.early_stop_tol;
  o["a_max"] = s.a_max;
  o["branch_refit"] = s.branch_refit;
  o["threads"] = s.threads;
  j["options"] = o;
  j["initial_policy"] = initial_json(c.initial_policy);
  j["evaluation"] = {{"box", {c.evaluation.lo, c.evaluation.hi}},
                     {"grid_points", c.evaluation.grid_points}};
  ordered_json sw;
  sw["dts"] = c.sweep.dts;
  sw["mode"] = c.sweep.mode;
  sw["sizes"] = c.sweep.sizes;
  sw["points_per_traj"] = c.sweep.points_per_traj;
  j["sweep"] = sw;
  ordered_json atlas = ordered_json::array();
  for (const auto& p : c.atlas) atlas.push_back({{"param", p.param}, {"values", p.values}});
  j["atlas"] = atlas;
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  ordered_json j = config_to_json(c);
  j.erase("output");
  j["options"].erase("threads");  // scheduling only; results do not depend on it
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace phibe
