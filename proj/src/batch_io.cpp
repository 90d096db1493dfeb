#include "phibe/batch_io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "phibe/error.hpp"

namespace phibe {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_batch_csv(const TrajectoryBatch& batch, std::ostream& out) {
  out << "traj_id,step";
  for (int i = 1; i <= batch.state_dim; ++i) out << ",s_" << i;
  for (int i = 1; i <= batch.action_dim; ++i) out << ",a_" << i;
  out << ",reward\n";
  for (std::size_t l = 0; l < batch.trajectories.size(); ++l) {
    const Trajectory& tr = batch.trajectories[l];
    for (Eigen::Index j = 0; j < tr.states.rows(); ++j) {
      out << l << ',' << j;
      for (int i = 0; i < batch.state_dim; ++i) out << ',' << fmt(tr.states(j, i));
      const bool terminal = j == tr.actions.rows();
      for (int i = 0; i < batch.action_dim; ++i) {
        out << ',';
        if (!terminal) out << fmt(tr.actions(j, i));
      }
      out << ',';
      if (!terminal) out << fmt(tr.rewards(j));
      out << '\n';
    }
  }
}

std::string batch_header_json(const TrajectoryBatch& batch) {
  nlohmann::ordered_json h;
  h["dt"] = batch.dt;
  h["seed"] = batch.seed;
  h["hold_steps"] = batch.hold_steps;
  h["state_dim"] = batch.state_dim;
  h["action_dim"] = batch.action_dim;
  h["num_traj"] = batch.trajectories.size();
  std::vector<int> steps;
  steps.reserve(batch.trajectories.size());
  for (const auto& tr : batch.trajectories) steps.push_back(tr.steps());
  h["steps"] = steps;
  h["warnings"] = batch.warnings;
  return h.dump(2);
}

TrajectoryBatch read_batch(const std::string& header_json, std::istream& csv) {
  TrajectoryBatch batch;
  std::vector<int> steps;
  try {
    const auto h = nlohmann::json::parse(header_json);
    batch.dt = h.at("dt").get<double>();
    batch.seed = h.at("seed").get<std::uint64_t>();
    batch.hold_steps = h.at("hold_steps").get<int>();
    batch.state_dim = h.at("state_dim").get<int>();
    batch.action_dim = h.at("action_dim").get<int>();
    steps = h.at("steps").get<std::vector<int>>();
    batch.warnings = h.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    fail_argument(std::string("read_batch: bad header: ") + e.what());
  }
  const int d = batch.state_dim;
  const int m = batch.action_dim;
  batch.trajectories.resize(steps.size());
  for (std::size_t l = 0; l < steps.size(); ++l) {
    auto& tr = batch.trajectories[l];
    tr.states.resize(steps[l] + 1, d);
    tr.actions.resize(steps[l], m);
    tr.rewards.resize(steps[l]);
  }
  std::string line;
  if (!std::getline(csv, line)) fail_argument("read_batch: missing CSV header");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != static_cast<std::size_t>(3 + d + m)) {
      fail_argument("read_batch: malformed row: " + line);
    }
    const std::size_t l = std::stoul(cells[0]);
    const int j = std::stoi(cells[1]);
    if (l >= steps.size() || j < 0 || j > steps[l]) {
      fail_argument("read_batch: row out of range: " + line);
    }
    auto& tr = batch.trajectories[l];
    for (int i = 0; i < d; ++i) tr.states(j, i) = std::stod(cells[2 + i]);
    if (j < steps[l]) {
      for (int i = 0; i < m; ++i) tr.actions(j, i) = std::stod(cells[2 + d + i]);
      tr.rewards(j) = std::stod(cells[2 + d + m]);
    }
    ++rows;
  }
  std::size_t expected = 0;
  for (int s : steps) expected += static_cast<std::size_t>(s) + 1;
  if (rows != expected) fail_argument("read_batch: row count does not match header");
  return batch;
}

}  // namespace phibe
