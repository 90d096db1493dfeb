#pragma once

#include <iosfwd>
#include <string>

#include "phibe/environments.hpp"

namespace phibe {

/// Columnar CSV: traj_id, step, s_1..s_d, a_1..a_m, reward. The terminal
/// state of each trajectory is written with empty action and reward cells.
void write_batch_csv(const TrajectoryBatch& batch, std::ostream& out);

/// Header JSON: dt, seed, hold_steps, state_dim, action_dim, trajectory count
/// and per-trajectory step counts.
std::string batch_header_json(const TrajectoryBatch& batch);

/// Reads a batch back from the pair written above.
TrajectoryBatch read_batch(const std::string& header_json, std::istream& csv);

}  // namespace phibe
