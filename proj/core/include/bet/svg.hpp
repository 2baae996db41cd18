#pragma once

#include <span>
#include <string>

#include "bet/metrics.hpp"

namespace bet {

// Static SVG: demo trajectories in gray underneath, one polyline per rollout
// colored by its mode label, start/goal/block markers on top.
void write_rollout_svg(const std::string& path, const TrajectoryDataset& demos,
                       std::span<const RolloutRecord> rollouts, const EnvSpec& spec);

}  // namespace bet
