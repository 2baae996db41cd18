#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bet/data.hpp"

namespace bet {

enum class EnvId { Multipath1, Multipath2 };

enum class ModeLabel { Up, Down, Diagonal, UpFirst, RightFirst, Undetermined };

const char* mode_label_name(ModeLabel m);
std::vector<ModeLabel> mode_labels_for(EnvId id);  // Undetermined included

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct PointMassState {
    Vec2 pos;
    int t = 0;
};

struct EnvSpec {
    EnvId id = EnvId::Multipath1;
    Vec2 start;
    Vec2 goal;
    int max_steps = 20;
    double goal_radius = 0.5;

    static EnvSpec multipath1();  // start (1,2), goal (5,2)
    static EnvSpec multipath2();  // start (0,0), goal (8,8)
};

// Applies the displacement and snaps the position to the nearest integer
// lattice point (ties round half away from zero).
PointMassState env_step(const PointMassState& state, Vec2 action);

// Demonstration generators. n must be even (env 1) / divisible by 3
// (env 2); the dataset holds n/modes exact copies of each mode's waypoint
// path, order shuffled by seed. jitter_stddev adds Gaussian noise to each
// action, with observations re-derived by replaying through env_step.
TrajectoryDataset gen_demos_env1(int n, std::uint64_t seed, double jitter_stddev = 0.0);
TrajectoryDataset gen_demos_env2(int n, std::uint64_t seed, double jitter_stddev = 0.0);
TrajectoryDataset gen_demos(EnvId id, int n, std::uint64_t seed, double jitter_stddev = 0.0);

// Multipath1: Up if any visited y >= 3, Down if any y <= 1 (Up wins if both).
// Multipath2: by the first action's direction.
ModeLabel classify_mode(EnvId id, std::span<const Vec2> states, std::span<const Vec2> actions);

// True iff some visited position comes within goal_radius of the goal inside
// max_steps, and (Multipath1 only) the blocked point (3,2) is never occupied.
bool is_success(const EnvSpec& spec, std::span<const Vec2> states);

// trajectory -> visited positions, including the endpoint implied by the
// final action
std::vector<Vec2> trajectory_states(const Trajectory& t, const TrajectoryDataset& ds);
std::vector<Vec2> trajectory_actions(const Trajectory& t, const TrajectoryDataset& ds);

}  // namespace bet
