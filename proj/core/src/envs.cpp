#include "bet/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bet/errors.hpp"
#include "bet/rng.hpp"

namespace bet {

const char* mode_label_name(ModeLabel m) {
    switch (m) {
        case ModeLabel::Up: return "Up";
        case ModeLabel::Down: return "Down";
        case ModeLabel::Diagonal: return "Diagonal";
        case ModeLabel::UpFirst: return "UpFirst";
        case ModeLabel::RightFirst: return "RightFirst";
        case ModeLabel::Undetermined: return "Undetermined";
    }
    return "?";
}

std::vector<ModeLabel> mode_labels_for(EnvId id) {
    if (id == EnvId::Multipath1) {
        return {ModeLabel::Up, ModeLabel::Down, ModeLabel::Undetermined};
    }
    return {ModeLabel::Diagonal, ModeLabel::UpFirst, ModeLabel::RightFirst, ModeLabel::Undetermined};
}

EnvSpec EnvSpec::multipath1() { return EnvSpec{EnvId::Multipath1, {1, 2}, {5, 2}, 20, 0.5}; }
EnvSpec EnvSpec::multipath2() { return EnvSpec{EnvId::Multipath2, {0, 0}, {8, 8}, 20, 0.5}; }

PointMassState env_step(const PointMassState& state, Vec2 action) {
    if (!std::isfinite(action.x) || !std::isfinite(action.y)) {
        throw InputError("env_step: non-finite action");
    }
    // std::round ties half away from zero, matching the snap rule
    return PointMassState{{std::round(state.pos.x + action.x), std::round(state.pos.y + action.y)},
                          state.t + 1};
}

namespace {

// waypoint lists for the two Multipath-1 modes
const std::vector<Vec2> kEnv1Up = {{1, 2}, {2, 2}, {2, 3}, {2, 4}, {3, 4},
                                   {4, 4}, {4, 3}, {4, 2}, {5, 2}};
const std::vector<Vec2> kEnv1Down = {{1, 2}, {2, 2}, {2, 1}, {2, 0}, {3, 0},
                                     {4, 0}, {4, 1}, {4, 2}, {5, 2}};

// Unit-step path through the given corner waypoints; every grid point along
// the way is emitted, corners once.
std::vector<Vec2> unit_path(const std::vector<Vec2>& corners) {
    std::vector<Vec2> out;
    out.push_back(corners.front());
    for (std::size_t i = 1; i < corners.size(); ++i) {
        const Vec2 from = out.back();
        const Vec2 to = corners[i];
        const double dx = to.x - from.x;
        const double dy = to.y - from.y;
        const int steps = static_cast<int>(std::round(std::abs(dx) + std::abs(dy)));
        const Vec2 dir{dx == 0 ? 0.0 : dx / std::abs(dx), dy == 0 ? 0.0 : dy / std::abs(dy)};
        for (int s = 1; s <= steps; ++s) {
            out.push_back({from.x + dir.x * s, from.y + dir.y * s});
        }
    }
    return out;
}

std::vector<Vec2> diag_path() {
    std::vector<Vec2> out;
    for (int s = 0; s <= 8; ++s) out.push_back({double(s), double(s)});
    return out;
}

Trajectory make_demo(const std::vector<Vec2>& waypoints, double jitter, Rng& rng) {
    Trajectory t;
    t.length = static_cast<int>(waypoints.size()) - 1;
    t.obs.reserve(static_cast<std::size_t>(t.length) * 2);
    t.act.reserve(static_cast<std::size_t>(t.length) * 2);
    if (jitter == 0.0) {
        for (int i = 0; i < t.length; ++i) {
            t.obs.push_back(waypoints[i].x);
            t.obs.push_back(waypoints[i].y);
            t.act.push_back(waypoints[i + 1].x - waypoints[i].x);
            t.act.push_back(waypoints[i + 1].y - waypoints[i].y);
        }
        return t;
    }
    // jittered actions are replayed through the env so stored observations
    // still satisfy o_{t+1} = step(o_t, a_t)
    PointMassState state{waypoints.front(), 0};
    for (int i = 0; i < t.length; ++i) {
        const Vec2 a{waypoints[i + 1].x - waypoints[i].x + rng.gaussian(0.0, jitter),
                     waypoints[i + 1].y - waypoints[i].y + rng.gaussian(0.0, jitter)};
        t.obs.push_back(state.pos.x);
        t.obs.push_back(state.pos.y);
        t.act.push_back(a.x);
        t.act.push_back(a.y);
        state = env_step(state, a);
    }
    return t;
}

TrajectoryDataset assemble(const std::vector<const std::vector<Vec2>*>& modes, int per_mode,
                           std::uint64_t seed, double jitter) {
    Rng rng(seed);
    TrajectoryDataset ds;
    ds.obs_dim = 2;
    ds.act_dim = 2;
    for (const auto* path : modes) {
        for (int i = 0; i < per_mode; ++i) ds.trajectories.push_back(make_demo(*path, jitter, rng));
    }
    rng.shuffle(ds.trajectories);
    return ds;
}

}  // namespace

TrajectoryDataset gen_demos_env1(int n, std::uint64_t seed, double jitter_stddev) {
    if (n <= 0 || n % 2 != 0) {
        throw InputError("gen_demos_env1: n must be positive and even, got " + std::to_string(n));
    }
    return assemble({&kEnv1Up, &kEnv1Down}, n / 2, seed, jitter_stddev);
}

TrajectoryDataset gen_demos_env2(int n, std::uint64_t seed, double jitter_stddev) {
    if (n <= 0 || n % 3 != 0) {
        throw InputError("gen_demos_env2: n must be positive and divisible by 3, got " +
                         std::to_string(n));
    }
    static const std::vector<Vec2> diagonal = diag_path();
    static const std::vector<Vec2> up_first = unit_path({{0, 0}, {0, 4}, {4, 4}, {8, 4}, {8, 8}});
    static const std::vector<Vec2> right_first = unit_path({{0, 0}, {4, 0}, {4, 4}, {4, 8}, {8, 8}});
    return assemble({&diagonal, &up_first, &right_first}, n / 3, seed, jitter_stddev);
}

TrajectoryDataset gen_demos(EnvId id, int n, std::uint64_t seed, double jitter_stddev) {
    return id == EnvId::Multipath1 ? gen_demos_env1(n, seed, jitter_stddev)
                                   : gen_demos_env2(n, seed, jitter_stddev);
}

ModeLabel classify_mode(EnvId id, std::span<const Vec2> states, std::span<const Vec2> actions) {
    if (states.empty() && actions.empty()) {
        throw InputError("classify_mode: empty trajectory");
    }
    if (id == EnvId::Multipath1) {
        bool up = false, down = false;
        for (const Vec2& s : states) {
            if (s.y >= 3.0) up = true;
            if (s.y <= 1.0) down = true;
        }
        if (up) return ModeLabel::Up;  // Up wins if both
        if (down) return ModeLabel::Down;
        return ModeLabel::Undetermined;
    }
    if (actions.empty()) return ModeLabel::Undetermined;
    const Vec2 first = actions.front();
    const bool dx = first.x >= 0.5;
    const bool dy = first.y >= 0.5;
    if (dx && dy) return ModeLabel::Diagonal;
    if (dy) return ModeLabel::UpFirst;
    if (dx) return ModeLabel::RightFirst;
    return ModeLabel::Undetermined;
}

bool is_success(const EnvSpec& spec, std::span<const Vec2> states) {
    bool reached = false;
    int steps = 0;
    for (const Vec2& s : states) {
        if (spec.id == EnvId::Multipath1 && std::abs(s.x - 3.0) < 1e-9 && std::abs(s.y - 2.0) < 1e-9) {
            return false;  // the block in the middle
        }
        const double dx = s.x - spec.goal.x;
        const double dy = s.y - spec.goal.y;
        if (!reached && steps <= spec.max_steps && std::sqrt(dx * dx + dy * dy) <= spec.goal_radius) {
            reached = true;
        }
        ++steps;
    }
    return reached;
}

std::vector<Vec2> trajectory_states(const Trajectory& t, const TrajectoryDataset& ds) {
    if (ds.obs_dim != 2 || ds.act_dim != 2) {
        throw InputError("trajectory_states: point-mass trajectories are 2-dimensional");
    }
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(t.length) + 1);
    for (int i = 0; i < t.length; ++i) {
        out.push_back({t.obs[static_cast<std::size_t>(i) * ds.obs_dim],
                       t.obs[static_cast<std::size_t>(i) * ds.obs_dim + 1]});
    }
    // endpoint implied by the final action, under snapping
    PointMassState last{out.back(), 0};
    last = env_step(last, {t.act[static_cast<std::size_t>(t.length - 1) * ds.act_dim],
                           t.act[static_cast<std::size_t>(t.length - 1) * ds.act_dim + 1]});
    out.push_back(last.pos);
    return out;
}

std::vector<Vec2> trajectory_actions(const Trajectory& t, const TrajectoryDataset& ds) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(t.length));
    for (int i = 0; i < t.length; ++i) {
        out.push_back({t.act[static_cast<std::size_t>(i) * ds.act_dim],
                       t.act[static_cast<std::size_t>(i) * ds.act_dim + 1]});
    }
    return out;
}

}  // namespace bet
