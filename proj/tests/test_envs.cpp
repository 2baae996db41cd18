#include <doctest.h>

#include <cmath>
#include <limits>

#include "bet/envs.hpp"
#include "bet/errors.hpp"

using namespace bet;

TEST_CASE("snapping step rule") {
    PointMassState s{{1, 2}, 0};
    const PointMassState s1 = env_step(s, {0.9, 0.1});
    CHECK(s1.pos.x == 2.0);
    CHECK(s1.pos.y == 2.0);
    CHECK(s1.t == 1);

    const PointMassState still = env_step(s, {0, 0});
    CHECK(still.pos.x == 1.0);
    CHECK(still.pos.y == 2.0);

    const PointMassState jump = env_step(s, {1, 1});
    CHECK(jump.pos.x == 2.0);
    CHECK(jump.pos.y == 3.0);

    // ties round half away from zero
    const PointMassState tie = env_step(PointMassState{{0, 0}, 0}, {0.5, -0.5});
    CHECK(tie.pos.x == 1.0);
    CHECK(tie.pos.y == -1.0);

    CHECK_THROWS_AS(env_step(s, {std::numeric_limits<double>::quiet_NaN(), 0}), InputError);
}

TEST_CASE("env1 demo action sequences match the canonical waypoints") {
    const TrajectoryDataset ds = gen_demos_env1(2, 0);
    REQUIRE(ds.trajectories.size() == 2);
    const std::vector<std::pair<double, double>> up_actions = {
        {1, 0}, {0, 1}, {0, 1}, {1, 0}, {1, 0}, {0, -1}, {0, -1}, {1, 0}};
    bool found_up = false;
    for (const Trajectory& t : ds.trajectories) {
        REQUIRE(t.length == 8);
        bool matches = true;
        for (int i = 0; i < 8; ++i) {
            if (t.act[static_cast<std::size_t>(i) * 2] != up_actions[static_cast<std::size_t>(i)].first ||
                t.act[static_cast<std::size_t>(i) * 2 + 1] != up_actions[static_cast<std::size_t>(i)].second) {
                matches = false;
            }
        }
        found_up = found_up || matches;
        // every demo ends at (5,2)
        const auto states = trajectory_states(t, ds);
        CHECK(states.back().x == 5.0);
        CHECK(states.back().y == 2.0);
    }
    CHECK(found_up);
}

TEST_CASE("env1 demo counts split evenly between modes") {
    const TrajectoryDataset ds = gen_demos_env1(200, 3);
    CHECK(ds.trajectories.size() == 200);
    int up = 0, down = 0;
    for (const Trajectory& t : ds.trajectories) {
        const ModeLabel mode = classify_mode(EnvId::Multipath1, trajectory_states(t, ds),
                                             trajectory_actions(t, ds));
        up += mode == ModeLabel::Up ? 1 : 0;
        down += mode == ModeLabel::Down ? 1 : 0;
    }
    CHECK(up == 100);
    CHECK(down == 100);
    CHECK_THROWS_AS(gen_demos_env1(7, 0), InputError);
}

TEST_CASE("env2 demo structure") {
    const TrajectoryDataset ds = gen_demos_env2(3, 1);
    REQUIRE(ds.trajectories.size() == 3);
    int diag = 0, up_first = 0, right_first = 0;
    for (const Trajectory& t : ds.trajectories) {
        const auto states = trajectory_states(t, ds);
        const auto actions = trajectory_actions(t, ds);
        CHECK(states.front().x == 0.0);
        CHECK(states.front().y == 0.0);
        CHECK(states.back().x == 8.0);
        CHECK(states.back().y == 8.0);
        const ModeLabel mode = classify_mode(EnvId::Multipath2, states, actions);
        if (mode == ModeLabel::Diagonal) {
            ++diag;
            CHECK(t.length == 8);
            for (int i = 0; i < t.length; ++i) {
                CHECK(t.act[static_cast<std::size_t>(i) * 2] == 1.0);
                CHECK(t.act[static_cast<std::size_t>(i) * 2 + 1] == 1.0);
            }
        } else if (mode == ModeLabel::UpFirst) {
            ++up_first;
            CHECK(t.length == 16);
        } else if (mode == ModeLabel::RightFirst) {
            ++right_first;
            CHECK(t.length == 16);
        }
    }
    CHECK(diag == 1);
    CHECK(up_first == 1);
    CHECK(right_first == 1);
    CHECK_THROWS_AS(gen_demos_env2(4, 0), InputError);
}

TEST_CASE("replaying demo actions through the env reproduces the observations") {
    for (EnvId id : {EnvId::Multipath1, EnvId::Multipath2}) {
        const TrajectoryDataset ds = gen_demos(id, 6, 9);
        for (const Trajectory& t : ds.trajectories) {
            PointMassState state{{t.obs[0], t.obs[1]}, 0};
            for (int s = 0; s < t.length; ++s) {
                CHECK(state.pos.x == t.obs[static_cast<std::size_t>(s) * 2]);
                CHECK(state.pos.y == t.obs[static_cast<std::size_t>(s) * 2 + 1]);
                state = env_step(state, {t.act[static_cast<std::size_t>(s) * 2],
                                         t.act[static_cast<std::size_t>(s) * 2 + 1]});
            }
        }
    }
}

TEST_CASE("mode classification rules") {
    const std::vector<Vec2> visiting_up = {{1, 2}, {2, 2}, {2, 3}};
    CHECK(classify_mode(EnvId::Multipath1, visiting_up, {}) == ModeLabel::Up);

    const std::vector<Vec2> straight = {{1, 2}, {2, 2}, {3, 2}};
    CHECK(classify_mode(EnvId::Multipath1, straight, {}) == ModeLabel::Undetermined);

    const std::vector<Vec2> both = {{1, 2}, {2, 4}, {2, 0}};
    CHECK(classify_mode(EnvId::Multipath1, both, {}) == ModeLabel::Up);  // Up wins

    const std::vector<Vec2> start = {{0, 0}};
    const std::vector<Vec2> diag_act = {{1, 1}};
    CHECK(classify_mode(EnvId::Multipath2, start, diag_act) == ModeLabel::Diagonal);
    const std::vector<Vec2> up_act = {{0.2, 1}};
    CHECK(classify_mode(EnvId::Multipath2, start, up_act) == ModeLabel::UpFirst);
    const std::vector<Vec2> right_act = {{1, 0.2}};
    CHECK(classify_mode(EnvId::Multipath2, start, right_act) == ModeLabel::RightFirst);
    const std::vector<Vec2> none_act = {{0.1, -0.1}};
    CHECK(classify_mode(EnvId::Multipath2, start, none_act) == ModeLabel::Undetermined);
}

TEST_CASE("success predicate") {
    const EnvSpec spec = EnvSpec::multipath1();
    const TrajectoryDataset ds = gen_demos_env1(2, 0);
    for (const Trajectory& t : ds.trajectories) {
        CHECK(is_success(spec, trajectory_states(t, ds)));
    }

    // passing through the block fails even if the goal is reached
    const std::vector<Vec2> through_block = {{1, 2}, {2, 2}, {3, 2}, {4, 2}, {5, 2}};
    CHECK_FALSE(is_success(spec, through_block));

    std::vector<Vec2> stuck(21, {1, 2});
    CHECK_FALSE(is_success(spec, stuck));
}

TEST_CASE("jittered demos still replay exactly and stay near the waypoints") {
    const TrajectoryDataset ds = gen_demos_env1(4, 11, 0.05);
    for (const Trajectory& t : ds.trajectories) {
        PointMassState state{{t.obs[0], t.obs[1]}, 0};
        for (int s = 0; s < t.length; ++s) {
            CHECK(state.pos.x == t.obs[static_cast<std::size_t>(s) * 2]);
            CHECK(state.pos.y == t.obs[static_cast<std::size_t>(s) * 2 + 1]);
            state = env_step(state, {t.act[static_cast<std::size_t>(s) * 2],
                                     t.act[static_cast<std::size_t>(s) * 2 + 1]});
        }
    }
}
