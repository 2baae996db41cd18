#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "bet/checkpoint.hpp"
#include "bet/envs.hpp"
#include "bet/errors.hpp"
#include "bet/trainer.hpp"

using namespace bet;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("bet_test_" + name)).string();
}

TrainConfig quick_config(int k, int h, std::uint64_t seed, int steps_per_epoch, int epochs) {
    TrainConfig cfg;
    cfg.gpt.k = k;
    cfg.gpt.context_len = h;
    cfg.gpt.dropout_p = 0.1;
    cfg.seed = seed;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.steps_per_epoch = steps_per_epoch;
    return cfg;
}

// one env1 Up demonstration, duplicated
TrajectoryDataset repeated_up_demo(int copies) {
    const TrajectoryDataset base = gen_demos_env1(2, 0);
    TrajectoryDataset ds;
    ds.obs_dim = 2;
    ds.act_dim = 2;
    for (const Trajectory& t : base.trajectories) {
        const auto states = trajectory_states(t, base);
        bool up = false;
        for (const Vec2& s : states) up = up || s.y >= 3.0;
        if (up) {
            for (int i = 0; i < copies; ++i) ds.trajectories.push_back(t);
            break;
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("constant dataset with k=1 regresses to the constant action") {
    TrajectoryDataset ds;
    ds.obs_dim = 2;
    ds.act_dim = 2;
    Trajectory t;
    t.length = 8;
    for (int i = 0; i < 8; ++i) {
        t.obs.insert(t.obs.end(), {1.0, 1.0});
        t.act.insert(t.act.end(), {0.25, -0.75});
    }
    ds.trajectories.push_back(t);

    const TrainResult result = train(ds, quick_config(1, 2, 0, 50, 4));
    const auto action = sample_action(result.checkpoint.model, result.checkpoint.codebook,
                                      std::vector<double>{1.0, 1.0}, 1, 0);
    CHECK(std::abs(action[0] - 0.25) < 1e-2);
    CHECK(std::abs(action[1] + 0.75) < 1e-2);
}

TEST_CASE("same seed trains to bitwise-identical checkpoints") {
    const TrajectoryDataset ds = gen_demos_env1(10, 4);
    const TrainResult a = train(ds, quick_config(2, 2, 9, 20, 2));
    const TrainResult b = train(ds, quick_config(2, 2, 9, 20, 2));
    const auto pa = gpt_parameters(a.checkpoint.model);
    const auto pb = gpt_parameters(b.checkpoint.model);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j) {
            CHECK(pa[i].tensor.at(j) == pb[i].tensor.at(j));
        }
    }
    CHECK(a.checkpoint.alpha == b.checkpoint.alpha);
    CHECK(a.report.epoch_total == b.report.epoch_total);
}

TEST_CASE("alpha is calibrated once from the first batch") {
    const TrajectoryDataset ds = gen_demos_env1(10, 4);
    const TrainResult r = train(ds, quick_config(2, 2, 1, 10, 2));
    CHECK(r.checkpoint.alpha == r.report.alpha);
    CHECK(r.checkpoint.alpha >= 1e-2);
    CHECK(r.checkpoint.alpha <= 1e4);
}

TEST_CASE("sample_action honors a degenerate categorical and the decode identity") {
    const TrajectoryDataset ds = gen_demos_env1(4, 2);
    const TrainResult r = train(ds, quick_config(2, 2, 3, 5, 1));
    BetModel model = r.checkpoint.model;
    // force probability 1 on bin 1
    model.head_bins_b.at(0) = -1e9;
    model.head_bins_b.at(1) = 1e9;
    for (std::size_t i = 0; i < model.head_bins_w.numel(); ++i) model.head_bins_w.at(i) = 0.0;

    const std::vector<double> history = {1.0, 2.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto action = sample_action(model, r.checkpoint.codebook, history, 1, seed);
        // action minus the predicted offset row recovers center 1
        const GptOutput out = gpt_forward_seq(model, history, 1, false, 0);
        const double off_x = out.offsets.at(2);  // bin 1 row of k=2, act_dim=2
        const double off_y = out.offsets.at(3);
        CHECK(std::abs((action[0] - off_x) - r.checkpoint.codebook.center(1)[0]) <= 1e-12);
        CHECK(std::abs((action[1] - off_y) - r.checkpoint.codebook.center(1)[1]) <= 1e-12);
    }

    // fixed seed, repeated calls agree bitwise
    const auto once = sample_action(model, r.checkpoint.codebook, history, 1, 42);
    const auto again = sample_action(model, r.checkpoint.codebook, history, 1, 42);
    CHECK(once == again);

    CHECK_THROWS_AS(sample_action(model, r.checkpoint.codebook, {}, 0, 0), InputError);
}

TEST_CASE("temperature zero means argmax with lowest-index tie-break") {
    const TrajectoryDataset ds = gen_demos_env1(4, 2);
    const TrainResult r = train(ds, quick_config(2, 2, 3, 5, 1));
    BetModel model = r.checkpoint.model;
    for (std::size_t i = 0; i < model.head_bins_w.numel(); ++i) model.head_bins_w.at(i) = 0.0;
    model.head_bins_b.at(0) = 0.0;
    model.head_bins_b.at(1) = 0.0;  // exact tie
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto a = sample_action(model, r.checkpoint.codebook, std::vector<double>{1, 2}, 1,
                                     seed, 0.0);
        const GptOutput out = gpt_forward_seq(model, std::vector<double>{1, 2}, 1, false, 0);
        CHECK(std::abs((a[0] - out.offsets.at(0)) - r.checkpoint.codebook.center(0)[0]) <= 1e-12);
    }
}

TEST_CASE("a model overfit to one demo replays it") {
    const TrajectoryDataset ds = repeated_up_demo(4);
    TrainConfig cfg = quick_config(3, 2, 0, 300, 8);  // k=3: zero-inertia codebook
    cfg.gpt.dropout_p = 0.1;
    const TrainResult r = train(ds, cfg);
    CHECK(r.checkpoint.codebook.inertia == doctest::Approx(0.0).epsilon(1e-12));

    const RolloutRecord rec = rollout(r.checkpoint, EnvSpec::multipath1(), 1, /*temperature=*/0.0);
    CHECK(rec.success);
    CHECK(rec.mode == ModeLabel::Up);
    REQUIRE(rec.states.size() >= 9);
    const auto demo_states = trajectory_states(ds.trajectories.front(), ds);
    for (std::size_t i = 0; i < demo_states.size(); ++i) {
        CHECK(rec.states[i].x == demo_states[i].x);
        CHECK(rec.states[i].y == demo_states[i].y);
    }
}

TEST_CASE("rollout uses the available prefix before h observations exist") {
    const TrajectoryDataset ds = gen_demos_env1(4, 2);
    const TrainResult r = train(ds, quick_config(2, 2, 3, 5, 1));
    const Policy policy = bet_rollout_policy(r.checkpoint);
    const std::vector<Vec2> only_start = {{1, 2}};
    CHECK_NOTHROW(policy(only_start, 7));  // h=2 model, history of 1
}

TEST_CASE("offsets_enabled=false emits exact codebook centers") {
    const TrajectoryDataset ds = gen_demos_env1(10, 1);
    TrainConfig cfg = quick_config(2, 2, 5, 10, 1);
    cfg.ablations.offsets_enabled = false;
    const TrainResult r = train(ds, cfg);
    CHECK(r.report.epoch_mt.back() == 0.0);
    const Policy policy = bet_rollout_policy(r.checkpoint);
    const std::vector<Vec2> history = {{1, 2}, {2, 2}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Vec2 a = policy(history, seed);
        bool is_center = false;
        for (int c = 0; c < r.checkpoint.codebook.k; ++c) {
            is_center = is_center || (a.x == r.checkpoint.codebook.center(c)[0] &&
                                      a.y == r.checkpoint.codebook.center(c)[1]);
        }
        CHECK(is_center);
    }
}

TEST_CASE("k and history overrides reshape the trained model") {
    const TrajectoryDataset ds = gen_demos_env1(10, 1);
    TrainConfig cfg = quick_config(2, 2, 5, 5, 1);
    cfg.ablations.k_override = 1;
    cfg.ablations.history_override = 1;
    const TrainResult r = train(ds, cfg);
    CHECK(r.checkpoint.cfg.gpt.k == 1);
    CHECK(r.checkpoint.cfg.gpt.context_len == 1);
    CHECK(r.checkpoint.codebook.k == 1);
}

TEST_CASE("checkpoint round trip preserves eval-mode outputs bitwise") {
    const TrajectoryDataset ds = gen_demos_env1(10, 6);
    const TrainResult r = train(ds, quick_config(2, 2, 11, 15, 2));
    const std::string path = tmp_path("model.betc");
    save_checkpoint(r.checkpoint, path);
    const PolicyCheckpoint loaded = load_checkpoint(path);
    REQUIRE(std::holds_alternative<BetCheckpoint>(loaded));
    const BetCheckpoint& back = std::get<BetCheckpoint>(loaded);

    const std::vector<double> obs = {1, 2, 2, 2};
    const GptOutput a = gpt_forward_seq(r.checkpoint.model, obs, 2, false, 0);
    const GptOutput b = gpt_forward_seq(back.model, obs, 2, false, 0);
    for (std::size_t i = 0; i < a.logits.numel(); ++i) CHECK(a.logits.at(i) == b.logits.at(i));
    for (std::size_t i = 0; i < a.offsets.numel(); ++i) CHECK(a.offsets.at(i) == b.offsets.at(i));
    CHECK(back.alpha == r.checkpoint.alpha);
    CHECK(back.opt_steps == r.checkpoint.opt_steps);
    CHECK(back.codebook.centers == r.checkpoint.codebook.centers);
    std::remove(path.c_str());
}

TEST_CASE("baseline checkpoints share the container with a policy tag") {
    const TrajectoryDataset ds = gen_demos_env1(4, 2);
    const std::string path = tmp_path("baseline.betc");

    const MemorizedPolicy nn = memorize_dataset(ds, 5, false);
    save_checkpoint(nn, path);
    PolicyCheckpoint loaded = load_checkpoint(path);
    CHECK(std::string(policy_type_name(loaded)) == "nn");
    CHECK(std::get<MemorizedPolicy>(loaded).obs == nn.obs);

    const MemorizedPolicy lwr = memorize_dataset(ds, 5, true);
    save_checkpoint(lwr, path);
    CHECK(std::string(policy_type_name(load_checkpoint(path))) == "lwr");

    const MlpPolicy mlp = train_mlp(ds, 2, {8}, 1, 0);
    save_checkpoint(mlp, path);
    loaded = load_checkpoint(path);
    CHECK(std::string(policy_type_name(loaded)) == "mlp");
    const MlpPolicy& mlp_back = std::get<MlpPolicy>(loaded);
    const std::vector<double> stacked = {1, 2, 2, 2};
    CHECK(mlp_predict(mlp_back, stacked) == mlp_predict(mlp, stacked));
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are format errors") {
    const std::string path = tmp_path("garbage.betc");
    {
        std::ofstream out(path, std::ios::binary);
        out << "BETCgarbagegarbage";
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint(tmp_path("missing.betc")), FormatError);
}

TEST_CASE("evaluating the demos as an oracle policy") {
    const TrajectoryDataset demos = gen_demos_env1(100, 7);
    const EvalMetrics m = evaluate_policy(demo_replay_factory(demos), EnvSpec::multipath1(), 100,
                                          0, demos);
    CHECK(m.success_rate == 1.0);
    CHECK(m.mode_frequencies.at(ModeLabel::Up) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.mode_frequencies.at(ModeLabel::Down) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(m.mode_entropy - std::log(2.0)) <= 1e-12);
    CHECK(m.mean_demo_distance == 0.0);

    double total = 0.0;
    for (const auto& [label, p] : m.mode_frequencies) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
}

TEST_CASE("all-Undetermined rollouts have zero mode entropy") {
    const TrajectoryDataset demos = gen_demos_env1(4, 0);
    std::vector<RolloutRecord> records(5);
    for (auto& r : records) {
        r.states = {{1, 2}, {2, 2}};
        r.actions = {{1, 0}};
        r.mode = ModeLabel::Undetermined;
        r.success = false;
    }
    const EvalMetrics m = compute_metrics(records, EnvSpec::multipath1(), demos);
    CHECK(m.mode_entropy == 0.0);
    CHECK(m.success_rate == 0.0);
}

TEST_CASE("evaluation is independent of BET_THREADS") {
    const TrajectoryDataset demos = gen_demos_env1(10, 3);
    const TrainResult r = train(demos, quick_config(2, 2, 1, 10, 1));
    const EvalMetrics serial = evaluate(r.checkpoint, EnvSpec::multipath1(), 16, 5, demos);
    setenv("BET_THREADS", "2", 1);
    const EvalMetrics parallel = evaluate(r.checkpoint, EnvSpec::multipath1(), 16, 5, demos);
    unsetenv("BET_THREADS");
    CHECK(serial.success_rate == parallel.success_rate);
    CHECK(serial.mode_entropy == parallel.mode_entropy);
    CHECK(serial.mean_demo_distance == parallel.mean_demo_distance);
}

TEST_CASE("config dimension mismatch is rejected") {
    const TrajectoryDataset ds = gen_demos_env1(4, 0);
    TrainConfig cfg = quick_config(2, 2, 0, 2, 1);
    cfg.gpt.obs_dim = 3;
    CHECK_THROWS_AS(train(ds, cfg), ConfigError);
}
