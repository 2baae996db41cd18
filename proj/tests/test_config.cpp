#include <doctest.h>

#include "bet/config.hpp"
#include "bet/errors.hpp"

using namespace bet;

TEST_CASE("defaults resolve to the point-mass row") {
    const RunConfig cfg;
    CHECK(cfg.gpt_layers == 1);
    CHECK(cfg.gpt_heads == 2);
    CHECK(cfg.gpt_embed == 20);
    CHECK(cfg.gpt_context == 2);
    CHECK(cfg.train_epochs == 10);
    CHECK(cfg.train_batch == 64);
    CHECK(cfg.optim_lr == 1e-4);
    CHECK(cfg.optim_weight_decay == 0.1);
    CHECK(cfg.optim_beta1 == 0.9);
    CHECK(cfg.optim_beta2 == 0.95);
    CHECK(cfg.optim_clip_norm == 1.0);
}

TEST_CASE("dump/parse round trip is exact") {
    RunConfig cfg;
    cfg.set("env.id", "multipath2");
    cfg.set("gpt.k", "5");
    cfg.set("train.gamma", "1.25");
    cfg.set("ablations.offsets_enabled", "false");
    const std::string dumped = cfg.dump();
    const RunConfig back = parse_config_text(dumped);
    CHECK(back.dump() == dumped);
}

TEST_CASE("unknown keys are a hard error") {
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.set("gpt.layerz", "3"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("totally.unknown=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("gpt.layers 3\n"), ConfigError);  // missing '='
    CHECK_THROWS_AS(cfg.set("gpt.layers", "abc"), ConfigError);
    CHECK_THROWS_AS(cfg.set("env.id", "carla"), ConfigError);
}

TEST_CASE("overrides beat file values") {
    RunConfig cfg = parse_config_text("gpt.k=4\ntrain.epochs=3\n");
    CHECK(cfg.gpt_k == 4);
    cfg.apply_overrides({"gpt.k=7", "ablations.history_override=1"});
    CHECK(cfg.gpt_k == 7);
    CHECK(cfg.train_epochs == 3);
    CHECK(cfg.ablations_history_override == 1);
    CHECK_THROWS_AS(cfg.apply_overrides({"gpt.k"}), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
    const RunConfig cfg = parse_config_text("# header\n\ngpt.k = 3   # trailing\n   \n");
    CHECK(cfg.gpt_k == 3);
}

TEST_CASE("shipped pointmass1.cfg matches the built-in point-mass defaults") {
    RunConfig cfg;
    cfg.apply_file(std::string(BET_CONFIG_DIR) + "/pointmass1.cfg");
    const std::string dump = cfg.dump();
    CHECK(dump.find("gpt.layers=1\n") != std::string::npos);
    CHECK(dump.find("gpt.heads=2\n") != std::string::npos);
    CHECK(dump.find("gpt.embed=20\n") != std::string::npos);
    CHECK(dump.find("gpt.dropout=0.1\n") != std::string::npos);
    CHECK(dump.find("gpt.context=2\n") != std::string::npos);
    CHECK(dump.find("gpt.k=2\n") != std::string::npos);
    CHECK(dump.find("train.epochs=10\n") != std::string::npos);
    CHECK(dump.find("train.batch=64\n") != std::string::npos);
    CHECK(dump.find("optim.lr=0.0001\n") != std::string::npos);
    CHECK(dump.find("optim.weight_decay=0.1\n") != std::string::npos);
    CHECK(dump.find("optim.beta1=0.9\n") != std::string::npos);
    CHECK(dump.find("optim.beta2=0.95\n") != std::string::npos);
    CHECK(dump.find("optim.clip_norm=1\n") != std::string::npos);
    CHECK(dump.find("env.id=multipath1\n") != std::string::npos);
}

TEST_CASE("shipped pointmass2.cfg selects k=3 and env 2") {
    RunConfig cfg;
    cfg.apply_file(std::string(BET_CONFIG_DIR) + "/pointmass2.cfg");
    CHECK(cfg.gpt_k == 3);
    CHECK(cfg.env_id == "multipath2");
    const EnvSpec spec = cfg.env_spec();
    CHECK(spec.start.x == 0.0);
    CHECK(spec.goal.x == 8.0);
}

TEST_CASE("env spec resolution honors explicit coordinates") {
    RunConfig cfg;
    cfg.set("env.id", "multipath1");
    EnvSpec spec = cfg.env_spec();
    CHECK(spec.start.x == 1.0);
    CHECK(spec.start.y == 2.0);
    CHECK(spec.goal.x == 5.0);
    cfg.set("env.goal_x", "6");
    spec = cfg.env_spec();
    CHECK(spec.goal.x == 6.0);
}

TEST_CASE("train_config mirrors the run configuration") {
    RunConfig cfg;
    cfg.set("gpt.k", "4");
    cfg.set("train.gamma", "0.5");
    cfg.set("ablations.k_override", "1");
    const TrainConfig tc = cfg.train_config();
    CHECK(tc.gpt.k == 4);
    CHECK(tc.gamma == 0.5);
    CHECK(tc.ablations.k_override == 1);
    CHECK(tc.effective_k() == 1);
}
