#pragma once

#include <string>
#include <vector>

#include "bet/envs.hpp"
#include "bet/trainer.hpp"

namespace bet {

// Flat key=value run configuration. Unknown keys are a hard error; '#' starts
// a comment. Flag overrides beat file values beat defaults.
struct RunConfig {
    // environment
    std::string env_id = "multipath1";
    int env_max_steps = 20;
    double env_goal_radius = 0.5;
    // start/goal default from env_id; overridable
    double env_start_x =kAuto, env_start_y = kAuto, env_goal_x = kAuto, env_goal_y = kAuto;

    // model
    int gpt_layers = 1;
    int gpt_heads = 2;
    int gpt_embed = 20;
    int gpt_context = 2;
    int gpt_k = 2;
    double gpt_dropout = 0.1;
    int gpt_obs_dim = 0;  // 0: infer from dataset
    int gpt_act_dim = 0;

    // training
    int train_epochs = 10;
    int train_batch = 64;
    double train_gamma = 2.0;
    std::uint64_t train_seed = 0;
    int train_steps_per_epoch = 0;  // 0: one sampled batch per window

    // optimizer
    double optim_lr = 1e-4;
    double optim_beta1 = 0.9;
    double optim_beta2 = 0.95;
    double optim_eps = 1e-8;
    double optim_weight_decay = 0.1;
    double optim_clip_norm = 1.0;

    // ablations
    bool ablations_offsets_enabled = true;
    int ablations_k_override = 0;
    int ablations_history_override = 0;

    // baselines
    int mlp_width = 64;
    int mlp_depth = 2;
    int mlp_stack_t = 0;  // 0: use gpt.context
    int baselines_knn = 5;

    // evaluation
    double eval_temperature = 1.0;

    static constexpr double kAuto = -1e300;  // start/goal sentinel

    void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
    void apply_file(const std::string& path);
    void apply_overrides(const std::vector<std::string>& key_equals_value);

    // canonical dump; parse(dump()) round-trips exactly
    std::string dump() const;

    EnvSpec env_spec() const;
    TrainConfig train_config() const;
};

RunConfig parse_config_text(const std::string& text);

}  // namespace bet
