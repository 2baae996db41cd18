#pragma once

#include <string>
#include <variant>

#include "bet/baselines.hpp"
#include "bet/trainer.hpp"

namespace bet {

// BETC container payloads. Baseline policies share the container with a
// policy-type tag; parameters are stored as named float64 blobs so a saved
// model reproduces eval-mode outputs bitwise after loading.
using PolicyCheckpoint = std::variant<BetCheckpoint, MlpPolicy, MemorizedPolicy>;

const char* policy_type_name(const PolicyCheckpoint& ckpt);

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path);
PolicyCheckpoint load_checkpoint(const std::string& path);

struct LoadedPolicy {
    Policy policy;
    int obs_dim = 0;
    int act_dim = 0;
    std::string type;
};

// rollout adapter for any checkpoint type (2-d point-mass)
LoadedPolicy make_rollout_policy(const PolicyCheckpoint& ckpt, double temperature = 1.0);

}  // namespace bet
