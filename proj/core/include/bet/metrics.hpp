#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bet/envs.hpp"

namespace bet {

// A policy maps the observation history so far (oldest first, including the
// current state) to the next action. step_seed is unique per (rollout, step).
using Policy = std::function<Vec2(std::span<const Vec2> history, std::uint64_t step_seed)>;

// builds the policy for rollout i; lets oracle-style policies replay demo i
using PolicyFactory = std::function<Policy(int rollout_index)>;

struct RolloutRecord {
    std::vector<Vec2> states;   // start state plus one entry per step
    std::vector<Vec2> actions;  // one per step
    bool success = false;
    ModeLabel mode = ModeLabel::Undetermined;
};

struct EvalMetrics {
    double success_rate = 0.0;
    std::map<ModeLabel, double> mode_frequencies;  // every label of the env, summing to 1
    double mode_entropy = 0.0;                     // nats, over the frequencies
    double mean_demo_distance = 0.0;  // mean over rollout steps of distance to nearest demo state
};

// Runs the policy from the env start state until the goal radius is reached
// or max_steps elapse, then classifies the trajectory.
RolloutRecord run_rollout(const Policy& policy, const EnvSpec& spec, std::uint64_t seed);

EvalMetrics compute_metrics(std::span<const RolloutRecord> records, const EnvSpec& spec,
                            const TrajectoryDataset& demos);

// n_rollouts rollouts with seeds seed+index; honors BET_THREADS (default 1)
// for parallel execution, with order-independent aggregation.
EvalMetrics evaluate_policy(const PolicyFactory& factory, const EnvSpec& spec, int n_rollouts,
                            std::uint64_t seed, const TrajectoryDataset& demos,
                            std::vector<RolloutRecord>* records_out = nullptr);

// replays demo (index mod n_demos) action-by-action
PolicyFactory demo_replay_factory(const TrajectoryDataset& demos);

// flat key=value report, one metric per line
void write_metrics_report(const EvalMetrics& metrics, const EnvSpec& spec, std::ostream& out);
std::string metrics_report_string(const EvalMetrics& metrics, const EnvSpec& spec);

// rollout_id,step,x,y,dx,dy,mode,success rows
void write_rollout_csv(std::span<const RolloutRecord> records, const std::string& path);

}  // namespace bet
