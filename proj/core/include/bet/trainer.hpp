#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bet/data.hpp"
#include "bet/gpt.hpp"
#include "bet/kmeans.hpp"
#include "bet/losses.hpp"
#include "bet/metrics.hpp"
#include "bet/optim.hpp"

namespace bet {

struct AblationConfig {
    bool offsets_enabled = true;  // false: decode bare centers, skip MT loss
    int k_override = 0;           // >0 replaces gpt.k (1 = no binning)
    int history_override = 0;     // >0 replaces gpt.context_len (1 = no history)
};

struct TrainConfig {
    GptConfig gpt;
    int epochs = 10;
    int batch_size = 64;
    double gamma = 2.0;  // focal exponent
    std::uint64_t seed = 0;
    AdamConfig optim;
    AblationConfig ablations;
    // Optimizer steps per epoch; 0 means one sampled batch per valid window
    // (Algorithm-1-style sampling rather than a single sweep).
    int steps_per_epoch = 0;

    int effective_k() const { return ablations.k_override > 0 ? ablations.k_override : gpt.k; }
    int effective_h() const {
        return ablations.history_override > 0 ? ablations.history_override : gpt.context_len;
    }
};

struct BetCheckpoint {
    TrainConfig cfg;  // gpt carries the effective k and context after ablations
    ActionCodebook codebook;
    BetModel model;
    double alpha = 1.0;
    std::uint64_t opt_steps = 0;
};

struct TrainReport {
    std::vector<double> epoch_focal;
    std::vector<double> epoch_mt;
    std::vector<double> epoch_total;
    double alpha = 1.0;
    double codebook_inertia = 0.0;
    std::size_t total_windows = 0;
};

using EpochCallback = std::function<void(int epoch, double focal, double mt, double total)>;

struct TrainResult {
    BetCheckpoint checkpoint;
    TrainReport report;
};

// Algorithm 1: fit the codebook on all actions, then optimize the focal +
// alpha*MT objective over sampled context windows. alpha is calibrated on the
// first batch and frozen. Deterministic given (dataset, config).
TrainResult train(const TrajectoryDataset& ds, TrainConfig cfg, const EpochCallback& on_epoch = {});

// Samples a bin from the temperature-scaled categorical at the last position
// and decodes it with the predicted residual row. temperature <= 0 means
// argmax with lowest-index tie-break.
std::vector<double> sample_action(const BetModel& model, const ActionCodebook& codebook,
                                  std::span<const double> obs_history, int seq_len,
                                  std::uint64_t rng_seed, double temperature = 1.0,
                                  bool offsets_enabled = true);

// rollout policy over the last effective_h observations
Policy bet_rollout_policy(const BetCheckpoint& ckpt, double temperature = 1.0);

RolloutRecord rollout(const BetCheckpoint& ckpt, const EnvSpec& spec, std::uint64_t seed,
                      double temperature = 1.0);

EvalMetrics evaluate(const BetCheckpoint& ckpt, const EnvSpec& spec, int n_rollouts,
                     std::uint64_t seed, const TrajectoryDataset& demos,
                     double temperature = 1.0, std::vector<RolloutRecord>* records_out = nullptr);

}  // namespace bet
