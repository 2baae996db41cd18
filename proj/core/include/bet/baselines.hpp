#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bet/data.hpp"
#include "bet/metrics.hpp"
#include "bet/optim.hpp"
#include "bet/tensor.hpp"

namespace bet {

// MSE-trained MLP over the last stack_t observations (zero-padded before
// episode start), GELU activations between hidden layers.
struct MlpPolicy {
    int stack_t = 1;
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<int> widths;  // hidden layer widths
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

struct MlpTrainReport {
    std::vector<double> epoch_mse;
};

MlpPolicy train_mlp(const TrajectoryDataset& ds, int stack_t, std::vector<int> widths, int epochs,
                    std::uint64_t seed, const AdamConfig& optim = {}, int batch_size = 64,
                    MlpTrainReport* report = nullptr);

// stacked_obs has stack_t*obs_dim entries, oldest frame first
std::vector<double> mlp_predict(const MlpPolicy& policy, std::span<const double> stacked_obs);

std::vector<NamedParam> mlp_parameters(const MlpPolicy& policy);

// Non-parametric memorizers: 1-NN and k-NN locally weighted regression with
// exp(-distance) weights.
struct MemorizedPolicy {
    int obs_dim = 0;
    int act_dim = 0;
    int kN = 5;
    bool lwr = false;               // false: 1-NN, true: LWR
    std::vector<double> obs;        // n * obs_dim
    std::vector<double> act;        // n * act_dim
    std::size_t size() const { return obs_dim == 0 ? 0 : obs.size() / static_cast<std::size_t>(obs_dim); }
};

MemorizedPolicy memorize_dataset(const TrajectoryDataset& ds, int kN, bool lwr);

// action of the Euclidean-closest stored pair; ties go to the lowest index
std::vector<double> nn_predict(const MemorizedPolicy& policy, std::span<const double> o);

// exp(-dist)-weighted average over the kN nearest neighbors' actions
std::vector<double> lwr_predict(const MemorizedPolicy& policy, std::span<const double> o);

// rollout adapters (2-d point-mass observations)
Policy mlp_rollout_policy(const MlpPolicy& policy);
Policy memorized_rollout_policy(const MemorizedPolicy& policy);

}  // namespace bet
