#pragma once

#include <span>
#include <vector>

#include "bet/gpt.hpp"
#include "bet/tensor.hpp"

namespace bet {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.1;
    double clip_norm = 1.0;
};

// Adam with decoupled weight decay (applied only to decay-flagged parameters,
// before the moment update) and bias correction.
class AdamState {
public:
    AdamState(std::vector<NamedParam> params, AdamConfig config);

    // clips the global gradient norm, then applies one update
    void step();

    std::uint64_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }
    std::span<const NamedParam> params() const { return params_; }
    double last_grad_norm() const { return last_grad_norm_; }

    void zero_grad();

private:
    std::vector<NamedParam> params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t step_ = 0;
    double last_grad_norm_ = 0.0;
};

// If the combined L2 norm exceeds max_norm, rescales every array in place;
// returns the pre-clip norm.
double clip_global_norm(std::vector<std::span<double>> grads, double max_norm);

}  // namespace bet
