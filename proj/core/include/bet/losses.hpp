#pragma once

#include <vector>

#include "bet/tensor.hpp"

namespace bet {

struct LossBreakdown {
    Tensor focal;
    Tensor mt;
    Tensor total;  // focal + alpha * mt
    double alpha = 1.0;
};

// Mean over all positions of -(1-p_gt)^gamma * log(p_gt), p = softmax(logits).
// logits is [positions, k] (leading batch/time dims flattened); gamma = 0
// reduces exactly to mean cross-entropy.
Tensor focal_loss(const Tensor& logits, const std::vector<int>& target_bins, double gamma);

// Mean over positions of the squared L2 error between the ground-truth bin's
// offset row and the target residual; all other rows contribute nothing, in
// value and in gradient. offsets is [positions, k*act_dim], residuals
// [positions, act_dim].
Tensor mt_loss(const Tensor& offsets, const std::vector<int>& target_bins,
               const Tensor& target_residuals);

LossBreakdown combined_loss(const Tensor& logits, const Tensor& offsets,
                            const std::vector<int>& target_bins, const Tensor& target_residuals,
                            double gamma, double alpha);

// alpha that puts the two first-batch losses on the same order of magnitude:
// clamp(focal/mt, 1e-2, 1e4), or 1.0 when mt is (near) zero.
double calibrate_alpha(double first_batch_focal, double first_batch_mt);

}  // namespace bet
