#include "bet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bet/errors.hpp"

namespace bet {

Tensor focal_loss(const Tensor& logits, const std::vector<int>& target_bins, double gamma) {
    if (gamma < 0.0) throw InputError("focal_loss: gamma must be >= 0");
    const int k = logits.shape().back();
    const std::size_t positions = logits.numel() / static_cast<std::size_t>(k);
    if (target_bins.size() != positions) {
        throw InputError("focal_loss: expected " + std::to_string(positions) + " targets, got " +
                         std::to_string(target_bins.size()));
    }
    for (int t : target_bins) {
        if (t < 0 || t >= k) {
            throw InputError("focal_loss: target " + std::to_string(t) + " out of range [0, " +
                             std::to_string(k) + ")");
        }
    }
    Tensor probs = softmax_lastdim(logits);
    Tensor p_gt = take_per_row(probs, target_bins);
    Tensor modulator = pow_scalar(affine(p_gt, -1.0, 1.0), gamma);  // (1-p)^gamma
    Tensor nll = scale(log_clamped(p_gt), -1.0);
    return mean(mul(modulator, nll));
}

Tensor mt_loss(const Tensor& offsets, const std::vector<int>& target_bins,
               const Tensor& target_residuals) {
    if (target_residuals.rank() != 2) throw InputError("mt_loss: residuals must be [positions, act_dim]");
    const int act_dim = target_residuals.dim(1);
    const std::size_t positions = static_cast<std::size_t>(target_residuals.dim(0));
    if (offsets.numel() / static_cast<std::size_t>(offsets.shape().back()) != positions) {
        throw InputError("mt_loss: offsets and residuals disagree on position count");
    }
    if (offsets.shape().back() % act_dim != 0) {
        throw InputError("mt_loss: offsets width not a multiple of act_dim");
    }
    if (target_bins.size() != positions) {
        throw InputError("mt_loss: expected " + std::to_string(positions) + " target bins");
    }
    const int k = offsets.shape().back() / act_dim;
    for (int t : target_bins) {
        if (t < 0 || t >= k) {
            throw InputError("mt_loss: target bin " + std::to_string(t) + " out of range [0, " +
                             std::to_string(k) + ")");
        }
    }
    // only the ground-truth bin's row is touched; other rows never enter the
    // graph, so their gradient is identically zero
    Tensor picked = take_segment_per_row(offsets, target_bins, act_dim);
    Tensor err = sub(target_residuals, picked);
    Tensor sq = mul(err, err);
    return scale(sum(sq), 1.0 / static_cast<double>(positions));
}

LossBreakdown combined_loss(const Tensor& logits, const Tensor& offsets,
                            const std::vector<int>& target_bins, const Tensor& target_residuals,
                            double gamma, double alpha) {
    if (alpha <= 0.0) throw InputError("combined_loss: alpha must be positive");
    LossBreakdown out;
    out.alpha = alpha;
    out.focal = focal_loss(logits, target_bins, gamma);
    out.mt = mt_loss(offsets, target_bins, target_residuals);
    out.total = add(out.focal, scale(out.mt, alpha));
    return out;
}

double calibrate_alpha(double first_batch_focal, double first_batch_mt) {
    if (!std::isfinite(first_batch_focal) || !std::isfinite(first_batch_mt)) {
        throw NumericError("calibrate_alpha: non-finite loss value");
    }
    if (first_batch_mt <= 1e-12) return 1.0;
    return std::clamp(first_batch_focal / first_batch_mt, 1e-2, 1e4);
}

}  // namespace bet
