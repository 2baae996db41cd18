#include "bet/optim.hpp"

#include <cmath>

#include "bet/errors.hpp"

namespace bet {

double clip_global_norm(std::vector<std::span<double>> grads, double max_norm) {
    if (max_norm <= 0.0) throw InputError("clip_global_norm: max_norm must be positive");
    double sq = 0.0;
    for (const auto& g : grads) {
        for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& g : grads) {
            for (double& v : g) v *= s;
        }
    }
    return norm;
}

AdamState::AdamState(std::vector<NamedParam> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const NamedParam& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void AdamState::zero_grad() {
    for (NamedParam& p : params_) p.tensor.zero_grad();
}

void AdamState::step() {
    std::vector<std::span<double>> grads;
    grads.reserve(params_.size());
    for (NamedParam& p : params_) grads.push_back(p.tensor.grad());
    last_grad_norm_ = clip_global_norm(std::move(grads), config_.clip_norm);

    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        NamedParam& p = params_[pi];
        auto data = p.tensor.data();
        auto grad = p.tensor.grad();
        if (grad.size() != data.size()) throw ContractError("adam: gradient missing for " + p.name);
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        // decoupled weight decay, before the Adam update
        if (p.decay && config_.weight_decay != 0.0) {
            const double shrink = config_.lr * config_.weight_decay;
            for (double& w : data) w -= shrink * w;
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

}  // namespace bet
