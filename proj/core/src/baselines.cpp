#include "bet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bet/errors.hpp"

namespace bet {

namespace {

// (stacked observation, action) pairs over every step of every trajectory,
// zero-padded before episode start, oldest frame first
void build_frame_stacks(const TrajectoryDataset& ds, int stack_t, std::vector<double>& inputs,
                        std::vector<double>& targets) {
    const std::size_t in_width = static_cast<std::size_t>(stack_t) * ds.obs_dim;
    inputs.clear();
    targets.clear();
    inputs.reserve(ds.total_steps() * in_width);
    targets.reserve(ds.total_steps() * ds.act_dim);
    for (const Trajectory& traj : ds.trajectories) {
        for (int t = 0; t < traj.length; ++t) {
            for (int f = stack_t - 1; f >= 0; --f) {
                const int src = t - f;
                for (int c = 0; c < ds.obs_dim; ++c) {
                    inputs.push_back(src < 0 ? 0.0
                                             : traj.obs[static_cast<std::size_t>(src) * ds.obs_dim + c]);
                }
            }
            for (int c = 0; c < ds.act_dim; ++c) {
                targets.push_back(traj.act[static_cast<std::size_t>(t) * ds.act_dim + c]);
            }
        }
    }
}

Tensor mlp_forward(const MlpPolicy& policy, const Tensor& x) {
    Tensor h = x;
    for (std::size_t i = 0; i < policy.weights.size(); ++i) {
        h = add_rowvec(matmul(h, policy.weights[i]), policy.biases[i]);
        if (i + 1 < policy.weights.size()) h = gelu(h);
    }
    return h;
}

}  // namespace

std::vector<NamedParam> mlp_parameters(const MlpPolicy& policy) {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < policy.weights.size(); ++i) {
        out.push_back({"mlp.layer" + std::to_string(i) + ".w", policy.weights[i], true});
        out.push_back({"mlp.layer" + std::to_string(i) + ".b", policy.biases[i], false});
    }
    return out;
}

MlpPolicy train_mlp(const TrajectoryDataset& ds, int stack_t, std::vector<int> widths, int epochs,
                    std::uint64_t seed, const AdamConfig& optim, int batch_size,
                    MlpTrainReport* report) {
    if (ds.trajectories.empty()) throw InputError("train_mlp: empty dataset");
    if (stack_t < 1) throw InputError("train_mlp: stack_t must be >= 1");
    if (epochs < 1) throw InputError("train_mlp: epochs must be >= 1");

    MlpPolicy policy;
    policy.stack_t = stack_t;
    policy.obs_dim = ds.obs_dim;
    policy.act_dim = ds.act_dim;
    policy.widths = widths;

    Rng init_rng(mix_seed(seed, 0));
    int fan_in = stack_t * ds.obs_dim;
    for (int w : widths) {
        policy.weights.push_back(Tensor::randn({fan_in, w}, init_rng, 0.02, true));
        policy.biases.push_back(Tensor::zeros({w}, true));
        fan_in = w;
    }
    policy.weights.push_back(Tensor::randn({fan_in, ds.act_dim}, init_rng, 0.02, true));
    policy.biases.push_back(Tensor::zeros({ds.act_dim}, true));

    std::vector<double> inputs, targets;
    build_frame_stacks(ds, stack_t, inputs, targets);
    const std::size_t in_width = static_cast<std::size_t>(stack_t) * ds.obs_dim;
    const std::size_t n_pairs = targets.size() / static_cast<std::size_t>(ds.act_dim);
    const int bsz = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n_pairs);

    AdamState adam(mlp_parameters(policy), optim);
    Rng batch_rng(mix_seed(seed, 1));
    const std::size_t steps_per_epoch = (n_pairs + static_cast<std::size_t>(bsz) - 1) / static_cast<std::size_t>(bsz);

    std::vector<double> in_buf(static_cast<std::size_t>(bsz) * in_width);
    std::vector<double> tgt_buf(static_cast<std::size_t>(bsz) * ds.act_dim);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        double mse_sum = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            for (int b = 0; b < bsz; ++b) {
                const std::size_t pick = batch_rng.uniform_int(n_pairs);
                std::copy_n(inputs.data() + pick * in_width, in_width,
                            in_buf.data() + static_cast<std::size_t>(b) * in_width);
                std::copy_n(targets.data() + pick * ds.act_dim, static_cast<std::size_t>(ds.act_dim),
                            tgt_buf.data() + static_cast<std::size_t>(b) * ds.act_dim);
            }
            tape().clear();
            adam.zero_grad();
            Tensor x = Tensor::from_data({bsz, static_cast<int>(in_width)}, in_buf);
            Tensor y = Tensor::from_data({bsz, ds.act_dim}, tgt_buf);
            Tensor err = sub(mlp_forward(policy, x), y);
            // mean over pairs of the squared L2 error
            Tensor loss = scale(sum(mul(err, err)), 1.0 / static_cast<double>(bsz));
            backward(loss);
            adam.step();
            mse_sum += loss.item();
        }
        if (report != nullptr) report->epoch_mse.push_back(mse_sum / static_cast<double>(steps_per_epoch));
    }
    tape().clear();
    return policy;
}

std::vector<double> mlp_predict(const MlpPolicy& policy, std::span<const double> stacked_obs) {
    const std::size_t in_width = static_cast<std::size_t>(policy.stack_t) * policy.obs_dim;
    if (stacked_obs.size() != in_width) {
        throw InputError("mlp_predict: expected " + std::to_string(in_width) + " inputs, got " +
                         std::to_string(stacked_obs.size()));
    }
    NoGradGuard ng;
    Tensor x = Tensor::from_data({1, static_cast<int>(in_width)},
                                 std::vector<double>(stacked_obs.begin(), stacked_obs.end()));
    Tensor y = mlp_forward(policy, x);
    return {y.data().begin(), y.data().end()};
}

MemorizedPolicy memorize_dataset(const TrajectoryDataset& ds, int kN, bool lwr) {
    if (ds.trajectories.empty()) throw InputError("memorize_dataset: empty dataset");
    if (kN < 1) throw InputError("memorize_dataset: kN must be >= 1");
    MemorizedPolicy p;
    p.obs_dim = ds.obs_dim;
    p.act_dim = ds.act_dim;
    p.kN = kN;
    p.lwr = lwr;
    for (const Trajectory& t : ds.trajectories) {
        p.obs.insert(p.obs.end(), t.obs.begin(), t.obs.end());
        p.act.insert(p.act.end(), t.act.begin(), t.act.end());
    }
    return p;
}

namespace {

double obs_dist2(const MemorizedPolicy& p, std::size_t i, std::span<const double> o) {
    const double* stored = p.obs.data() + i * static_cast<std::size_t>(p.obs_dim);
    double acc = 0.0;
    for (int c = 0; c < p.obs_dim; ++c) {
        const double d = stored[c] - o[static_cast<std::size_t>(c)];
        acc += d * d;
    }
    return acc;
}

}  // namespace

std::vector<double> nn_predict(const MemorizedPolicy& policy, std::span<const double> o) {
    if (policy.size() == 0) throw InputError("nn_predict: empty policy");
    if (o.size() != static_cast<std::size_t>(policy.obs_dim)) {
        throw InputError("nn_predict: observation dimension mismatch");
    }
    std::size_t best = 0;
    double best_d = obs_dist2(policy, 0, o);
    for (std::size_t i = 1; i < policy.size(); ++i) {
        const double d = obs_dist2(policy, i, o);
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    const double* act = policy.act.data() + best * static_cast<std::size_t>(policy.act_dim);
    return {act, act + policy.act_dim};
}

std::vector<double> lwr_predict(const MemorizedPolicy& policy, std::span<const double> o) {
    const std::size_t n = policy.size();
    if (n < static_cast<std::size_t>(policy.kN)) {
        throw InputError("lwr_predict: need at least kN=" + std::to_string(policy.kN) +
                         " stored pairs, have " + std::to_string(n));
    }
    if (o.size() != static_cast<std::size_t>(policy.obs_dim)) {
        throw InputError("lwr_predict: observation dimension mismatch");
    }
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {obs_dist2(policy, i, o), i};
    std::partial_sort(dist.begin(), dist.begin() + policy.kN, dist.end());

    std::vector<double> out(static_cast<std::size_t>(policy.act_dim), 0.0);
    double total = 0.0;
    for (int j = 0; j < policy.kN; ++j) {
        const double w = std::exp(-std::sqrt(dist[static_cast<std::size_t>(j)].first));
        const double* act =
            policy.act.data() + dist[static_cast<std::size_t>(j)].second * static_cast<std::size_t>(policy.act_dim);
        for (int c = 0; c < policy.act_dim; ++c) out[static_cast<std::size_t>(c)] += w * act[c];
        total += w;
    }
    for (double& v : out) v /= total;
    return out;
}

Policy mlp_rollout_policy(const MlpPolicy& policy) {
    if (policy.obs_dim != 2 || policy.act_dim != 2) {
        throw InputError("mlp_rollout_policy: point-mass policies are 2-dimensional");
    }
    const auto p = std::make_shared<MlpPolicy>(policy);
    return [p](std::span<const Vec2> history, std::uint64_t) -> Vec2 {
        std::vector<double> stacked(static_cast<std::size_t>(p->stack_t) * 2, 0.0);
        const int have = static_cast<int>(history.size());
        for (int f = 0; f < p->stack_t; ++f) {
            const int src = have - p->stack_t + f;  // oldest first, zero-pad at the front
            if (src < 0) continue;
            stacked[static_cast<std::size_t>(f) * 2] = history[static_cast<std::size_t>(src)].x;
            stacked[static_cast<std::size_t>(f) * 2 + 1] = history[static_cast<std::size_t>(src)].y;
        }
        const auto a = mlp_predict(*p, stacked);
        return {a[0], a[1]};
    };
}

Policy memorized_rollout_policy(const MemorizedPolicy& policy) {
    if (policy.obs_dim != 2 || policy.act_dim != 2) {
        throw InputError("memorized_rollout_policy: point-mass policies are 2-dimensional");
    }
    const auto p = std::make_shared<MemorizedPolicy>(policy);
    return [p](std::span<const Vec2> history, std::uint64_t) -> Vec2 {
        const double o[2] = {history.back().x, history.back().y};
        const auto a = p->lwr ? lwr_predict(*p, o) : nn_predict(*p, o);
        return {a[0], a[1]};
    };
}

}  // namespace bet
