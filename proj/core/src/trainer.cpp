#include "bet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "bet/errors.hpp"

namespace bet {

TrainResult train(const TrajectoryDataset& ds, TrainConfig cfg, const EpochCallback& on_epoch) {
    if (ds.trajectories.empty()) throw ConfigError("train: empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("train: epochs and batch_size must be >= 1");
    if (cfg.gpt.obs_dim == 0) cfg.gpt.obs_dim = ds.obs_dim;
    if (cfg.gpt.act_dim == 0) cfg.gpt.act_dim = ds.act_dim;
    if (cfg.gpt.obs_dim != ds.obs_dim || cfg.gpt.act_dim != ds.act_dim) {
        throw ConfigError("train: config dims (" + std::to_string(cfg.gpt.obs_dim) + "," +
                          std::to_string(cfg.gpt.act_dim) + ") do not match dataset (" +
                          std::to_string(ds.obs_dim) + "," + std::to_string(ds.act_dim) + ")");
    }

    // resolve ablations into the stored model config
    cfg.gpt.k = cfg.effective_k();
    cfg.gpt.context_len = cfg.effective_h();
    cfg.ablations.k_override = 0;
    cfg.ablations.history_override = 0;
    const int h = cfg.gpt.context_len;
    const int k = cfg.gpt.k;
    const int act_dim = cfg.gpt.act_dim;

    const std::size_t total_windows = count_windows(ds, h);
    if (total_windows == 0) {
        throw ConfigError("train: no trajectory long enough for context " + std::to_string(h));
    }

    // codebook over every action in the dataset, frozen from here on
    std::vector<double> all_actions;
    all_actions.reserve(ds.total_steps() * static_cast<std::size_t>(act_dim));
    for (const Trajectory& t : ds.trajectories) {
        all_actions.insert(all_actions.end(), t.act.begin(), t.act.end());
    }
    ActionCodebook codebook = kmeans_fit(all_actions, static_cast<int>(ds.total_steps()), act_dim,
                                         k, cfg.seed);

    BetModel model = gpt_init(cfg.gpt, cfg.seed);
    AdamState adam(gpt_parameters(model), cfg.optim);

    const std::size_t steps_per_epoch =
        cfg.steps_per_epoch > 0 ? static_cast<std::size_t>(cfg.steps_per_epoch) : total_windows;
    const int bsz = cfg.batch_size;

    Rng sample_rng(mix_seed(cfg.seed, 1));
    TrainReport report;
    report.codebook_inertia = codebook.inertia;
    report.total_windows = total_windows;

    double alpha = 1.0;
    bool alpha_set = false;
    std::uint64_t step_index = 0;

    std::vector<int> target_bins;
    std::vector<double> target_residuals;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double focal_sum = 0.0, mt_sum = 0.0, total_sum = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step_index) {
            WindowBatch batch = sample_windows(ds, h, bsz, sample_rng);
            const std::size_t positions = static_cast<std::size_t>(bsz) * h;

            target_bins.resize(positions);
            target_residuals.assign(positions * static_cast<std::size_t>(act_dim), 0.0);
            for (std::size_t pos = 0; pos < positions; ++pos) {
                std::span<const double> a{batch.act.data() + pos * act_dim,
                                          static_cast<std::size_t>(act_dim)};
                auto [bin, residual] = kmeans_encode(codebook, a);
                target_bins[pos] = bin;
                std::copy(residual.begin(), residual.end(),
                          target_residuals.begin() + pos * act_dim);
            }

            tape().clear();
            adam.zero_grad();
            Tensor obs = Tensor::from_data({static_cast<int>(positions), cfg.gpt.obs_dim}, batch.obs);
            GptOutput out = gpt_forward(model, obs, bsz, h, /*train_mode=*/true,
                                        mix_seed(cfg.seed, 0x100000 + step_index));

            Tensor residuals = Tensor::from_data({static_cast<int>(positions), act_dim},
                                                 target_residuals);
            Tensor focal = focal_loss(out.logits, target_bins, cfg.gamma);
            Tensor mt;
            Tensor total;
            double mt_value = 0.0;
            if (cfg.ablations.offsets_enabled) {
                mt = mt_loss(out.offsets, target_bins, residuals);
                mt_value = mt.item();
            }
            const double focal_value = focal.item();
            if (!alpha_set) {
                // first-batch magnitude matching on detached values
                alpha = focal_value > 0.0 ? calibrate_alpha(focal_value, mt_value) : 1.0;
                alpha_set = true;
                report.alpha = alpha;
            }
            if (cfg.ablations.offsets_enabled) {
                total = add(focal, scale(mt, alpha));
            } else {
                total = focal;
            }
            backward(total);
            adam.step();

            focal_sum += focal_value;
            mt_sum += mt_value;
            total_sum += focal_value + alpha * mt_value;
        }
        const double d = static_cast<double>(steps_per_epoch);
        report.epoch_focal.push_back(focal_sum / d);
        report.epoch_mt.push_back(mt_sum / d);
        report.epoch_total.push_back(total_sum / d);
        if (on_epoch) {
            on_epoch(epoch + 1, report.epoch_focal.back(), report.epoch_mt.back(),
                     report.epoch_total.back());
        }
    }
    tape().clear();

    TrainResult result;
    result.checkpoint = BetCheckpoint{cfg, std::move(codebook), std::move(model), alpha,
                                      adam.step_count()};
    result.report = std::move(report);
    return result;
}

std::vector<double> sample_action(const BetModel& model, const ActionCodebook& codebook,
                                  std::span<const double> obs_history, int seq_len,
                                  std::uint64_t rng_seed, double temperature,
                                  bool offsets_enabled) {
    if (seq_len < 1 || obs_history.empty()) throw InputError("sample_action: empty history");
    NoGradGuard ng;
    GptOutput out = gpt_forward_seq(model, obs_history, seq_len, /*train_mode=*/false, 0);
    const int k = model.config.k;
    const int act_dim = model.config.act_dim;
    const double* logits = out.logits.data().data() + static_cast<std::size_t>(seq_len - 1) * k;

    int bin = 0;
    if (temperature <= 0.0) {
        for (int j = 1; j < k; ++j) {
            if (logits[j] > logits[bin]) bin = j;  // strict: ties keep the lowest index
        }
    } else {
        double mx = logits[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits[j]);
        std::vector<double> p(static_cast<std::size_t>(k));
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
            p[static_cast<std::size_t>(j)] = std::exp((logits[j] - mx) / temperature);
            total += p[static_cast<std::size_t>(j)];
        }
        Rng rng(rng_seed);
        double r = rng.uniform() * total;
        bin = k - 1;
        for (int j = 0; j < k; ++j) {
            r -= p[static_cast<std::size_t>(j)];
            if (r <= 0.0) {
                bin = j;
                break;
            }
        }
    }

    if (!offsets_enabled) {
        std::vector<double> zero(static_cast<std::size_t>(act_dim), 0.0);
        return kmeans_decode(codebook, bin, zero);
    }
    const double* offset_row = out.offsets.data().data() +
                               static_cast<std::size_t>(seq_len - 1) * k * act_dim +
                               static_cast<std::size_t>(bin) * act_dim;
    return kmeans_decode(codebook, bin, {offset_row, static_cast<std::size_t>(act_dim)});
}

Policy bet_rollout_policy(const BetCheckpoint& ckpt, double temperature) {
    if (ckpt.cfg.gpt.obs_dim != 2 || ckpt.cfg.gpt.act_dim != 2) {
        throw InputError("bet_rollout_policy: point-mass rollouts need 2-d observation/action");
    }
    const auto shared = std::make_shared<BetCheckpoint>(ckpt);
    return [shared, temperature](std::span<const Vec2> history, std::uint64_t step_seed) -> Vec2 {
        const int h = shared->cfg.gpt.context_len;
        const int use = static_cast<int>(std::min<std::size_t>(history.size(), static_cast<std::size_t>(h)));
        std::vector<double> flat(static_cast<std::size_t>(use) * 2);
        for (int i = 0; i < use; ++i) {
            const Vec2& s = history[history.size() - static_cast<std::size_t>(use - i)];
            flat[static_cast<std::size_t>(i) * 2] = s.x;
            flat[static_cast<std::size_t>(i) * 2 + 1] = s.y;
        }
        const auto a = sample_action(shared->model, shared->codebook, flat, use, step_seed,
                                     temperature, shared->cfg.ablations.offsets_enabled);
        return {a[0], a[1]};
    };
}

RolloutRecord rollout(const BetCheckpoint& ckpt, const EnvSpec& spec, std::uint64_t seed,
                      double temperature) {
    return run_rollout(bet_rollout_policy(ckpt, temperature), spec, seed);
}

EvalMetrics evaluate(const BetCheckpoint& ckpt, const EnvSpec& spec, int n_rollouts,
                     std::uint64_t seed, const TrajectoryDataset& demos, double temperature,
                     std::vector<RolloutRecord>* records_out) {
    Policy policy = bet_rollout_policy(ckpt, temperature);
    return evaluate_policy([&policy](int) { return policy; }, spec, n_rollouts, seed, demos,
                           records_out);
}

}  // namespace bet
