#include <benchmark/benchmark.h>

#include "bet/envs.hpp"
#include "bet/gpt.hpp"
#include "bet/kmeans.hpp"
#include "bet/losses.hpp"
#include "bet/optim.hpp"
#include "bet/trainer.hpp"

namespace {

bet::GptConfig pointmass_config() {
    bet::GptConfig cfg;
    cfg.obs_dim = 2;
    cfg.act_dim = 2;
    return cfg;
}

void BM_ForwardEval(benchmark::State& state) {
    const bet::BetModel model = bet::gpt_init(pointmass_config(), 0);
    const std::vector<double> obs = {1, 2, 2, 2};
    bet::NoGradGuard ng;
    for (auto _ : state) {
        auto out = bet::gpt_forward_seq(model, obs, 2, false, 0);
        benchmark::DoNotOptimize(out.logits.data().data());
    }
}
BENCHMARK(BM_ForwardEval);

void BM_TrainStep(benchmark::State& state) {
    const bet::TrajectoryDataset ds = bet::gen_demos_env1(200, 0);
    bet::BetModel model = bet::gpt_init(pointmass_config(), 0);
    bet::AdamState adam(bet::gpt_parameters(model), {});
    std::vector<double> actions;
    for (const auto& t : ds.trajectories) actions.insert(actions.end(), t.act.begin(), t.act.end());
    const bet::ActionCodebook cb =
        bet::kmeans_fit(actions, static_cast<int>(ds.total_steps()), 2, 2, 0);
    bet::Rng rng(1);
    const int batch = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const bet::WindowBatch wb = bet::sample_windows(ds, 2, batch, rng);
        std::vector<int> bins(static_cast<std::size_t>(batch) * 2);
        std::vector<double> residuals(bins.size() * 2);
        for (std::size_t pos = 0; pos < bins.size(); ++pos) {
            auto [bin, res] = bet::kmeans_encode(cb, {wb.act.data() + pos * 2, 2});
            bins[pos] = bin;
            residuals[pos * 2] = res[0];
            residuals[pos * 2 + 1] = res[1];
        }
        bet::tape().clear();
        adam.zero_grad();
        bet::Tensor obs = bet::Tensor::from_data({batch * 2, 2}, wb.obs);
        auto out = bet::gpt_forward(model, obs, batch, 2, true, 7);
        auto lb = bet::combined_loss(out.logits, out.offsets, bins,
                                     bet::Tensor::from_data({batch * 2, 2}, residuals), 2.0, 1.0);
        bet::backward(lb.total);
        adam.step();
    }
    bet::tape().clear();
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64);

void BM_KmeansFit(benchmark::State& state) {
    const bet::TrajectoryDataset ds = bet::gen_demos_env1(200, 0);
    std::vector<double> actions;
    for (const auto& t : ds.trajectories) actions.insert(actions.end(), t.act.begin(), t.act.end());
    for (auto _ : state) {
        auto cb = bet::kmeans_fit(actions, static_cast<int>(ds.total_steps()), 2,
                                  static_cast<int>(state.range(0)), 0);
        benchmark::DoNotOptimize(cb.inertia);
    }
}
BENCHMARK(BM_KmeansFit)->Arg(2)->Arg(8);

void BM_Rollout(benchmark::State& state) {
    const bet::TrajectoryDataset ds = bet::gen_demos_env1(20, 0);
    bet::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 5;
    cfg.batch_size = 16;
    const bet::TrainResult r = bet::train(ds, cfg);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto rec = bet::rollout(r.checkpoint, bet::EnvSpec::multipath1(), seed++);
        benchmark::DoNotOptimize(rec.states.data());
    }
}
BENCHMARK(BM_Rollout);

}  // namespace

BENCHMARK_MAIN();
