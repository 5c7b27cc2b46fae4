#include <rlld/data.hpp>
#include <rlld/denoiser.hpp>
#include <rlld/metrics.hpp>
#include <rlld/task.hpp>
#include <rlld/trainer.hpp>

#include <benchmark/benchmark.h>

namespace {

const rlld::Dataset& dataset() {
    static const rlld::Dataset ds = [] {
        rlld::SyntheticConfig cfg;
        cfg.num_videos = 400;
        return rlld::generate_synthetic_dataset(cfg);
    }();
    return ds;
}

void BM_HybridAttention(benchmark::State& state) {
    rlld::Rng rng(1);
    std::normal_distribution<double> n;
    const auto t = state.range(0);
    rlld::Matrix a = rlld::Matrix::NullaryExpr(t, 32, [&] { return n(rng); });
    rlld::Matrix v = rlld::Matrix::NullaryExpr(t, 32, [&] { return n(rng); });
    for (auto _ : state) benchmark::DoNotOptimize(rlld::hybrid_attend(a, v));
}
BENCHMARK(BM_HybridAttention)->Arg(10)->Arg(30);

void BM_TaskForwardBackward(benchmark::State& state) {
    rlld::TrainConfig tc;
    const auto params = rlld::init_task(rlld::task_config_for(dataset(), tc), 3);
    auto grad = params.zeros_like();
    const auto& s = dataset().train.front();
    const rlld::TaskTargets targets{s.noisy_audio_label, s.noisy_visual_label};
    for (auto _ : state) {
        const auto fwd = rlld::task_forward(params, s);
        benchmark::DoNotOptimize(rlld::accumulate_task_gradient(params, s, fwd, targets, 1.0, grad));
    }
}
BENCHMARK(BM_TaskForwardBackward);

void BM_DenoiserForwardBackward(benchmark::State& state) {
    rlld::TrainConfig tc;
    const auto params = rlld::init_denoiser(rlld::denoiser_config_for(dataset(), tc), 3);
    auto grad = params.zeros_like();
    const auto& s = dataset().train.front();
    rlld::Rng rng(5);
    for (auto _ : state) {
        const auto st = rlld::build_states(s);
        const auto fwd = rlld::denoiser_forward(params, st);
        const auto mask = rlld::sample_actions(fwd.policy, rng);
        rlld::accumulate_log_prob_gradient(params, st, fwd, mask, 1.0, 1.0, grad);
    }
}
BENCHMARK(BM_DenoiserForwardBackward);

void BM_EvaluateValidation(benchmark::State& state) {
    rlld::TrainConfig tc;
    const auto params = rlld::init_task(rlld::task_config_for(dataset(), tc), 3);
    const auto preds = rlld::predict_split(params, dataset().validation, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(rlld::evaluate(preds, dataset().validation));
}
BENCHMARK(BM_EvaluateValidation);

void BM_PredictValidation(benchmark::State& state) {
    rlld::TrainConfig tc;
    const auto params = rlld::init_task(rlld::task_config_for(dataset(), tc), 3);
    for (auto _ : state) benchmark::DoNotOptimize(rlld::predict_split(params, dataset().validation, 0.5));
}
BENCHMARK(BM_PredictValidation);

void BM_TrainStep(benchmark::State& state) {
    rlld::TrainConfig tc;
    tc.batch_size = 128;
    rlld::Trainer trainer(dataset(), tc);
    rlld::Rng rng(9);
    const auto batch = rlld::sample_episode_batch(dataset().train.size(), tc.batch_size, nullptr, rng);
    int step = 0;
    for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, 1, ++step));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
