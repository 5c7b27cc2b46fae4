#include "support.hpp"

#include <rlld/trainer.hpp>

#include <doctest.h>

#include <cmath>

using namespace rlld;

namespace {

const Dataset& small_dataset() {
    static const Dataset ds = [] {
        SyntheticConfig cfg;
        cfg.num_videos = 200;
        cfg.segments = 5;
        cfg.num_classes = 3;
        cfg.audio_dim = 4;
        cfg.visual_dim = 4;
        return generate_synthetic_dataset(cfg);
    }();
    return ds;
}

TrainConfig small_train(std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.episode_length = 4;
    cfg.episodes_per_epoch = 1;
    cfg.max_epochs = 2;
    cfg.seed = seed;
    cfg.task_hidden = 8;
    return cfg;
}

bool same(const RewardBundle& a, const RewardBundle& b) {
    return a.r1 == b.r1 && a.r2 == b.r2 && a.r_inter == b.r_inter && a.r_terminal == b.r_terminal &&
           a.total == b.total;
}

bool same(const StepTrace& a, const StepTrace& b) {
    return a.episode == b.episode && a.step == b.step && same(a.audio, b.audio) && same(a.visual, b.visual) &&
           a.degenerate_count == b.degenerate_count && a.loss.video == b.loss.video &&
           a.loss.modality == b.loss.modality && a.segment.type == b.segment.type && a.event.type == b.event.type &&
           a.denoiser_update_norm == b.denoiser_update_norm && a.task_update_norm == b.task_update_norm;
}

}  // namespace

TEST_CASE("REINFORCE estimate is linear in the rewards") {
    Rng rng(1);
    std::vector<std::vector<Matrix>> grads;
    for (int i = 0; i < 5; ++i) grads.push_back({testing::random_matrix(rng, 2, 3), testing::random_matrix(rng, 1, 1)});
    const std::vector<double> zero(5, 0.0);
    for (const Matrix& g : reinforce_gradient_estimate(grads, zero)) CHECK(g.isZero());
    const std::vector<double> r{0.5, -1.0, 2.0, 0.0, 0.25};
    std::vector<double> r2;
    for (double x : r) r2.push_back(2.0 * x);
    const auto g1 = reinforce_gradient_estimate(grads, r);
    const auto g2 = reinforce_gradient_estimate(grads, r2);
    for (std::size_t k = 0; k < g1.size(); ++k) CHECK(g2[k] == 2.0 * g1[k]);
    Matrix manual = Matrix::Zero(2, 3);
    for (int i = 0; i < 5; ++i) manual += r[static_cast<std::size_t>(i)] * grads[static_cast<std::size_t>(i)][0] / 5.0;
    CHECK((g1[0] - manual).norm() < 1e-12);
    CHECK_THROWS_AS(reinforce_gradient_estimate({}, {}), Error);
    CHECK_THROWS_AS(reinforce_gradient_estimate(grads, {1.0}), Error);
}

TEST_CASE("REINFORCE on a Bernoulli toy recovers p(1 - p)") {
    // d/dz E[R] with R(a) = a and a ~ Bernoulli(sigmoid(z)); score of a is (a - p).
    for (double p : {0.2, 0.5, 0.8}) {
        Rng rng(static_cast<std::uint64_t>(p * 100));
        std::bernoulli_distribution draw(p);
        const int n = 20000;
        std::vector<std::vector<Matrix>> scores;
        std::vector<double> rewards;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const int a = draw(rng) ? 1 : 0;
            const double s = a - p;
            scores.push_back({Matrix::Constant(1, 1, s)});
            rewards.push_back(a);
            sum += a * s;
            sum_sq += a * s * a * s;
        }
        const double est = reinforce_gradient_estimate(scores, rewards)[0](0, 0);
        const double se = std::sqrt((sum_sq / n - (sum / n) * (sum / n)) / n);
        CHECK(std::abs(est - p * (1.0 - p)) <= 3.0 * se);
    }
}

TEST_CASE("trainer construction validates the config and the splits") {
    TrainConfig bad = small_train();
    bad.batch_size = 3;
    CHECK_THROWS_AS(Trainer(small_dataset(), bad), Error);
    bad = small_train();
    bad.denoiser_lr = 0.0;
    CHECK_THROWS_AS(Trainer(small_dataset(), bad), Error);
    Dataset no_val = small_dataset();
    no_val.validation.clear();
    CHECK_THROWS_AS(Trainer(no_val, small_train()), Error);

    TrainConfig cfg = small_train();
    cfg.validation_fraction = 0.25;
    const Trainer t(small_dataset(), cfg);
    CHECK(t.validation_subset().size() ==
          static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(small_dataset().validation.size()))));
}

TEST_CASE("forced all-zero actions restore the labels and cost minus one") {
    const TrainConfig cfg = small_train();
    Trainer forced(small_dataset(), cfg);
    forced.force_zero_actions(true);
    TrainConfig reference_cfg = cfg;
    reference_cfg.label_source = LabelSource::noisy_modality;
    Trainer reference(small_dataset(), reference_cfg);

    Rng rng(4);
    const EpisodeBatch batch = sample_episode_batch(small_dataset().train.size(), 16, nullptr, rng);
    const TaskParams before = forced.task();
    const StepTrace t = forced.train_step(batch, 1, 1);
    reference.train_step(batch, 1, 1);
    CHECK(t.degenerate_count == 16);
    CHECK(t.audio.total == -1.0);
    CHECK(t.visual.total == -1.0);
    // The task step still happens, on the original labels.
    CHECK(*forced.task().tensors().front() != *before.tensors().front());
    const auto got = forced.task().tensors();
    const auto want = reference.task().tensors();
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(*got[k] == *want[k]);
}

TEST_CASE("without the inter-reward the total is the terminal reward") {
    TrainConfig cfg = small_train();
    cfg.ablation = Ablation::no_inter_reward;
    Trainer t(small_dataset(), cfg);
    Rng rng(2);
    const EpisodeBatch batch = sample_episode_batch(small_dataset().train.size(), 16, nullptr, rng);
    const StepTrace s = t.train_step(batch, 1, 1);
    CHECK(s.audio.r_inter == 0.0);
    CHECK(s.visual.r_inter == 0.0);
    const double n = 16.0;
    const double degenerate_share = s.degenerate_count / n;
    CHECK(s.audio.total == doctest::Approx((1.0 - degenerate_share) * s.audio.r_terminal - degenerate_share));
    CHECK(s.visual.total == doctest::Approx((1.0 - degenerate_share) * s.visual.r_terminal - degenerate_share));
}

TEST_CASE("the label-free ablation zeroes the label block of the states") {
    TrainConfig cfg = small_train();
    cfg.ablation = Ablation::no_initialized_labels;
    CHECK_FALSE(denoiser_config_for(small_dataset(), cfg).use_labels);
    CHECK(denoiser_config_for(small_dataset(), small_train()).use_labels);
}

TEST_CASE("training is deterministic under a seed") {
    Trainer a(small_dataset(), small_train(7));
    Trainer b(small_dataset(), small_train(7));
    const FitResult ra = a.fit();
    const FitResult rb = b.fit();
    REQUIRE(ra.traces.size() == rb.traces.size());
    for (std::size_t i = 0; i < ra.traces.size(); ++i) CHECK(same(ra.traces[i], rb.traces[i]));

    Trainer c(small_dataset(), small_train(8));
    const FitResult rc = c.fit();
    CHECK_FALSE(same(ra.traces.back(), rc.traces.back()));
}

TEST_CASE("zero epochs return the initial parameters") {
    TrainConfig cfg = small_train();
    cfg.max_epochs = 0;
    Trainer t(small_dataset(), cfg);
    const DenoiserParams init = t.denoiser();
    const FitResult r = t.fit();
    CHECK(r.traces.empty());
    CHECK(r.epochs.empty());
    CHECK(*r.denoiser.tensors().front() == *init.tensors().front());
}

TEST_CASE("fit keeps parameters finite and tracks the best epoch") {
    TrainConfig cfg = small_train(3);
    cfg.max_epochs = 4;
    Trainer t(small_dataset(), cfg);
    int calls = 0;
    const FitResult r = t.fit([&](const StepTrace&) { ++calls; });
    CHECK(calls == 16);
    CHECK(r.traces.size() == 16);
    CHECK(r.traces.back().episode == 4);
    CHECK(r.traces.back().step == 4);
    CHECK(all_finite(r.denoiser.tensors()));
    CHECK(all_finite(r.task.tensors()));
    REQUIRE(!r.epochs.empty());
    CHECK(r.best_score >= r.epochs.back().validation.segment.type);
    const EvaluationReport best = evaluate_task(r.best_task, small_dataset().validation, cfg.threshold);
    CHECK(best.segment.type == r.best_score);
}

TEST_CASE("patience stops training once validation stalls") {
    TrainConfig cfg = small_train(5);
    cfg.max_epochs = 50;
    cfg.patience = 1;
    cfg.min_improvement = 1.0;  // nothing improves by a whole F-score point
    Trainer t(small_dataset(), cfg);
    const FitResult r = t.fit();
    CHECK(r.converged);
    CHECK(r.epochs.size() == 2);
}

TEST_CASE("noise identification counts flagged noisy labels") {
    const Dataset& ds = small_dataset();
    DenoiserParams keep = init_denoiser(denoiser_config_for(ds, small_train()), 1);
    for (Matrix* m : keep.tensors()) m->setZero();
    keep.bias_audio.setConstant(20.0);
    keep.bias_visual.setConstant(20.0);
    const F1Counts none = noise_identification(keep, ds.test, RemovalRule::greedy_policy, true);
    CHECK(none.tp == 0);
    CHECK(none.fp == 0);

    DenoiserParams drop = keep;
    drop.bias_audio.setConstant(-20.0);
    drop.bias_visual.setConstant(-20.0);
    const F1Counts all = noise_identification(drop, ds.test, RemovalRule::greedy_policy, true);
    CHECK(all.fn == 0);
    CHECK(all.tp == none.fn);

    Rng rng(3);
    const F1Counts random = noise_identification(keep, ds.test, RemovalRule::random_half, true, &rng);
    CHECK(random.tp + random.fn == none.fn);
    CHECK_THROWS_AS(noise_identification(keep, ds.test, RemovalRule::random_half, true), Error);
    CHECK_THROWS_AS(noise_identification(keep, ds.train, RemovalRule::greedy_policy, true), Error);
}

TEST_CASE("names of ablations and label sources round-trip") {
    for (Ablation a : {Ablation::none, Ablation::no_inter_reward, Ablation::no_initialized_labels}) {
        CHECK(parse_ablation(to_string(a)) == a);
    }
    for (LabelSource s : {LabelSource::denoised, LabelSource::weak, LabelSource::noisy_modality, LabelSource::random_mask}) {
        CHECK(parse_label_source(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_ablation("bogus"), Error);
}
