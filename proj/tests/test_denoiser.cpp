#include "support.hpp"

#include <rlld/denoiser.hpp>

#include <doctest.h>

#include <cmath>

using namespace rlld;

namespace {

DenoiserConfig small_config(long c, long d, bool project = false) {
    DenoiserConfig cfg;
    cfg.num_classes = static_cast<int>(c);
    cfg.audio_dim = static_cast<int>(d);
    cfg.visual_dim = static_cast<int>(d);
    cfg.project = project;
    cfg.hidden_dim = 3;
    return cfg;
}

ActionMask mask_from_bits(unsigned bits, long c) {
    ActionMask m{LabelVector(c), LabelVector(c)};
    for (long j = 0; j < c; ++j) {
        m.audio(j) = (bits >> j) & 1u;
        m.visual(j) = (bits >> (c + j)) & 1u;
    }
    return m;
}

}  // namespace

TEST_CASE("states tile the noisy label onto every feature row") {
    Rng rng(1);
    const VideoSample s = testing::random_sample(rng, "x", 4, 3, 2, 2);
    const DenoiserState st = build_states(s);
    REQUIRE(st.audio.rows() == 4);
    REQUIRE(st.audio.cols() == 5);
    for (long t = 0; t < 4; ++t) {
        CHECK(st.audio.row(t).head(2) == s.audio.values.row(t));
        CHECK(st.audio.row(t).tail(3) == s.noisy_audio_label.cast<double>().transpose());
        CHECK(st.visual.row(t).tail(3) == s.noisy_visual_label.cast<double>().transpose());
    }
    const DenoiserState blind = build_states(s, false);
    CHECK(blind.audio.rightCols(3).isZero());
    CHECK(blind.visual.rightCols(3).isZero());
}

TEST_CASE("policy probabilities are clamped and the config is validated") {
    Rng rng(2);
    const VideoSample s = testing::random_sample(rng, "x", 3, 2, 2, 2);
    DenoiserParams p = init_denoiser(small_config(2, 2), 5);
    p.bias_audio.setConstant(100.0);
    p.bias_visual.setConstant(-100.0);
    const PolicyOutput out = denoiser_forward(p, build_states(s)).policy;
    CHECK((out.audio.array() == 1.0 - kProbClamp).all());
    CHECK((out.visual.array() == kProbClamp).all());

    DenoiserConfig bad = small_config(2, 2);
    bad.visual_dim = 3;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.project = true;
    CHECK_NOTHROW(bad.validate());
}

TEST_CASE("initialization is a pure function of the seed") {
    const auto a = init_denoiser(small_config(3, 4, true), 42);
    const auto b = init_denoiser(small_config(3, 4, true), 42);
    const auto c = init_denoiser(small_config(3, 4, true), 43);
    const auto ta = a.tensors(), tb = b.tensors(), tc = c.tensors();
    for (std::size_t k = 0; k < ta.size(); ++k) CHECK(*ta[k] == *tb[k]);
    CHECK(*ta.front() != *tc.front());
}

TEST_CASE("label revision and the degenerate case") {
    const LabelVector ya = (LabelVector(3) << 1, 0, 1).finished();
    const LabelVector yv = (LabelVector(3) << 0, 1, 0).finished();
    ActionMask keep_some{(LabelVector(3) << 1, 1, 0).finished(), (LabelVector(3) << 0, 0, 0).finished()};
    const RevisedLabels r = revise_labels(ya, yv, keep_some);
    CHECK_FALSE(r.degenerate);
    CHECK(r.audio == (LabelVector(3) << 1, 0, 0).finished());
    CHECK(r.visual == LabelVector::Zero(3));

    const ActionMask none{LabelVector::Zero(3), LabelVector::Zero(3)};
    const RevisedLabels d = revise_labels(ya, yv, none);
    CHECK(d.degenerate);
    CHECK(d.audio == ya);
    CHECK(d.visual == yv);
}

TEST_CASE("action probabilities sum to one over every mask") {
    Rng rng(7);
    for (long c = 1; c <= 3; ++c) {
        const VideoSample s = testing::random_sample(rng, "x", 2, c, 2, 2);
        const PolicyOutput pi = denoiser_forward(init_denoiser(small_config(c, 2), 3), build_states(s)).policy;
        double total = 0.0;
        for (unsigned bits = 0; bits < (1u << (2 * c)); ++bits) total += std::exp(action_log_prob(pi, mask_from_bits(bits, c)));
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sampling follows the keep probabilities") {
    PolicyOutput pi{(Vector(2) << 0.2, 0.9).finished(), (Vector(2) << 0.5, 0.5).finished()};
    Rng rng(13);
    Vector freq = Vector::Zero(2);
    const int n = 20000;
    for (int i = 0; i < n; ++i) freq += sample_actions(pi, rng).audio.cast<double>();
    freq /= n;
    CHECK(freq(0) == doctest::Approx(0.2).epsilon(0.05));
    CHECK(freq(1) == doctest::Approx(0.9).epsilon(0.02));
    const ActionMask g = greedy_actions(pi);
    CHECK(g.audio == (LabelVector(2) << 0, 1).finished());
    CHECK(g.visual == (LabelVector(2) << 1, 1).finished());
}

TEST_CASE("log-probability gradients match finite differences") {
    Rng rng(31);
    for (int i = 0; i < 24; ++i) {
        const long c = 1 + i % 3, d = 1 + i % 4;
        DenoiserConfig cfg = small_config(c, d, i % 2 == 1);
        cfg.share_head = i % 4 == 3;
        DenoiserParams p = init_denoiser(cfg, static_cast<std::uint64_t>(i));
        const VideoSample s = testing::random_sample(rng, "x", 1 + i % 3, c, d, d);
        const DenoiserState st = build_states(s);
        const DenoiserForward fwd = denoiser_forward(p, st);
        const ActionMask m = sample_actions(fwd.policy, rng);
        const double wa = 0.7, wv = -1.3;
        DenoiserParams grad = p.zeros_like();
        accumulate_log_prob_gradient(p, st, fwd, m, wa, wv, grad);
        auto f = [&] {
            const PolicyOutput pi = denoiser_forward(p, st).policy;
            return wa * action_log_prob(pi.audio, m.audio) + wv * action_log_prob(pi.visual, m.visual);
        };
        CHECK(testing::max_gradient_error(p.tensors(), std::as_const(grad).tensors(), f) < 1e-4);
    }
}

TEST_CASE("state of a single segment is the concatenation") {
    VideoSample s;
    s.id = "one";
    s.audio = {(Matrix(1, 2) << 0.1, 0.2).finished(), Modality::audio};
    s.visual = {Matrix::Zero(1, 2), Modality::visual};
    s.noisy_audio_label = (LabelVector(2) << 1, 0).finished();
    s.noisy_visual_label = (LabelVector(2) << 0, 1).finished();
    s.weak_label = LabelVector::Ones(2);
    const DenoiserState st = build_states(s);
    CHECK(st.audio == (Matrix(1, 4) << 0.1, 0.2, 1.0, 0.0).finished());
    CHECK(st.visual == (Matrix(1, 4) << 0.0, 0.0, 0.0, 1.0).finished());
}

TEST_CASE("zero head gives even odds and a hand-computed head matches") {
    Rng rng(4);
    const VideoSample s = testing::random_sample(rng, "x", 1, 2, 2, 2);
    DenoiserParams p = init_denoiser(small_config(2, 2), 1);
    for (Matrix* m : p.tensors()) m->setZero();
    const PolicyOutput half = denoiser_forward(p, build_states(s)).policy;
    CHECK((half.audio.array() == 0.5).all());
    CHECK((half.visual.array() == 0.5).all());

    // T = 1: hidden audio row = s_a + s_a + s_v.
    p.head_audio.setConstant(0.1);
    p.head_audio(1, 0) = -0.2;
    p.bias_audio(0) = 0.05;
    const DenoiserState st = build_states(s);
    const Vector h = (2.0 * st.audio.row(0) + st.visual.row(0)).transpose();
    const PolicyOutput out = denoiser_forward(p, st).policy;
    for (long c = 0; c < 2; ++c) {
        const double z = p.head_audio.row(c).dot(h) + p.bias_audio(c);
        CHECK(out.audio(c) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-14));
    }
}

TEST_CASE("log-probability examples") {
    const PolicyOutput half{Vector::Constant(3, 0.5), Vector::Constant(3, 0.5)};
    Rng rng(8);
    for (unsigned bits : {0u, 5u, 63u}) {
        CHECK(action_log_prob(half, mask_from_bits(bits, 3)) == doctest::Approx(6.0 * std::log(0.5)).epsilon(1e-12));
    }
    const PolicyOutput sure{Vector::Constant(2, 1.0 - kProbClamp), Vector::Constant(2, 1.0 - kProbClamp)};
    CHECK(std::abs(action_log_prob(sure, mask_from_bits(15u, 2))) < 4 * 1.01e-6);

    const double lp = action_log_prob((Vector(2) << 0.8, 0.3).finished(), (LabelVector(2) << 1, 0).finished()) +
                      action_log_prob((Vector(1) << 0.5).finished(), (LabelVector(1) << 1).finished());
    CHECK(lp == doctest::Approx(-1.2730).epsilon(1e-4));
}

TEST_CASE("sampling is deterministic under a seed and saturates at the clamp") {
    const PolicyOutput pi{Vector::Constant(4, 0.5), Vector::Constant(4, 1.0 - kProbClamp)};
    Rng a(99), b(99);
    for (int i = 0; i < 20; ++i) {
        const ActionMask x = sample_actions(pi, a), y = sample_actions(pi, b);
        CHECK(x.audio == y.audio);
        CHECK(x.visual == y.visual);
    }
    const PolicyOutput one{Vector::Ones(3), Vector::Ones(3)};
    Rng r(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_actions(one, r).audio == LabelVector::Ones(3));

    // 10,000 fair draws per class stay within three binomial standard errors.
    Rng c(5);
    Vector mean = Vector::Zero(4);
    for (int i = 0; i < 10000; ++i) mean += sample_actions(pi, c).audio.cast<double>();
    mean /= 10000.0;
    CHECK(((mean.array() - 0.5).abs() <= 3.0 * std::sqrt(0.25 / 10000.0)).all());
}

TEST_CASE("revision never adds labels") {
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        const LabelVector ya = testing::random_labels(rng, 4), yv = testing::random_labels(rng, 4);
        const ActionMask m{testing::random_labels(rng, 4), testing::random_labels(rng, 4)};
        const RevisedLabels r = revise_labels(ya, yv, m);
        if (!r.degenerate) {
            CHECK((r.audio.array() <= ya.array()).all());
            CHECK((r.visual.array() <= yv.array()).all());
        }
    }
    const LabelVector y = (LabelVector(3) << 1, 0, 1).finished();
    CHECK(revise_labels(y, y, {LabelVector::Ones(3), LabelVector::Ones(3)}).audio == y);
    CHECK(revise_labels(y, y, {(LabelVector(3) << 0, 1, 1).finished(), LabelVector::Ones(3)}).audio ==
          (LabelVector(3) << 0, 0, 1).finished());
}
