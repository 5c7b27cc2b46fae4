#include "support.hpp"

#include <rlld/checkpoint.hpp>
#include <rlld/config.hpp>

#include <doctest.h>

#include <fstream>

using namespace rlld;

TEST_CASE("run config JSON round-trips canonically") {
    RunConfig cfg;
    cfg.data.num_videos = 321;
    cfg.data.noise.spurious_rate = 0.25;
    cfg.train.batch_size = 64;
    cfg.train.ablation = Ablation::no_inter_reward;
    cfg.train.label_source = LabelSource::weak;
    const std::string text = to_json(cfg);
    const RunConfig back = run_config_from_json(text);
    CHECK(back.data.num_videos == 321);
    CHECK(back.data.noise.spurious_rate == 0.25);
    CHECK(back.train.batch_size == 64);
    CHECK(back.train.ablation == Ablation::no_inter_reward);
    CHECK(back.train.label_source == LabelSource::weak);
    CHECK(to_json(back) == text);

    const auto dir = testing::scratch_dir("config");
    save_run_config(cfg, dir / "c.json");
    CHECK(to_json(load_run_config(dir / "c.json")) == text);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), Error);
}

TEST_CASE("missing keys keep defaults and unknown keys are rejected") {
    const RunConfig partial = run_config_from_json(R"({"train": {"seed": 9}})");
    CHECK(partial.train.seed == 9);
    CHECK(partial.train.batch_size == TrainConfig{}.batch_size);
    CHECK(partial.data.num_videos == SyntheticConfig{}.num_videos);
    try {
        run_config_from_json(R"({"train": {"bogus": 1}})");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::invalid_config);
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(run_config_from_json("{not json"), Error);
}

TEST_CASE("overrides address nested keys and validate them") {
    RunConfig cfg;
    apply_overrides(cfg, {"train.batch_size=64", "data.noise.seed=3", "train.ablation=no_initialized_labels",
                          "train.ablation=\"no_inter_reward\""});
    CHECK(cfg.train.batch_size == 64);
    CHECK(cfg.data.noise.seed == 3);
    CHECK(cfg.train.ablation == Ablation::no_inter_reward);
    CHECK_THROWS_AS(apply_override(cfg, "train.nope=1"), Error);
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), Error);
    CHECK_THROWS_AS(apply_override(cfg, "train.batch_size=\"many\""), Error);
}

TEST_CASE("config hash is a stable function of the canonical JSON") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
    RunConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    b.train.seed = 1;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a) == fnv1a64(to_json(a)));
}

TEST_CASE("checkpoints round-trip bit for bit") {
    SyntheticConfig scfg;
    scfg.num_videos = 20;
    scfg.segments = 4;
    scfg.num_classes = 3;
    scfg.audio_dim = 3;
    scfg.visual_dim = 3;
    const Dataset ds = generate_synthetic_dataset(scfg);
    TrainConfig tcfg;
    tcfg.task_hidden = 5;
    Checkpoint ck{init_denoiser(denoiser_config_for(ds, tcfg), 3), init_task(task_config_for(ds, tcfg), 4), 11,
                  "deadbeef", 2, 0.5};
    ck.denoiser.head_audio(0, 0) = 1.0 / 3.0;
    const auto dir = testing::scratch_dir("checkpoint");
    save_checkpoint(ck, dir / "ck");
    const Checkpoint back = load_checkpoint(dir / "ck");
    CHECK(back.seed == 11);
    CHECK(back.config_hash == "deadbeef");
    CHECK(back.epoch == 2);
    CHECK(back.validation_score == 0.5);
    const auto a = ck.denoiser.tensors();
    const auto b = back.denoiser.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(*a[k] == *b[k]);
    const auto ta = ck.task.tensors();
    const auto tb = back.task.tensors();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t k = 0; k < ta.size(); ++k) CHECK(*ta[k] == *tb[k]);

    SUBCASE("truncated tensor data is rejected") {
        const auto bin = dir / "ck" / "tensors.bin";
        const auto size = std::filesystem::file_size(bin);
        std::filesystem::resize_file(bin, size - 8);
        CHECK_THROWS_AS(load_checkpoint(dir / "ck"), Error);
    }
    SUBCASE("a missing directory is an error") { CHECK_THROWS_AS(load_checkpoint(dir / "nothing"), Error); }
}
