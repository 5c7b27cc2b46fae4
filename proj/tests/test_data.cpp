#include "support.hpp"

#include <rlld/data.hpp>
#include <rlld/tensor_io.hpp>

#include <doctest.h>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

using namespace rlld;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_synth(std::size_t n = 120) {
    SyntheticConfig cfg;
    cfg.num_videos = n;
    cfg.segments = 6;
    cfg.num_classes = 4;
    cfg.audio_dim = 3;
    cfg.visual_dim = 5;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("synthetic samples satisfy the sample invariants") {
    const SyntheticDataset syn = generate_synthetic(small_synth());
    const Dataset& ds = syn.dataset;
    CHECK(ds.size() == 120);
    CHECK(ds.num_classes == 4);
    CHECK(ds.class_names.size() == 4);
    std::set<std::string> ids;
    for (Split split : {Split::train, Split::validation, Split::test}) {
        for (const VideoSample& s : split_of(ds, split)) {
            CHECK(ids.insert(s.id).second);
            CHECK_NOTHROW(validate_sample(s, split != Split::train));
            CHECK(s.weak_label == label_or(s.noisy_audio_label, s.noisy_visual_label));
            CHECK(s.weak_label.sum() >= 1);
            CHECK(s.audio.length() == 6);
            CHECK(s.visual.dim() == 5);
            CHECK(s.has_segments() == (split != Split::train));
        }
    }
    for (const VideoSample& s : ds.test) {
        // Noise only adds labels on top of the clean modality labels.
        CHECK((temporal_or(*s.clean_audio_segments).array() <= s.noisy_audio_label.array()).all());
        CHECK((temporal_or(*s.clean_visual_segments).array() <= s.noisy_visual_label.array()).all());
    }
}

TEST_CASE("synthetic events are contiguous intervals") {
    const Dataset ds = generate_synthetic_dataset(small_synth());
    for (const VideoSample& s : ds.validation) {
        for (const BinaryMatrix* m : {&*s.clean_audio_segments, &*s.clean_visual_segments}) {
            for (long c = 0; c < m->cols(); ++c) {
                int runs = 0;
                for (long t = 0; t < m->rows(); ++t) runs += (*m)(t, c) && (t == 0 || !(*m)(t - 1, c));
                CHECK(runs <= 1);
            }
        }
    }
}

TEST_CASE("zero noise keeps the clean modality labels") {
    SyntheticConfig cfg = small_synth();
    cfg.noise.spurious_rate = 0.0;
    const SyntheticDataset syn = generate_synthetic(cfg);
    for (std::size_t i = 0; i < syn.dataset.train.size(); ++i) {
        CHECK(syn.dataset.train[i].noisy_audio_label == syn.train_clean.audio[i]);
        CHECK(syn.dataset.train[i].noisy_visual_label == syn.train_clean.visual[i]);
    }
    CHECK(count_injections(syn.dataset.train, syn.train_clean).injected == 0);
}

TEST_CASE("default generation injects about thirty percent of eligible slots") {
    SyntheticConfig cfg;
    const SyntheticDataset syn = generate_synthetic(cfg);
    InjectionStats total;
    const std::vector<VideoSample>* splits[] = {&syn.dataset.train, &syn.dataset.validation, &syn.dataset.test};
    const CleanLabels* cleans[] = {&syn.train_clean, &syn.validation_clean, &syn.test_clean};
    for (int k = 0; k < 3; ++k) {
        const InjectionStats s = count_injections(*splits[k], *cleans[k]);
        total.eligible_slots += s.eligible_slots;
        total.injected += s.injected;
    }
    REQUIRE(total.eligible_slots > 0);
    const double rate = static_cast<double>(total.injected) / static_cast<double>(total.eligible_slots);
    CHECK(std::abs(rate - 0.3) <= 0.03);
}

TEST_CASE("generation is a pure function of the config") {
    const Dataset a = generate_synthetic_dataset(small_synth());
    const Dataset b = generate_synthetic_dataset(small_synth());
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].audio.values == b.train[i].audio.values);
        CHECK(a.train[i].noisy_visual_label == b.train[i].noisy_visual_label);
    }
    SyntheticConfig other = small_synth();
    other.seed = 8;
    CHECK(generate_synthetic_dataset(other).train[0].audio.values != a.train[0].audio.values);
}

TEST_CASE("generation rejects empty and single-class configs") {
    SyntheticConfig cfg = small_synth();
    cfg.num_videos = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg), Error);
    cfg = small_synth();
    cfg.num_classes = 1;
    try {
        generate_synthetic(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::invalid_config);
    }
}

TEST_CASE("noise injection copies labels from the other modality only") {
    Rng rng(1);
    const LabelVector a = (LabelVector(2) << 1, 0).finished();
    const LabelVector v = (LabelVector(2) << 0, 1).finished();
    const NoisyLabels all = inject_modality_noise(a, v, {1.0, 0.0, 0}, rng);
    CHECK(all.audio == LabelVector::Ones(2));
    CHECK(all.visual == LabelVector::Ones(2));
    const NoisyLabels none = inject_modality_noise(a, v, {0.0, 0.0, 0}, rng);
    CHECK(none.audio == a);
    CHECK(none.visual == v);
    Rng r1(5), r2(5);
    for (int i = 0; i < 20; ++i) {
        const NoisyLabels x = inject_modality_noise(a, v, {0.5, 0.0, 0}, r1);
        const NoisyLabels y = inject_modality_noise(a, v, {0.5, 0.0, 0}, r2);
        CHECK(x.audio == y.audio);
        CHECK(x.visual == y.visual);
        CHECK(label_or(x.audio, x.visual) == label_or(a, v));
    }
    const NoisyLabels zero = inject_modality_noise(LabelVector::Zero(3), LabelVector::Zero(3), {1.0, 0.0, 0}, rng);
    CHECK(zero.audio == LabelVector::Zero(3));
}

TEST_CASE("episode batches overlap by a quarter") {
    Rng rng(3);
    const EpisodeBatch first = sample_episode_batch(1000, 128, nullptr, rng);
    CHECK(first.size() == 128);
    CHECK(first.carried_over.empty());
    const EpisodeBatch next = sample_episode_batch(1000, 128, &first, rng);
    CHECK(next.size() == 128);
    CHECK(next.carried_over.size() == 32);
    const std::set<std::size_t> prev(first.indices.begin(), first.indices.end());
    const std::set<std::size_t> cur(next.indices.begin(), next.indices.end());
    CHECK(cur.size() == 128);
    std::size_t shared = 0;
    for (std::size_t i : cur) shared += prev.count(i);
    CHECK(shared >= 32);
    for (std::size_t i : next.carried_over) {
        CHECK(prev.count(i) == 1);
        CHECK(cur.count(i) == 1);
    }
    CHECK(sample_episode_batch(10, 4, nullptr, rng).carried_over.empty());

    Rng a(9), b(9);
    const EpisodeBatch x = sample_episode_batch(1000, 8, &first, a);
    const EpisodeBatch y = sample_episode_batch(1000, 8, &first, b);
    CHECK(x.indices == y.indices);

    CHECK_THROWS_AS(sample_episode_batch(10, 11, nullptr, rng), Error);
    CHECK_THROWS_AS(sample_episode_batch(10, 0, nullptr, rng), Error);
}

TEST_CASE("datasets round-trip through their directory layout") {
    const SyntheticConfig cfg = small_synth(40);
    const Dataset ds = generate_synthetic_dataset(cfg);
    const fs::path dir = testing::scratch_dir("data_roundtrip");
    save_dataset(ds, dir / "a", &cfg);
    const Dataset back = load_dataset(dir / "a");
    CHECK(back.num_classes == ds.num_classes);
    CHECK(back.class_names == ds.class_names);
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.test.size() == ds.test.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].id == ds.train[i].id);
        CHECK(back.train[i].audio.values == ds.train[i].audio.values);
        CHECK(back.train[i].noisy_audio_label == ds.train[i].noisy_audio_label);
        CHECK(back.train[i].noisy_visual_label == ds.train[i].noisy_visual_label);
        CHECK_FALSE(back.train[i].has_segments());
    }
    for (std::size_t i = 0; i < ds.test.size(); ++i) {
        REQUIRE(back.test[i].has_segments());
        CHECK(*back.test[i].clean_audio_segments == *ds.test[i].clean_audio_segments);
    }
    // Saving twice gives byte-identical metadata and labels.
    save_dataset(ds, dir / "b", &cfg);
    CHECK(slurp(dir / "a" / "meta.json") == slurp(dir / "b" / "meta.json"));
    CHECK(slurp(dir / "a" / "train" / "labels.csv") == slurp(dir / "b" / "train" / "labels.csv"));
    CHECK_THROWS_AS(load_dataset(dir / "missing"), Error);
}

TEST_CASE("feature datasets load from text matrices and an annotation CSV") {
    const fs::path dir = testing::scratch_dir("features");
    SUBCASE("empty annotations give an empty dataset") {
        write_file(dir / "ann.csv", "");
        fs::create_directories(dir / "feat");
        const LoadReport r = load_feature_dataset(dir / "feat", dir / "ann.csv");
        CHECK(r.dataset.size() == 0);
    }
    SUBCASE("event names form the vocabulary") {
        write_file(dir / "ann.csv", "filename,labels\nv1,Speech&Dog\nv2,Dog\nv3,Speech\n");
        write_file(dir / "feat/audio/v1.txt", "0.1 0.2\n0.3 0.4\n");
        write_file(dir / "feat/visual/v1.txt", "1 2 3\n4 5 6\n");
        write_file(dir / "feat/audio/v2.txt", "0.1 0.2\n");
        write_file(dir / "feat/visual/v2.txt", "1 2 3\n");
        write_file(dir / "feat/audio/v3.txt", "0.1 0.2\n");
        const LoadReport r = load_feature_dataset(dir / "feat", dir / "ann.csv");
        CHECK(r.dataset.num_classes == 2);
        CHECK(r.rejected == 1);
        REQUIRE(r.dataset.train.size() == 2);
        CHECK(r.dataset.train[0].weak_label.sum() == 2);
        CHECK(r.dataset.train[0].noisy_audio_label == r.dataset.train[0].weak_label);
        CHECK(r.dataset.train[1].audio.length() == 1);
    }
    SUBCASE("comma-separated event names are accepted") {
        write_file(dir / "ann.csv", "filename,labels\nv1,\"Speech,Dog\"\n");
        write_file(dir / "feat/audio/v1.txt", "0.1\n");
        write_file(dir / "feat/visual/v1.txt", "0.2\n");
        CHECK(load_feature_dataset(dir / "feat", dir / "ann.csv").dataset.train[0].weak_label.sum() == 2);
    }
    SUBCASE("a NaN feature names the file") {
        write_file(dir / "ann.csv", "filename,labels\nv1,Dog\n");
        write_file(dir / "feat/audio/v1.txt", "0.1 nan\n");
        write_file(dir / "feat/visual/v1.txt", "0.2 0.3\n");
        try {
            load_feature_dataset(dir / "feat", dir / "ann.csv");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("v1.txt") != std::string::npos);
        }
    }
    SUBCASE("malformed rows report their row number") {
        write_file(dir / "ann.csv", "filename,labels\nv1,Dog\nv2\n");
        fs::create_directories(dir / "feat");
        try {
            load_feature_dataset(dir / "feat", dir / "ann.csv");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == Error::Kind::parse);
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    SUBCASE("features without annotations are a mismatch") {
        write_file(dir / "ann.csv", "filename,labels\nv1,Dog\n");
        write_file(dir / "feat/audio/v1.txt", "0.1\n");
        write_file(dir / "feat/visual/v1.txt", "0.1\n");
        write_file(dir / "feat/audio/v9.txt", "0.1\n");
        CHECK_THROWS_AS(load_feature_dataset(dir / "feat", dir / "ann.csv"), Error);
    }
    SUBCASE("a missing directory is an error") {
        write_file(dir / "ann.csv", "filename,labels\n");
        CHECK_THROWS_AS(load_feature_dataset(dir / "nope", dir / "ann.csv"), Error);
    }
}

TEST_CASE("text matrices round-trip exactly and reject bad input") {
    const fs::path dir = testing::scratch_dir("tensor_io");
    Rng rng(12);
    const Matrix m = testing::random_matrix(rng, 4, 3, 1e3);
    write_matrix_text(dir / "m.txt", m);
    CHECK(read_matrix_text(dir / "m.txt") == m);
    const BinaryMatrix b = testing::random_binary(rng, 3, 2);
    write_binary_matrix_text(dir / "b.txt", b);
    CHECK(read_binary_matrix_text(dir / "b.txt") == b);
    write_file(dir / "ragged.txt", "1 2\n3\n");
    CHECK_THROWS_AS(read_matrix_text(dir / "ragged.txt"), Error);
    write_file(dir / "inf.txt", "1 inf\n");
    try {
        read_matrix_text(dir / "inf.txt");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::numerical);
    }
    CHECK(format_double(0.1) == "0.1");
}
