#include "rlld/data.hpp"

#include "rlld/tensor_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

namespace rlld {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "validation" || name == "val") return Split::validation;
    if (name == "test") return Split::test;
    throw Error(Error::Kind::invalid_config, "unknown split '" + std::string(name) + "'");
}

const std::vector<VideoSample>& split_of(const Dataset& dataset, Split split) {
    switch (split) {
        case Split::train: return dataset.train;
        case Split::validation: return dataset.validation;
        case Split::test: return dataset.test;
    }
    return dataset.train;
}

std::vector<VideoSample>& split_of(Dataset& dataset, Split split) {
    return const_cast<std::vector<VideoSample>&>(split_of(std::as_const(dataset), split));
}

void validate_sample(const VideoSample& s, bool expect_segments) {
    auto fail = [&](const std::string& why) {
        throw Error(Error::Kind::invalid_config, "sample '" + s.id + "': " + why);
    };
    const Eigen::Index t = s.audio.length();
    const Eigen::Index c = s.weak_label.size();
    if (t < 1 || s.audio.dim() < 1 || s.visual.dim() < 1) fail("empty feature sequence");
    if (s.visual.length() != t) fail("audio and visual lengths differ");
    if (!s.audio.values.allFinite() || !s.visual.values.allFinite()) fail("non-finite feature value");
    if (s.noisy_audio_label.size() != c || s.noisy_visual_label.size() != c) fail("label length mismatch");
    if (label_or(s.noisy_audio_label, s.noisy_visual_label) != s.weak_label) {
        fail("weak label is not the union of the modality labels");
    }
    if (s.weak_label.sum() < 1) fail("weak label has no positive entry");
    if (s.has_segments() != expect_segments) {
        fail(expect_segments ? "missing clean segment matrices" : "unexpected clean segment matrices");
    }
    if (s.has_segments()) {
        for (const BinaryMatrix* m : {&*s.clean_audio_segments, &*s.clean_visual_segments}) {
            if (m->rows() != t || m->cols() != c) fail("segment matrix shape mismatch");
        }
    }
}

NoisyLabels inject_modality_noise(const LabelVector& clean_audio, const LabelVector& clean_visual,
                                  const NoiseSpec& noise, Rng& rng) {
    NoisyLabels out{clean_audio, clean_visual};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index c = 0; c < clean_audio.size(); ++c) {
        const bool in_audio = clean_audio(c) != 0;
        const bool in_visual = clean_visual(c) != 0;
        if (in_visual && !in_audio && unit(rng) < noise.spurious_rate) out.audio(c) = 1;
        if (in_audio && !in_visual && unit(rng) < noise.spurious_rate) out.visual(c) = 1;
    }
    return out;
}

InjectionStats count_injections(const std::vector<VideoSample>& samples, const CleanLabels& clean) {
    if (clean.audio.size() != samples.size() || clean.visual.size() != samples.size()) {
        throw Error(Error::Kind::shape_mismatch, "clean label count differs from sample count");
    }
    InjectionStats stats;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& ca = clean.audio[i];
        const auto& cv = clean.visual[i];
        for (Eigen::Index c = 0; c < ca.size(); ++c) {
            if (cv(c) && !ca(c)) {
                ++stats.eligible_slots;
                stats.injected += samples[i].noisy_audio_label(c) != 0;
            }
            if (ca(c) && !cv(c)) {
                ++stats.eligible_slots;
                stats.injected += samples[i].noisy_visual_label(c) != 0;
            }
        }
    }
    return stats;
}

namespace {

void check_synthetic_config(const SyntheticConfig& cfg) {
    if (cfg.num_videos == 0) {
        throw Error(Error::Kind::empty_dataset, "num_videos must be at least 1");
    }
    if (cfg.num_classes < 2) {
        throw Error(Error::Kind::invalid_config, "num_classes must be at least 2");
    }
    if (cfg.segments < 1 || cfg.audio_dim < 1 || cfg.visual_dim < 1 || cfg.max_events_per_video < 1) {
        throw Error(Error::Kind::invalid_config, "segments, feature dims and max_events_per_video must be >= 1");
    }
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(cfg.noise.spurious_rate) || !in_unit(cfg.noise.drop_rate)) {
        throw Error(Error::Kind::invalid_config, "noise rates must lie in [0, 1]");
    }
    if (!in_unit(cfg.validation_fraction) || !in_unit(cfg.test_fraction) ||
        cfg.validation_fraction + cfg.test_fraction > 1.0) {
        throw Error(Error::Kind::invalid_config, "split fractions must lie in [0, 1] and sum to at most 1");
    }
    if (!(cfg.feature_noise >= 0.0) || !std::isfinite(cfg.feature_noise)) {
        throw Error(Error::Kind::invalid_config, "feature_noise must be finite and nonnegative");
    }
}

Matrix unit_class_means(int num_classes, int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix means(num_classes, dim);
    for (int c = 0; c < num_classes; ++c) {
        double norm = 0.0;
        do {
            for (int j = 0; j < dim; ++j) means(c, j) = normal(rng);
            norm = means.row(c).norm();
        } while (norm < 1e-12);
        means.row(c) /= norm;
    }
    return means;
}

struct Interval {
    int start;
    int end;  // inclusive
};

Interval random_interval(int segments, Rng& rng) {
    const int start = std::uniform_int_distribution<int>(0, segments - 1)(rng);
    const int length = std::uniform_int_distribution<int>(1, segments - start)(rng);
    return {start, start + length - 1};
}

Matrix synthesize_features(const BinaryMatrix& segments, const Matrix& means, double noise, Rng& rng) {
    std::normal_distribution<double> normal(0.0, noise > 0.0 ? noise : 1.0);
    Matrix f(segments.rows(), means.cols());
    for (Eigen::Index t = 0; t < segments.rows(); ++t) {
        for (Eigen::Index j = 0; j < f.cols(); ++j) f(t, j) = noise > 0.0 ? normal(rng) : 0.0;
        for (Eigen::Index c = 0; c < segments.cols(); ++c) {
            if (segments(t, c)) f.row(t) += means.row(c);
        }
    }
    return f;
}

std::string synthetic_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn_%06zu", index);
    return buf;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    check_synthetic_config(cfg);
    Rng rng(cfg.seed);
    Rng noise_rng(cfg.noise.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int num_classes = cfg.num_classes;
    const int t_len = cfg.segments;
    const Matrix audio_means = unit_class_means(num_classes, cfg.audio_dim, rng);
    const Matrix visual_means = unit_class_means(num_classes, cfg.visual_dim, rng);

    const auto n = cfg.num_videos;
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.validation_fraction));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.test_fraction));
    const auto n_train = n - n_val - n_test;

    SyntheticDataset out;
    Dataset& ds = out.dataset;
    ds.num_classes = num_classes;
    for (int c = 0; c < num_classes; ++c) ds.class_names.push_back("event_" + std::to_string(c));

    std::vector<int> classes(num_classes);
    const int max_events = std::min(cfg.max_events_per_video, num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        BinaryMatrix seg_a = BinaryMatrix::Zero(t_len, num_classes);
        BinaryMatrix seg_v = BinaryMatrix::Zero(t_len, num_classes);

        const int k = std::uniform_int_distribution<int>(1, max_events)(rng);
        std::iota(classes.begin(), classes.end(), 0);
        for (int j = 0; j < k; ++j) {
            const int pick = std::uniform_int_distribution<int>(j, num_classes - 1)(rng);
            std::swap(classes[j], classes[pick]);
            const int c = classes[j];

            bool audio = true;
            bool visual = true;
            if (unit(rng) < cfg.noise.drop_rate) {
                (unit(rng) < 0.5 ? visual : audio) = false;
            }
            const Interval ia = random_interval(t_len, rng);
            const Interval iv = unit(rng) < 0.5 ? ia : random_interval(t_len, rng);
            if (audio) seg_a.block(ia.start, c, ia.end - ia.start + 1, 1).setOnes();
            if (visual) seg_v.block(iv.start, c, iv.end - iv.start + 1, 1).setOnes();
        }

        VideoSample s;
        s.id = synthetic_id(i);
        s.audio = {synthesize_features(seg_a, audio_means, cfg.feature_noise, rng), Modality::audio};
        s.visual = {synthesize_features(seg_v, visual_means, cfg.feature_noise, rng), Modality::visual};

        const LabelVector clean_a = temporal_or(seg_a);
        const LabelVector clean_v = temporal_or(seg_v);
        NoisyLabels noisy = inject_modality_noise(clean_a, clean_v, cfg.noise, noise_rng);
        s.noisy_audio_label = std::move(noisy.audio);
        s.noisy_visual_label = std::move(noisy.visual);
        s.weak_label = label_or(s.noisy_audio_label, s.noisy_visual_label);

        CleanLabels* clean = nullptr;
        if (i < n_train) {
            ds.train.push_back(std::move(s));
            clean = &out.train_clean;
        } else {
            s.clean_audio_segments = std::move(seg_a);
            s.clean_visual_segments = std::move(seg_v);
            if (i < n_train + n_val) {
                ds.validation.push_back(std::move(s));
                clean = &out.validation_clean;
            } else {
                ds.test.push_back(std::move(s));
                clean = &out.test_clean;
            }
        }
        clean->audio.push_back(clean_a);
        clean->visual.push_back(clean_v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_event_names(const std::vector<std::string>& fields) {
    std::vector<std::string> names;
    for (std::size_t f = 1; f < fields.size(); ++f) {
        std::string token;
        for (char ch : fields[f] + "&") {
            if (ch == '&' || ch == ',') {
                token = trim(token);
                if (!token.empty()) names.push_back(token);
                token.clear();
            } else {
                token.push_back(ch);
            }
        }
    }
    return names;
}

std::string join_labels(const LabelVector& y, const std::vector<std::string>& names) {
    std::string out;
    for (Eigen::Index c = 0; c < y.size(); ++c) {
        if (!y(c)) continue;
        if (!out.empty()) out.push_back('&');
        out += names[static_cast<std::size_t>(c)];
    }
    return out;
}

LabelVector parse_labels(const std::string& field, const std::map<std::string, int>& vocab,
                         const std::string& where) {
    LabelVector y = LabelVector::Zero(static_cast<Eigen::Index>(vocab.size()));
    for (const auto& name : split_event_names({"", field})) {
        auto it = vocab.find(name);
        if (it == vocab.end()) {
            throw Error(Error::Kind::parse, where + ": unknown event '" + name + "'");
        }
        y(it->second) = 1;
    }
    return y;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Kind::io, "cannot open: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace

LoadReport load_feature_dataset(const fs::path& features_dir, const fs::path& annotations_file) {
    if (!fs::is_directory(features_dir)) {
        throw Error(Error::Kind::io, "missing features directory: " + features_dir.string());
    }
    const auto lines = read_lines(annotations_file);

    struct Row {
        std::string id;
        std::vector<std::string> events;
    };
    std::vector<Row> rows;
    std::set<std::string> vocabulary;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (rows.empty() && i == 0 && trim(fields[0]) == "filename") continue;
        const std::string where = annotations_file.string() + " row " + std::to_string(i + 1);
        if (fields.size() < 2 || trim(fields[0]).empty()) {
            throw Error(Error::Kind::parse, where + ": expected 'filename,labels'");
        }
        Row row{trim(fields[0]), split_event_names(fields)};
        if (row.events.empty()) {
            throw Error(Error::Kind::parse, where + ": no event labels");
        }
        vocabulary.insert(row.events.begin(), row.events.end());
        rows.push_back(std::move(row));
    }

    LoadReport report;
    Dataset& ds = report.dataset;
    ds.class_names.assign(vocabulary.begin(), vocabulary.end());
    ds.num_classes = static_cast<int>(ds.class_names.size());
    std::map<std::string, int> index;
    for (int c = 0; c < ds.num_classes; ++c) index[ds.class_names[static_cast<std::size_t>(c)]] = c;

    std::set<std::string> annotated;
    for (const auto& row : rows) annotated.insert(row.id);
    for (const char* sub : {"audio", "visual"}) {
        const fs::path dir = features_dir / sub;
        if (!fs::is_directory(dir)) continue;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() != ".txt") continue;
            const std::string id = entry.path().stem().string();
            if (!annotated.count(id)) {
                throw Error(Error::Kind::invalid_config,
                            "feature/label id mismatch: " + entry.path().string() + " has no annotation");
            }
        }
    }

    for (const auto& row : rows) {
        const fs::path audio_path = features_dir / "audio" / (row.id + ".txt");
        const fs::path visual_path = features_dir / "visual" / (row.id + ".txt");
        if (!fs::exists(audio_path) || !fs::exists(visual_path)) {
            ++report.rejected;
            continue;
        }
        VideoSample s;
        s.id = row.id;
        s.audio = {read_matrix_text(audio_path), Modality::audio};
        s.visual = {read_matrix_text(visual_path), Modality::visual};
        if (s.audio.length() != s.visual.length()) {
            throw Error(Error::Kind::shape_mismatch, "feature/label id mismatch for '" + row.id +
                                                         "': audio and visual segment counts differ");
        }
        s.weak_label = LabelVector::Zero(ds.num_classes);
        for (const auto& name : row.events) s.weak_label(index.at(name)) = 1;
        s.noisy_audio_label = s.weak_label;
        s.noisy_visual_label = s.weak_label;
        validate_sample(s, false);
        ds.train.push_back(std::move(s));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Dataset directory serialization

void save_dataset(const Dataset& ds, const fs::path& dir, const SyntheticConfig* config) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw Error(Error::Kind::io, "cannot create dataset directory: " + dir.string());
    }

    json meta;
    meta["format"] = "rlld-dataset";
    meta["version"] = 1;
    meta["num_classes"] = ds.num_classes;
    meta["class_names"] = ds.class_names;
    const VideoSample* any = !ds.train.empty() ? &ds.train.front()
                             : !ds.validation.empty() ? &ds.validation.front()
                             : !ds.test.empty() ? &ds.test.front() : nullptr;
    if (any != nullptr) {
        meta["segments"] = any->length();
        meta["audio_dim"] = any->audio.dim();
        meta["visual_dim"] = any->visual.dim();
    }
    json splits = json::object();
    for (Split split : {Split::train, Split::validation, Split::test}) {
        splits[std::string(to_string(split))] = split_of(ds, split).size();
    }
    meta["splits"] = splits;
    if (config != nullptr) {
        meta["synthetic"] = {
            {"num_videos", config->num_videos},
            {"segments", config->segments},
            {"num_classes", config->num_classes},
            {"audio_dim", config->audio_dim},
            {"visual_dim", config->visual_dim},
            {"validation_fraction", config->validation_fraction},
            {"test_fraction", config->test_fraction},
            {"max_events_per_video", config->max_events_per_video},
            {"feature_noise", config->feature_noise},
            {"seed", config->seed},
            {"noise", {{"spurious_rate", config->noise.spurious_rate},
                       {"drop_rate", config->noise.drop_rate},
                       {"seed", config->noise.seed}}},
        };
    }
    {
        std::ofstream out(dir / "meta.json", std::ios::binary);
        out << meta.dump(2) << '\n';
        if (!out) throw Error(Error::Kind::io, "cannot write " + (dir / "meta.json").string());
    }

    for (Split split : {Split::train, Split::validation, Split::test}) {
        const fs::path sdir = dir / std::string(to_string(split));
        fs::create_directories(sdir / "audio");
        fs::create_directories(sdir / "visual");
        const auto& samples = split_of(ds, split);
        std::ofstream labels(sdir / "labels.csv", std::ios::binary);
        std::ofstream annotations(sdir / "annotations.csv", std::ios::binary);
        labels << "filename,weak,audio,visual\n";
        annotations << "filename,labels\n";
        for (const auto& s : samples) {
            labels << s.id << ',' << join_labels(s.weak_label, ds.class_names) << ','
                   << join_labels(s.noisy_audio_label, ds.class_names) << ','
                   << join_labels(s.noisy_visual_label, ds.class_names) << '\n';
            annotations << s.id << ',' << join_labels(s.weak_label, ds.class_names) << '\n';
            write_matrix_text(sdir / "audio" / (s.id + ".txt"), s.audio.values);
            write_matrix_text(sdir / "visual" / (s.id + ".txt"), s.visual.values);
            if (s.has_segments()) {
                fs::create_directories(sdir / "segments");
                write_binary_matrix_text(sdir / "segments" / (s.id + ".audio.txt"), *s.clean_audio_segments);
                write_binary_matrix_text(sdir / "segments" / (s.id + ".visual.txt"), *s.clean_visual_segments);
            }
        }
        if (!labels || !annotations) throw Error(Error::Kind::io, "cannot write labels in " + sdir.string());
    }
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.json";
    if (!fs::is_directory(dir) || !fs::exists(meta_path)) {
        throw Error(Error::Kind::io, "dataset not found: " + dir.string());
    }
    json meta;
    try {
        std::ifstream in(meta_path);
        meta = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Error::Kind::parse, meta_path.string() + ": " + e.what());
    }

    Dataset ds;
    ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
    ds.num_classes = static_cast<int>(ds.class_names.size());
    if (meta.value("num_classes", ds.num_classes) != ds.num_classes) {
        throw Error(Error::Kind::parse, meta_path.string() + ": num_classes disagrees with class_names");
    }
    std::map<std::string, int> vocab;
    for (int c = 0; c < ds.num_classes; ++c) vocab[ds.class_names[static_cast<std::size_t>(c)]] = c;

    for (Split split : {Split::train, Split::validation, Split::test}) {
        const fs::path sdir = dir / std::string(to_string(split));
        auto& out = split_of(ds, split);
        const fs::path labels_path = sdir / "labels.csv";
        if (!fs::exists(labels_path)) continue;
        const auto lines = read_lines(labels_path);
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            const std::string where = labels_path.string() + " row " + std::to_string(i + 1);
            const auto fields = split_csv_line(lines[i]);
            if (fields.size() != 4) throw Error(Error::Kind::parse, where + ": expected 4 fields");
            VideoSample s;
            s.id = fields[0];
            s.weak_label = parse_labels(fields[1], vocab, where);
            s.noisy_audio_label = parse_labels(fields[2], vocab, where);
            s.noisy_visual_label = parse_labels(fields[3], vocab, where);
            s.audio = {read_matrix_text(sdir / "audio" / (s.id + ".txt")), Modality::audio};
            s.visual = {read_matrix_text(sdir / "visual" / (s.id + ".txt")), Modality::visual};
            const fs::path seg_a = sdir / "segments" / (s.id + ".audio.txt");
            const fs::path seg_v = sdir / "segments" / (s.id + ".visual.txt");
            if (fs::exists(seg_a) && fs::exists(seg_v)) {
                s.clean_audio_segments = read_binary_matrix_text(seg_a);
                s.clean_visual_segments = read_binary_matrix_text(seg_v);
            }
            validate_sample(s, split != Split::train);
            out.push_back(std::move(s));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------

EpisodeBatch sample_episode_batch(std::size_t split_size, std::size_t batch_size,
                                  const EpisodeBatch* previous, Rng& rng) {
    if (batch_size == 0 || batch_size > split_size) {
        throw Error(Error::Kind::invalid_config, "batch size " + std::to_string(batch_size) +
                                                     " must be in [1, split size " +
                                                     std::to_string(split_size) + "]");
    }
    EpisodeBatch batch;
    batch.indices.reserve(batch_size);

    // Partial Fisher-Yates: the first `count` entries of `pool` become a uniform sample.
    auto draw = [&rng](std::vector<std::size_t>& pool, std::size_t count) {
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t pick = std::uniform_int_distribution<std::size_t>(j, pool.size() - 1)(rng);
            std::swap(pool[j], pool[pick]);
        }
        pool.resize(count);
    };

    std::vector<char> taken(split_size, 0);
    if (previous != nullptr && !previous->indices.empty()) {
        std::vector<std::size_t> prev = previous->indices;
        const std::size_t carry = std::min(batch_size / 4, prev.size());
        draw(prev, carry);
        for (std::size_t idx : prev) {
            if (idx >= split_size) throw Error(Error::Kind::invalid_config, "previous batch index out of range");
            taken[idx] = 1;
        }
        batch.carried_over = prev;
        batch.indices = prev;
    }

    std::vector<std::size_t> pool;
    pool.reserve(split_size);
    for (std::size_t i = 0; i < split_size; ++i) {
        if (!taken[i]) pool.push_back(i);
    }
    draw(pool, batch_size - batch.indices.size());
    batch.indices.insert(batch.indices.end(), pool.begin(), pool.end());
    return batch;
}

}  // namespace rlld
