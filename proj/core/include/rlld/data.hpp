#pragma once

#include "rlld/common.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rlld {

struct FeatureSequence {
    Matrix values;  // T x d
    Modality modality = Modality::audio;

    Eigen::Index length() const { return values.rows(); }
    Eigen::Index dim() const { return values.cols(); }
};

struct VideoSample {
    std::string id;
    FeatureSequence audio;
    FeatureSequence visual;
    LabelVector weak_label;
    LabelVector noisy_audio_label;
    LabelVector noisy_visual_label;
    // Present only for validation/test samples.
    std::optional<BinaryMatrix> clean_audio_segments;
    std::optional<BinaryMatrix> clean_visual_segments;

    Eigen::Index length() const { return audio.length(); }
    Eigen::Index num_classes() const { return weak_label.size(); }
    bool has_segments() const { return clean_audio_segments.has_value() && clean_visual_segments.has_value(); }
};

/// Throws Error(invalid_config) describing the first violated VideoSample invariant.
void validate_sample(const VideoSample& sample, bool expect_segments);

struct Dataset {
    std::vector<VideoSample> train;
    std::vector<VideoSample> validation;
    std::vector<VideoSample> test;
    int num_classes = 0;
    std::vector<std::string> class_names;

    std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

enum class Split { train, validation, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

const std::vector<VideoSample>& split_of(const Dataset& dataset, Split split);
std::vector<VideoSample>& split_of(Dataset& dataset, Split split);

struct NoiseSpec {
    double spurious_rate = 0.3;
    double drop_rate = 0.5;
    std::uint64_t seed = 0;
};

struct SyntheticConfig {
    std::size_t num_videos = 2000;
    int segments = 10;  // T
    int num_classes = 5;
    int audio_dim = 16;
    int visual_dim = 16;
    double validation_fraction = 0.15;
    double test_fraction = 0.15;
    int max_events_per_video = 3;
    double feature_noise = 0.5;
    NoiseSpec noise;
    std::uint64_t seed = 7;
};

/// Clean video-level modality labels for every sample of every split, in split
/// order. Train samples do not carry segments, so this is the only place their
/// clean labels are available (used for diagnostics and noise statistics).
struct CleanLabels {
    std::vector<LabelVector> audio;
    std::vector<LabelVector> visual;
};

struct SyntheticDataset {
    Dataset dataset;
    CleanLabels train_clean;
    CleanLabels validation_clean;
    CleanLabels test_clean;
};

/// Builds a dataset whose clean per-segment events are contiguous intervals,
/// with modality-specific label noise injected on top of the clean video-level
/// modality labels. Pure function of the config (including both seeds).
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

inline Dataset generate_synthetic_dataset(const SyntheticConfig& config) {
    return generate_synthetic(config).dataset;
}

struct NoisyLabels {
    LabelVector audio;
    LabelVector visual;
};

/// Each class present in one modality's clean label but absent from the other
/// is attributed to the other modality with probability noise.spurious_rate.
/// Never removes a class from the union.
NoisyLabels inject_modality_noise(const LabelVector& clean_audio, const LabelVector& clean_visual,
                                  const NoiseSpec& noise, Rng& rng);

struct InjectionStats {
    std::size_t eligible_slots = 0;
    std::size_t injected = 0;
};

/// An eligible slot is a (class, modality) pair where the class is clean in the
/// other modality only; it is injected when the noisy label carries it anyway.
InjectionStats count_injections(const std::vector<VideoSample>& samples, const CleanLabels& clean);

struct LoadReport {
    Dataset dataset;
    std::size_t rejected = 0;  // annotated videos missing a modality's features
};

/// features_dir/audio/<id>.txt and features_dir/visual/<id>.txt are text
/// matrices (T x d). The annotation CSV has header `filename,labels`; labels
/// are '&'-separated event names (extra comma-separated columns are also read
/// as event names). Every loaded video goes to the train split with both
/// modality labels set to the weak label.
LoadReport load_feature_dataset(const std::filesystem::path& features_dir,
                                const std::filesystem::path& annotations_file);

/// Writes meta.json plus one directory per split. See README for the layout.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir, const SyntheticConfig* config);
Dataset load_dataset(const std::filesystem::path& dir);

struct EpisodeBatch {
    std::vector<std::size_t> indices;        // into the split
    std::vector<std::size_t> carried_over;   // subset of indices shared with the previous batch

    std::size_t size() const { return indices.size(); }
};

/// First batch of an episode (previous == nullptr) is drawn fresh; later
/// batches carry floor(B/4) samples uniformly from the previous batch and fill
/// the rest without replacement from the split excluding the carried ones.
EpisodeBatch sample_episode_batch(std::size_t split_size, std::size_t batch_size,
                                  const EpisodeBatch* previous, Rng& rng);

}  // namespace rlld
