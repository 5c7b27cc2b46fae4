#pragma once

#include "rlld/attention.hpp"
#include "rlld/common.hpp"
#include "rlld/data.hpp"

#include <string>
#include <vector>

namespace rlld {

struct DenoiserConfig {
    int num_classes = 0;
    int audio_dim = 0;
    int visual_dim = 0;
    // Without projection the attention runs directly on the states, which
    // requires audio_dim == visual_dim.
    bool project = false;
    int hidden_dim = 32;
    bool share_head = false;
    // Ablation switch: when false the label block of every state is zero.
    bool use_labels = true;

    int state_dim(Modality m) const { return (m == Modality::audio ? audio_dim : visual_dim) + num_classes; }
    int attention_dim() const { return project ? hidden_dim : state_dim(Modality::audio); }
    void validate() const;
};

/// Per-video RL state: each row is concat(feature_t, video-level noisy label).
struct DenoiserState {
    Matrix audio;   // T x (d_audio + C)
    Matrix visual;  // T x (d_visual + C)
};

struct DenoiserParams {
    DenoiserConfig config;
    Matrix proj_audio;   // (d_audio + C) x H; empty unless config.project
    Matrix proj_visual;  // (d_visual + C) x H; empty unless config.project
    Matrix head_audio;   // C x D
    Matrix bias_audio;   // C x 1
    Matrix head_visual;  // C x D; empty when config.share_head
    Matrix bias_visual;  // C x 1; empty when config.share_head

    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    std::vector<std::string> tensor_names() const;

    DenoiserParams zeros_like() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed);

struct PolicyOutput {
    Vector audio;   // keep probabilities, clamped to [1e-6, 1 - 1e-6]
    Vector visual;
};

/// a_c = 1 keeps label c, a_c = 0 removes it.
struct ActionMask {
    LabelVector audio;
    LabelVector visual;
};

DenoiserState build_states(const VideoSample& sample, bool use_labels = true);

struct DenoiserForward {
    Matrix input_audio;  // attention inputs: projected states, or the states themselves
    Matrix input_visual;
    HybridAttention hidden;
    Vector pooled_audio;
    Vector pooled_visual;
    Vector logits_audio;
    Vector logits_visual;
    PolicyOutput policy;
};

DenoiserForward denoiser_forward(const DenoiserParams& params, const DenoiserState& state);

/// Temporal mean pool of the hidden rows, per-modality linear head, sigmoid, clamp.
PolicyOutput policy_probabilities(const HybridAttention& hidden, const DenoiserParams& params);

ActionMask sample_actions(const PolicyOutput& policy, Rng& rng);

/// Deterministic decision: keep iff probability >= 0.5.
ActionMask greedy_actions(const PolicyOutput& policy);

struct RevisedLabels {
    LabelVector audio;
    LabelVector visual;
    bool degenerate = false;
};

/// revised = mask (*) y per modality; when the union of the revised labels is
/// empty the originals are returned unchanged with degenerate = true.
RevisedLabels revise_labels(const LabelVector& audio_label, const LabelVector& visual_label, const ActionMask& mask);

/// Sum over modalities and classes of a log p + (1 - a) log(1 - p).
double action_log_prob(const PolicyOutput& policy, const ActionMask& mask);
double action_log_prob(const Vector& keep_prob, const LabelVector& actions);

/// grad += audio_weight * d/dtheta log pi(mask.audio) + visual_weight * d/dtheta log pi(mask.visual)
void accumulate_log_prob_gradient(const DenoiserParams& params, const DenoiserState& state,
                                  const DenoiserForward& forward, const ActionMask& mask, double audio_weight,
                                  double visual_weight, DenoiserParams& grad);

}  // namespace rlld
