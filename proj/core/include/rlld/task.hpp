#pragma once

#include "rlld/attention.hpp"
#include "rlld/common.hpp"
#include "rlld/data.hpp"
#include "rlld/metrics.hpp"

#include <string>
#include <vector>

namespace rlld {

struct TaskConfig {
    int num_classes = 0;
    int audio_dim = 0;
    int visual_dim = 0;
    int hidden_dim = 32;
    // false restores the positive-only cross entropy -sum y log p.
    bool two_sided_bce = true;
    // false trains on the modality loss alone.
    bool video_loss = true;
    double threshold = 0.5;

    void validate() const;
};

/// Input projections feed one hybrid attention block; a shared sigmoid
/// classifier scores every snippet, and two attention heads pool the snippets:
/// a temporal softmax over t (per modality and class) and a modality softmax
/// over {audio, visual} (per t and class).
struct TaskParams {
    TaskConfig config;
    Matrix proj_audio;        // d_audio x H
    Matrix proj_audio_bias;   // 1 x H
    Matrix proj_visual;       // d_visual x H
    Matrix proj_visual_bias;  // 1 x H
    Matrix classifier;        // H x C
    Matrix classifier_bias;   // 1 x C
    Matrix temporal;          // H x C
    Matrix temporal_bias;     // 1 x C
    Matrix modality;          // H x C
    Matrix modality_bias;     // 1 x C

    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    std::vector<std::string> tensor_names() const;
    TaskParams zeros_like() const;
};

TaskParams init_task(const TaskConfig& config, std::uint64_t seed);

struct SnippetPredictions {
    Matrix prob_audio;         // T x C
    Matrix prob_visual;        // T x C
    Matrix temporal_audio;     // T x C, columns sum to 1
    Matrix temporal_visual;    // T x C, columns sum to 1
    Matrix modality_audio;     // T x C, weight of the audio stream; modality_visual = 1 - modality_audio
    Matrix modality_visual;    // T x C
};

struct VideoPrediction {
    Vector prob;  // length C, clamped
};

struct TaskForward {
    Matrix input_audio;  // projected features, T x H
    Matrix input_visual;
    HybridAttention hidden;
    SnippetPredictions snippet;
    VideoPrediction video;
    Vector video_raw;        // unclamped pooled probability
    Vector pooling_norm;     // per-class sum of the joint pooling weights
    Vector audio_video_raw;  // temporal pooling of the audio snippets, unclamped
    Vector visual_video_raw;
    Vector audio_video;      // clamped
    Vector visual_video;
};

/// Uses features only; the label representation never enters the task network.
TaskForward task_forward(const TaskParams& params, const VideoSample& sample);

/// Joint pooling: sum_t sum_m wt[m](t,c) wm[m](t,c) P_m(t,c), normalized by the
/// total weight so the result is a convex combination of snippet probabilities.
Vector mmil_pool(const SnippetPredictions& snippet);

LabelVector union_label(const LabelVector& audio, const LabelVector& visual);

double binary_cross_entropy(const Vector& prob, const LabelVector& target, bool two_sided = true);

double video_level_loss(const VideoPrediction& pred, const LabelVector& target, bool two_sided = true);

double modality_loss(const Vector& audio_prob, const Vector& visual_prob, const LabelVector& audio_target,
                     const LabelVector& visual_target, bool two_sided = true);

/// prob >= threshold is positive; audiovisual = audio AND visual.
TemporalLabels predict_temporal_labels(const SnippetPredictions& snippet, double threshold);

struct TaskTargets {
    LabelVector audio;
    LabelVector visual;
};

struct TaskLoss {
    double video = 0.0;
    double modality = 0.0;
    double total() const { return video + modality; }
};

TaskLoss task_loss(const TaskConfig& config, const TaskForward& forward, const TaskTargets& targets);

/// grad += scale * d(task_loss)/d(params). Returns the unscaled loss.
TaskLoss accumulate_task_gradient(const TaskParams& params, const VideoSample& sample, const TaskForward& forward,
                                  const TaskTargets& targets, double scale, TaskParams& grad);

}  // namespace rlld
