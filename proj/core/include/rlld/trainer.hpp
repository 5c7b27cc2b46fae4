#pragma once

#include "rlld/data.hpp"
#include "rlld/denoiser.hpp"
#include "rlld/metrics.hpp"
#include "rlld/optimizer.hpp"
#include "rlld/rewards.hpp"
#include "rlld/task.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rlld {

enum class Ablation { none, no_inter_reward, no_initialized_labels };

std::string_view to_string(Ablation ablation);
Ablation parse_ablation(std::string_view name);

/// Where the task network's modality targets come from.
enum class LabelSource {
    denoised,        // the policy's revised labels (joint training)
    weak,            // the weak video label for both modalities (no denoiser)
    noisy_modality,  // the given modality labels, untouched
    random_mask,     // labels thinned by a keep-probability-0.5 mask
};

std::string_view to_string(LabelSource source);
LabelSource parse_label_source(std::string_view name);

struct TrainConfig {
    double denoiser_lr = 1e-4;
    double task_lr = 1e-4;
    double alpha1 = 0.6;
    double alpha2 = 0.4;
    std::size_t batch_size = 128;
    int episode_length = 32;
    int max_epochs = 20;
    int episodes_per_epoch = 8;
    double validation_fraction = 0.25;
    std::uint64_t seed = 0;
    Ablation ablation = Ablation::none;
    LabelSource label_source = LabelSource::denoised;
    double terminal_scale = 0.1;
    double soft_epsilon = 0.1;
    double revised_floor = 0.01;
    int patience = 5;
    double min_improvement = 1e-4;
    int warm_start_epochs = 1;
    int task_steps_per_policy_step = 1;
    double threshold = 0.5;

    // Denoiser architecture.
    bool denoiser_project = false;
    int denoiser_hidden = 32;
    bool denoiser_share_head = false;

    // Task architecture and objective.
    int task_hidden = 32;
    bool two_sided_bce = true;
    bool video_loss = true;

    void validate() const;
};

struct StepTrace {
    int episode = 0;  // 1-based, counted across epochs
    int step = 0;     // 1-based within the episode
    RewardBundle audio;   // batch means; total is the mean per-sample reward
    RewardBundle visual;
    int degenerate_count = 0;
    TaskLoss loss;
    LevelScores segment;  // validation subsample
    LevelScores event;
    double denoiser_update_norm = 0.0;
    double task_update_norm = 0.0;
};

struct EpochSummary {
    int epoch = 0;
    EvaluationReport validation;
    bool improved = false;
};

struct FitResult {
    DenoiserParams denoiser;
    TaskParams task;
    DenoiserParams best_denoiser;
    TaskParams best_task;
    double best_score = -1.0;  // validation segment-level Type@AV of the best checkpoint
    int best_epoch = 0;
    std::vector<StepTrace> traces;
    std::vector<EpochSummary> epochs;
    bool converged = false;
};

/// Monte Carlo score-function estimate: (1/N) sum_i R_i * grad log pi(a_i | h_i),
/// with no baseline. Each score gradient is a list of tensors of identical shapes.
std::vector<Matrix> reinforce_gradient_estimate(const std::vector<std::vector<Matrix>>& score_gradients,
                                                const std::vector<double>& rewards);

/// Thresholded per-segment predictions of the task network for every sample.
PredictionMap predict_split(const TaskParams& params, const std::vector<VideoSample>& split, double threshold);

EvaluationReport evaluate_task(const TaskParams& params, const std::vector<VideoSample>& split, double threshold,
                               Aggregation aggregation = Aggregation::micro);

enum class RemovalRule { greedy_policy, random_half };

/// F-score of flagging noisy modality labels (present in the given modality
/// label but absent from the clean segments). Every given (sample, modality,
/// class) label is a candidate; the policy flags it when its keep probability
/// is below 0.5, the random rule flags it with probability 0.5.
F1Counts noise_identification(const DenoiserParams& denoiser, const std::vector<VideoSample>& split,
                              RemovalRule rule, bool use_labels, Rng* rng = nullptr);

class Trainer {
public:
    using StepCallback = std::function<void(const StepTrace&)>;

    Trainer(const Dataset& dataset, TrainConfig config);

    /// One iteration of the joint loop on `batch` (indices into the train split):
    /// sample actions, revise labels, inter-reward, task update, validation,
    /// terminal reward, policy-gradient update.
    StepTrace train_step(const EpisodeBatch& batch, int episode, int step);

    /// Runs warm start plus epochs of episodes until max_epochs or convergence.
    FitResult fit(const StepCallback& on_step = {});

    const DenoiserParams& denoiser() const { return denoiser_; }
    const TaskParams& task() const { return task_; }
    DenoiserParams& denoiser() { return denoiser_; }
    TaskParams& task() { return task_; }
    const TrainConfig& config() const { return config_; }
    const std::vector<std::size_t>& validation_subset() const { return validation_subset_; }

    /// Forces every sampled action mask to all zeros (degenerate-path testing).
    void force_zero_actions(bool on) { force_zero_actions_ = on; }

    /// One supervised task update on the given targets; returns the mean loss.
    TaskLoss task_update(const std::vector<std::size_t>& batch, const std::vector<TaskTargets>& targets,
                         double* update_norm = nullptr);

private:
    void check_finite(const char* where) const;
    void warm_start();

    const Dataset& dataset_;
    TrainConfig config_;
    Rng rng_;
    DenoiserParams denoiser_;
    TaskParams task_;
    Adam denoiser_opt_;
    Adam task_opt_;
    std::vector<std::size_t> validation_subset_;
    std::vector<VideoSample> validation_samples_;
    bool force_zero_actions_ = false;
};

DenoiserConfig denoiser_config_for(const Dataset& dataset, const TrainConfig& config);
TaskConfig task_config_for(const Dataset& dataset, const TrainConfig& config);

}  // namespace rlld
