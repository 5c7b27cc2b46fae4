#include "rlld/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace rlld {

namespace {

constexpr std::uint64_t kDenoiserSeedSalt = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kTaskSeedSalt = 0xC2B2AE3D27D4EB4FULL;
constexpr std::uint64_t kLoopSeedSalt = 0x165667B19E3779F9ULL;

void accumulate_mean(RewardBundle& acc, const RewardBundle& b, double weight) {
    acc.r1 += weight * b.r1;
    acc.r2 += weight * b.r2;
    acc.r_inter += weight * b.r_inter;
    acc.r_terminal += weight * b.r_terminal;
    acc.total += weight * b.total;
    acc.degenerate = acc.degenerate || b.degenerate;
}

}  // namespace

std::string_view to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::none: return "none";
        case Ablation::no_inter_reward: return "no_inter_reward";
        case Ablation::no_initialized_labels: return "no_initialized_labels";
    }
    return "none";
}

Ablation parse_ablation(std::string_view name) {
    if (name == "none" || name.empty()) return Ablation::none;
    if (name == "no_inter_reward") return Ablation::no_inter_reward;
    if (name == "no_initialized_labels") return Ablation::no_initialized_labels;
    throw Error(Error::Kind::invalid_config, "unknown ablation '" + std::string(name) +
                                                 "' (expected none, no_inter_reward or no_initialized_labels)");
}

std::string_view to_string(LabelSource source) {
    switch (source) {
        case LabelSource::denoised: return "denoised";
        case LabelSource::weak: return "weak";
        case LabelSource::noisy_modality: return "noisy_modality";
        case LabelSource::random_mask: return "random_mask";
    }
    return "denoised";
}

LabelSource parse_label_source(std::string_view name) {
    if (name == "denoised") return LabelSource::denoised;
    if (name == "weak") return LabelSource::weak;
    if (name == "noisy_modality") return LabelSource::noisy_modality;
    if (name == "random_mask") return LabelSource::random_mask;
    throw Error(Error::Kind::invalid_config, "unknown label source '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(Error::Kind::invalid_config, "TrainConfig: " + msg); };
    if (!(denoiser_lr > 0.0) || !(task_lr > 0.0)) fail("learning rates must be positive");
    if (batch_size < 4) fail("batch_size must be at least 4");
    if (episode_length < 1) fail("episode_length must be at least 1");
    if (max_epochs < 0) fail("max_epochs must be non-negative");
    if (episodes_per_epoch < 1) fail("episodes_per_epoch must be at least 1");
    if (!(validation_fraction > 0.0 && validation_fraction <= 1.0)) fail("validation_fraction must lie in (0, 1]");
    if (!(terminal_scale >= 0.0)) fail("terminal_scale must be non-negative");
    if (!(soft_epsilon > 0.0 && soft_epsilon < 1.0)) fail("soft_epsilon must lie in (0, 1)");
    if (!(revised_floor > 0.0)) fail("revised_floor must be positive");
    if (patience < 1) fail("patience must be at least 1");
    if (warm_start_epochs < 0) fail("warm_start_epochs must be non-negative");
    if (task_steps_per_policy_step < 1) fail("task_steps_per_policy_step must be at least 1");
    if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
    if (denoiser_hidden < 1 || task_hidden < 1) fail("hidden sizes must be positive");
}

DenoiserConfig denoiser_config_for(const Dataset& dataset, const TrainConfig& config) {
    const VideoSample& probe = dataset.train.front();
    DenoiserConfig d;
    d.num_classes = dataset.num_classes;
    d.audio_dim = static_cast<int>(probe.audio.dim());
    d.visual_dim = static_cast<int>(probe.visual.dim());
    d.project = config.denoiser_project || d.audio_dim != d.visual_dim;
    d.hidden_dim = config.denoiser_hidden;
    d.share_head = config.denoiser_share_head;
    d.use_labels = config.ablation != Ablation::no_initialized_labels;
    return d;
}

TaskConfig task_config_for(const Dataset& dataset, const TrainConfig& config) {
    const VideoSample& probe = dataset.train.front();
    TaskConfig t;
    t.num_classes = dataset.num_classes;
    t.audio_dim = static_cast<int>(probe.audio.dim());
    t.visual_dim = static_cast<int>(probe.visual.dim());
    t.hidden_dim = config.task_hidden;
    t.two_sided_bce = config.two_sided_bce;
    t.video_loss = config.video_loss;
    t.threshold = config.threshold;
    return t;
}

std::vector<Matrix> reinforce_gradient_estimate(const std::vector<std::vector<Matrix>>& score_gradients,
                                                const std::vector<double>& rewards) {
    if (score_gradients.empty() || score_gradients.size() != rewards.size()) {
        throw Error(Error::Kind::invalid_config,
                    "reinforce_gradient_estimate: need equal, non-empty lists of score gradients and rewards");
    }
    std::vector<Matrix> out;
    out.reserve(score_gradients.front().size());
    for (const Matrix& g : score_gradients.front()) out.push_back(Matrix::Zero(g.rows(), g.cols()));
    const double inv_n = 1.0 / static_cast<double>(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        if (score_gradients[i].size() != out.size()) {
            throw Error(Error::Kind::shape_mismatch, "reinforce_gradient_estimate: ragged score gradients");
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += (rewards[i] * inv_n) * score_gradients[i][k];
    }
    return out;
}

PredictionMap predict_split(const TaskParams& params, const std::vector<VideoSample>& split, double threshold) {
    PredictionMap out;
    for (const VideoSample& s : split) {
        out.emplace(s.id, predict_temporal_labels(task_forward(params, s).snippet, threshold));
    }
    return out;
}

EvaluationReport evaluate_task(const TaskParams& params, const std::vector<VideoSample>& split, double threshold,
                               Aggregation aggregation) {
    return evaluate(predict_split(params, split, threshold), split, aggregation);
}

F1Counts noise_identification(const DenoiserParams& denoiser, const std::vector<VideoSample>& split,
                              RemovalRule rule, bool use_labels, Rng* rng) {
    if (rule == RemovalRule::random_half && rng == nullptr) {
        throw Error(Error::Kind::invalid_config, "noise_identification: the random rule needs an Rng");
    }
    std::bernoulli_distribution coin(0.5);
    F1Counts counts;
    for (const VideoSample& s : split) {
        if (!s.has_segments()) {
            throw Error(Error::Kind::missing_field, "noise_identification: sample '" + s.id + "' has no clean segments");
        }
        PolicyOutput policy;
        if (rule == RemovalRule::greedy_policy) {
            policy = denoiser_forward(denoiser, build_states(s, use_labels)).policy;
        }
        const LabelVector clean_audio = temporal_or(*s.clean_audio_segments);
        const LabelVector clean_visual = temporal_or(*s.clean_visual_segments);
        auto score = [&](const LabelVector& given, const LabelVector& clean, const Vector* keep) {
            for (Eigen::Index c = 0; c < given.size(); ++c) {
                if (given(c) == 0) continue;
                const bool noisy = clean(c) == 0;
                const bool flagged = keep != nullptr ? (*keep)(c) < 0.5 : coin(*rng);
                if (flagged && noisy) ++counts.tp;
                if (flagged && !noisy) ++counts.fp;
                if (!flagged && noisy) ++counts.fn;
            }
        };
        const bool greedy = rule == RemovalRule::greedy_policy;
        score(s.noisy_audio_label, clean_audio, greedy ? &policy.audio : nullptr);
        score(s.noisy_visual_label, clean_visual, greedy ? &policy.visual : nullptr);
    }
    return counts;
}

Trainer::Trainer(const Dataset& dataset, TrainConfig config)
    : dataset_(dataset),
      config_(std::move(config)),
      rng_(config_.seed ^ kLoopSeedSalt),
      denoiser_opt_(AdamConfig{config_.denoiser_lr}),
      task_opt_(AdamConfig{config_.task_lr}) {
    config_.validate();
    if (dataset_.train.empty()) throw Error(Error::Kind::empty_dataset, "training split is empty");
    if (dataset_.validation.empty()) throw Error(Error::Kind::empty_dataset, "validation split is empty");
    denoiser_ = init_denoiser(denoiser_config_for(dataset_, config_), config_.seed ^ kDenoiserSeedSalt);
    task_ = init_task(task_config_for(dataset_, config_), config_.seed ^ kTaskSeedSalt);

    const std::size_t n = dataset_.validation.size();
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(config_.validation_fraction * static_cast<double>(n))), 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng subset_rng(config_.seed ^ kLoopSeedSalt ^ kTaskSeedSalt);
    std::shuffle(order.begin(), order.end(), subset_rng);
    order.resize(k);
    std::sort(order.begin(), order.end());
    validation_subset_ = std::move(order);
    validation_samples_.reserve(k);
    for (std::size_t i : validation_subset_) validation_samples_.push_back(dataset_.validation[i]);
}

void Trainer::check_finite(const char* where) const {
    const bool ok = all_finite(denoiser_.tensors()) && all_finite(task_.tensors());
    if (ok) return;
    std::ostringstream msg;
    msg << "non-finite parameters after " << where << "; denoiser tensors:";
    const auto names = denoiser_.tensor_names();
    const auto tensors = denoiser_.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        msg << ' ' << names[k] << (all_finite({tensors[k]}) ? "=ok" : "=NONFINITE");
    }
    msg << "; task tensors:";
    const auto task_names = task_.tensor_names();
    const auto task_tensors = task_.tensors();
    for (std::size_t k = 0; k < task_tensors.size(); ++k) {
        msg << ' ' << task_names[k] << (all_finite({task_tensors[k]}) ? "=ok" : "=NONFINITE");
    }
    throw Error(Error::Kind::numerical, msg.str());
}

TaskLoss Trainer::task_update(const std::vector<std::size_t>& batch, const std::vector<TaskTargets>& targets,
                              double* update_norm) {
    TaskParams grad = task_.zeros_like();
    TaskLoss mean;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const VideoSample& s = dataset_.train[batch[i]];
        const TaskLoss loss = accumulate_task_gradient(task_, s, task_forward(task_, s), targets[i], scale, grad);
        mean.video += scale * loss.video;
        mean.modality += scale * loss.modality;
    }
    if (!std::isfinite(mean.total()) || !all_finite(std::as_const(grad).tensors())) {
        throw Error(Error::Kind::numerical, "non-finite task loss or gradient (loss " +
                                                std::to_string(mean.total()) + ")");
    }
    const double norm = task_opt_.step(task_.tensors(), std::as_const(grad).tensors());
    if (update_norm != nullptr) *update_norm = norm;
    check_finite("task update");
    return mean;
}

void Trainer::warm_start() {
    std::vector<std::size_t> order(dataset_.train.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::min(config_.batch_size, order.size());
    for (int epoch = 0; epoch < config_.warm_start_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(begin + batch, order.size())));
            std::vector<TaskTargets> targets;
            targets.reserve(idx.size());
            for (std::size_t i : idx) {
                const LabelVector& weak = dataset_.train[i].weak_label;
                targets.push_back({weak, weak});
            }
            task_update(idx, targets);
        }
    }
}

StepTrace Trainer::train_step(const EpisodeBatch& batch, int episode, int step) {
    const std::size_t n = batch.size();
    if (n == 0) throw Error(Error::Kind::invalid_config, "train_step: empty batch");
    const bool use_labels = denoiser_.config.use_labels;
    const bool with_inter = config_.ablation != Ablation::no_inter_reward;
    const bool learn_policy = config_.label_source == LabelSource::denoised;

    std::vector<DenoiserState> states;
    std::vector<DenoiserForward> forwards;
    std::vector<ActionMask> masks;
    std::vector<RevisedLabels> revised;
    std::vector<InterReward> inter_audio(n);
    std::vector<InterReward> inter_visual(n);
    std::vector<TaskTargets> targets;
    states.reserve(n);
    forwards.reserve(n);
    masks.reserve(n);
    revised.reserve(n);
    targets.reserve(n);
    std::bernoulli_distribution coin(0.5);

    // Actions, revision and inter-reward.
    for (std::size_t i = 0; i < n; ++i) {
        const VideoSample& s = dataset_.train[batch.indices[i]];
        const auto c = s.num_classes();
        if (learn_policy) {
            states.push_back(build_states(s, use_labels));
            forwards.push_back(denoiser_forward(denoiser_, states.back()));
            masks.push_back(force_zero_actions_ ? ActionMask{LabelVector::Zero(c), LabelVector::Zero(c)}
                                                : sample_actions(forwards.back().policy, rng_));
        } else if (config_.label_source == LabelSource::random_mask) {
            ActionMask m{LabelVector(c), LabelVector(c)};
            for (Eigen::Index j = 0; j < c; ++j) m.audio(j) = coin(rng_) ? 1 : 0;
            for (Eigen::Index j = 0; j < c; ++j) m.visual(j) = coin(rng_) ? 1 : 0;
            masks.push_back(std::move(m));
        } else {
            masks.push_back({LabelVector::Ones(c), LabelVector::Ones(c)});
        }
        revised.push_back(revise_labels(s.noisy_audio_label, s.noisy_visual_label, masks.back()));
        if (with_inter) {
            inter_audio[i] = inter_reward(soften_labels(s.noisy_audio_label, config_.soft_epsilon),
                                          to_distribution(revised.back().audio, config_.revised_floor),
                                          config_.alpha1, config_.alpha2);
            inter_visual[i] = inter_reward(soften_labels(s.noisy_visual_label, config_.soft_epsilon),
                                           to_distribution(revised.back().visual, config_.revised_floor),
                                           config_.alpha1, config_.alpha2);
        }
        if (config_.label_source == LabelSource::weak) {
            targets.push_back({s.weak_label, s.weak_label});
        } else {
            targets.push_back({revised.back().audio, revised.back().visual});
        }
    }

    // Supervised task update on the revised labels.
    StepTrace trace;
    trace.episode = episode;
    trace.step = step;
    for (int k = 0; k < config_.task_steps_per_policy_step; ++k) {
        trace.loss = task_update(batch.indices, targets, &trace.task_update_norm);
    }

    // Validation and terminal rewards.
    const EvaluationReport report = evaluate(predict_split(task_, validation_samples_, config_.threshold),
                                             validation_samples_);
    trace.segment = report.segment;
    trace.event = report.event;
    const double terminal_audio = terminal_reward(report, Modality::audio, config_.terminal_scale);
    const double terminal_visual = terminal_reward(report, Modality::visual, config_.terminal_scale);

    // Per-sample rewards weight each branch's log-probabilities.
    DenoiserParams grad = denoiser_.zeros_like();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool degenerate = revised[i].degenerate;
        const RewardBundle ra = make_reward_bundle(inter_audio[i], terminal_audio, degenerate);
        const RewardBundle rv = make_reward_bundle(inter_visual[i], terminal_visual, degenerate);
        accumulate_mean(trace.audio, ra, inv_n);
        accumulate_mean(trace.visual, rv, inv_n);
        if (degenerate) ++trace.degenerate_count;
        if (learn_policy) {
            accumulate_log_prob_gradient(denoiser_, states[i], forwards[i], masks[i], ra.total * inv_n,
                                         rv.total * inv_n, grad);
        }
    }
    if (learn_policy) {
        if (!all_finite(std::as_const(grad).tensors())) {
            throw Error(Error::Kind::numerical, "non-finite policy gradient at episode " + std::to_string(episode) +
                                                    " step " + std::to_string(step));
        }
        trace.denoiser_update_norm =
            denoiser_opt_.step(denoiser_.tensors(), std::as_const(grad).tensors(), /*ascend=*/true);
        check_finite("policy update");
    }
    return trace;
}

FitResult Trainer::fit(const StepCallback& on_step) {
    FitResult result;
    result.denoiser = denoiser_;
    result.task = task_;
    result.best_denoiser = denoiser_;
    result.best_task = task_;
    if (config_.max_epochs == 0) return result;

    warm_start();

    const std::size_t batch_size = std::min(config_.batch_size, dataset_.train.size());
    int episode = 0;
    int stale = 0;
    for (int epoch = 1; epoch <= config_.max_epochs; ++epoch) {
        for (int e = 0; e < config_.episodes_per_epoch; ++e) {
            ++episode;
            EpisodeBatch batch;
            for (int step = 1; step <= config_.episode_length; ++step) {
                batch = sample_episode_batch(dataset_.train.size(), batch_size, step == 1 ? nullptr : &batch, rng_);
                StepTrace trace = train_step(batch, episode, step);
                if (on_step) on_step(trace);
                result.traces.push_back(std::move(trace));
            }
        }

        EpochSummary summary;
        summary.epoch = epoch;
        summary.validation = evaluate_task(task_, dataset_.validation, config_.threshold);
        const double score = summary.validation.segment.type;
        summary.improved = score > result.best_score + config_.min_improvement;
        if (score > result.best_score) {
            result.best_score = score;
            result.best_epoch = epoch;
            result.best_denoiser = denoiser_;
            result.best_task = task_;
        }
        stale = summary.improved ? 0 : stale + 1;
        result.epochs.push_back(std::move(summary));
        if (stale >= config_.patience) {
            result.converged = true;
            break;
        }
    }
    result.denoiser = denoiser_;
    result.task = task_;
    return result;
}

}  // namespace rlld
