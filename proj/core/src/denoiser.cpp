#include "rlld/denoiser.hpp"

#include <cmath>

namespace rlld {

void DenoiserConfig::validate() const {
    if (num_classes < 1 || audio_dim < 1 || visual_dim < 1) {
        throw Error(Error::Kind::invalid_config, "denoiser: num_classes and feature dims must be >= 1");
    }
    if (project && hidden_dim < 1) {
        throw Error(Error::Kind::invalid_config, "denoiser: hidden_dim must be >= 1 when projecting");
    }
    if (!project && audio_dim != visual_dim) {
        throw Error(Error::Kind::invalid_config,
                    "denoiser: audio_dim != visual_dim requires project = true for cross attention");
    }
}

std::vector<Matrix*> DenoiserParams::tensors() {
    std::vector<Matrix*> out;
    if (config.project) {
        out.push_back(&proj_audio);
        out.push_back(&proj_visual);
    }
    out.push_back(&head_audio);
    out.push_back(&bias_audio);
    if (!config.share_head) {
        out.push_back(&head_visual);
        out.push_back(&bias_visual);
    }
    return out;
}

std::vector<const Matrix*> DenoiserParams::tensors() const {
    auto mut = const_cast<DenoiserParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> DenoiserParams::tensor_names() const {
    std::vector<std::string> out;
    if (config.project) {
        out.insert(out.end(), {"proj_audio", "proj_visual"});
    }
    out.insert(out.end(), {"head_audio", "bias_audio"});
    if (!config.share_head) {
        out.insert(out.end(), {"head_visual", "bias_visual"});
    }
    return out;
}

DenoiserParams DenoiserParams::zeros_like() const {
    DenoiserParams z = *this;
    for (Matrix* t : z.tensors()) t->setZero();
    return z;
}

namespace {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    DenoiserParams p;
    p.config = config;
    const int c = config.num_classes;
    const int d = config.attention_dim();
    if (config.project) {
        p.proj_audio = uniform_init(config.state_dim(Modality::audio), d, config.state_dim(Modality::audio), rng);
        p.proj_visual = uniform_init(config.state_dim(Modality::visual), d, config.state_dim(Modality::visual), rng);
    }
    p.head_audio = uniform_init(c, d, d, rng);
    p.bias_audio = uniform_init(c, 1, d, rng);
    if (!config.share_head) {
        p.head_visual = uniform_init(c, d, d, rng);
        p.bias_visual = uniform_init(c, 1, d, rng);
    }
    return p;
}

DenoiserState build_states(const VideoSample& sample, bool use_labels) {
    const Eigen::Index t = sample.length();
    const Eigen::Index c = sample.num_classes();
    if (sample.noisy_audio_label.size() != c || sample.noisy_visual_label.size() != c ||
        sample.visual.length() != t) {
        throw Error(Error::Kind::shape_mismatch, "build_states: feature/label dimension mismatch for '" + sample.id + "'");
    }
    auto build = [&](const FeatureSequence& f, const LabelVector& y) {
        Matrix s(t, f.dim() + c);
        s.leftCols(f.dim()) = f.values;
        const Eigen::RowVectorXd label = use_labels ? Eigen::RowVectorXd(y.cast<double>().transpose())
                                                    : Eigen::RowVectorXd::Zero(c);
        s.rightCols(c) = label.replicate(t, 1);
        return s;
    };
    return {build(sample.audio, sample.noisy_audio_label), build(sample.visual, sample.noisy_visual_label)};
}

namespace {

const Matrix& head_for(const DenoiserParams& p, Modality m) {
    return (m == Modality::visual && !p.config.share_head) ? p.head_visual : p.head_audio;
}
const Matrix& bias_for(const DenoiserParams& p, Modality m) {
    return (m == Modality::visual && !p.config.share_head) ? p.bias_visual : p.bias_audio;
}
Matrix& head_for(DenoiserParams& p, Modality m) {
    return (m == Modality::visual && !p.config.share_head) ? p.head_visual : p.head_audio;
}
Matrix& bias_for(DenoiserParams& p, Modality m) {
    return (m == Modality::visual && !p.config.share_head) ? p.bias_visual : p.bias_audio;
}

Vector clamped_sigmoid(const Vector& logits) {
    Vector p(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) p(i) = clamp_probability(sigmoid(logits(i)));
    return p;
}

}  // namespace

PolicyOutput policy_probabilities(const HybridAttention& hidden, const DenoiserParams& params) {
    const Vector pooled_a = hidden.audio.colwise().mean().transpose();
    const Vector pooled_v = hidden.visual.colwise().mean().transpose();
    const Vector za = head_for(params, Modality::audio) * pooled_a + bias_for(params, Modality::audio).col(0);
    const Vector zv = head_for(params, Modality::visual) * pooled_v + bias_for(params, Modality::visual).col(0);
    return {clamped_sigmoid(za), clamped_sigmoid(zv)};
}

DenoiserForward denoiser_forward(const DenoiserParams& params, const DenoiserState& state) {
    const auto& cfg = params.config;
    if (state.audio.cols() != cfg.state_dim(Modality::audio) || state.visual.cols() != cfg.state_dim(Modality::visual)) {
        throw Error(Error::Kind::shape_mismatch, "denoiser_forward: state width does not match config");
    }
    DenoiserForward f;
    if (cfg.project) {
        f.input_audio = state.audio * params.proj_audio;
        f.input_visual = state.visual * params.proj_visual;
    } else {
        f.input_audio = state.audio;
        f.input_visual = state.visual;
    }
    f.hidden = hybrid_attend(f.input_audio, f.input_visual);
    f.pooled_audio = f.hidden.audio.colwise().mean().transpose();
    f.pooled_visual = f.hidden.visual.colwise().mean().transpose();
    f.logits_audio = head_for(params, Modality::audio) * f.pooled_audio + bias_for(params, Modality::audio).col(0);
    f.logits_visual = head_for(params, Modality::visual) * f.pooled_visual + bias_for(params, Modality::visual).col(0);
    f.policy = {clamped_sigmoid(f.logits_audio), clamped_sigmoid(f.logits_visual)};
    return f;
}

ActionMask sample_actions(const PolicyOutput& policy, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const Vector& p) {
        LabelVector a(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) a(i) = unit(rng) < p(i) ? 1 : 0;
        return a;
    };
    ActionMask m;
    m.audio = draw(policy.audio);
    m.visual = draw(policy.visual);
    return m;
}

ActionMask greedy_actions(const PolicyOutput& policy) {
    auto decide = [](const Vector& p) {
        LabelVector a(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) a(i) = p(i) >= 0.5 ? 1 : 0;
        return a;
    };
    return {decide(policy.audio), decide(policy.visual)};
}

RevisedLabels revise_labels(const LabelVector& audio_label, const LabelVector& visual_label, const ActionMask& mask) {
    if (mask.audio.size() != audio_label.size() || mask.visual.size() != visual_label.size()) {
        throw Error(Error::Kind::shape_mismatch, "revise_labels: mask length differs from label length");
    }
    RevisedLabels r;
    r.audio = label_and(audio_label, mask.audio);
    r.visual = label_and(visual_label, mask.visual);
    if (label_or(r.audio, r.visual).sum() == 0) {
        r.audio = audio_label;
        r.visual = visual_label;
        r.degenerate = true;
    }
    return r;
}

double action_log_prob(const Vector& keep_prob, const LabelVector& actions) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < keep_prob.size(); ++i) {
        const double p = clamp_probability(keep_prob(i));
        total += actions(i) ? std::log(p) : std::log(1.0 - p);
    }
    return total;
}

double action_log_prob(const PolicyOutput& policy, const ActionMask& mask) {
    return action_log_prob(policy.audio, mask.audio) + action_log_prob(policy.visual, mask.visual);
}

void accumulate_log_prob_gradient(const DenoiserParams& params, const DenoiserState& state,
                                  const DenoiserForward& fwd, const ActionMask& mask, double audio_weight,
                                  double visual_weight, DenoiserParams& grad) {
    const auto& cfg = params.config;
    const double t = static_cast<double>(state.audio.rows());

    // d/dz [a log p + (1-a) log(1-p)] = a - p inside the clamp, 0 where it saturates.
    auto logit_grad = [](const Vector& logits, const LabelVector& a, double weight) {
        Vector g(logits.size());
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            const double p = sigmoid(logits(i));
            g(i) = (p <= kProbClamp || p >= 1.0 - kProbClamp) ? 0.0 : weight * (static_cast<double>(a(i)) - p);
        }
        return g;
    };
    const Vector ga = logit_grad(fwd.logits_audio, mask.audio, audio_weight);
    const Vector gv = logit_grad(fwd.logits_visual, mask.visual, visual_weight);

    head_for(grad, Modality::audio).noalias() += ga * fwd.pooled_audio.transpose();
    bias_for(grad, Modality::audio).col(0) += ga;
    head_for(grad, Modality::visual).noalias() += gv * fwd.pooled_visual.transpose();
    bias_for(grad, Modality::visual).col(0) += gv;

    if (!cfg.project) return;  // the identity-attention path has no further parameters

    const Eigen::RowVectorXd d_pooled_a = (head_for(params, Modality::audio).transpose() * ga).transpose() / t;
    const Eigen::RowVectorXd d_pooled_v = (head_for(params, Modality::visual).transpose() * gv).transpose() / t;
    const Matrix dh_a = d_pooled_a.replicate(state.audio.rows(), 1);
    const Matrix dh_v = d_pooled_v.replicate(state.visual.rows(), 1);
    Matrix dx_a;
    Matrix dx_v;
    hybrid_attend_backward(fwd.input_audio, fwd.input_visual, fwd.hidden, dh_a, dh_v, dx_a, dx_v);
    grad.proj_audio.noalias() += state.audio.transpose() * dx_a;
    grad.proj_visual.noalias() += state.visual.transpose() * dx_v;
}

}  // namespace rlld
