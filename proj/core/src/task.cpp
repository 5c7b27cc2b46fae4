#include "rlld/task.hpp"

#include <cmath>

namespace rlld {

void TaskConfig::validate() const {
    if (num_classes < 1 || audio_dim < 1 || visual_dim < 1 || hidden_dim < 1) {
        throw Error(Error::Kind::invalid_config, "task: num_classes, feature dims and hidden_dim must be >= 1");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(Error::Kind::invalid_config, "task: threshold must lie in (0, 1)");
    }
}

std::vector<Matrix*> TaskParams::tensors() {
    return {&proj_audio, &proj_audio_bias, &proj_visual, &proj_visual_bias, &classifier,
            &classifier_bias, &temporal, &temporal_bias, &modality, &modality_bias};
}

std::vector<const Matrix*> TaskParams::tensors() const {
    auto mut = const_cast<TaskParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> TaskParams::tensor_names() const {
    return {"proj_audio", "proj_audio_bias", "proj_visual", "proj_visual_bias", "classifier",
            "classifier_bias", "temporal", "temporal_bias", "modality", "modality_bias"};
}

TaskParams TaskParams::zeros_like() const {
    TaskParams z = *this;
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

Matrix sigmoid(const Matrix& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Softmax down each column (over t).
Matrix softmax_cols(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double m = logits.col(c).maxCoeff();
        out.col(c) = (logits.col(c).array() - m).exp();
        out.col(c) /= out.col(c).sum();
    }
    return out;
}

Vector clamp(const Vector& p) {
    return p.unaryExpr([](double v) { return clamp_probability(v); });
}

bool inside_clamp(double p) { return p >= kProbClamp && p <= 1.0 - kProbClamp; }

// d(BCE)/d(raw probability); zero where the clamp saturates.
Vector bce_grad(const Vector& raw, const LabelVector& y, bool two_sided) {
    Vector g(raw.size());
    for (Eigen::Index c = 0; c < raw.size(); ++c) {
        if (!inside_clamp(raw(c))) {
            g(c) = 0.0;
            continue;
        }
        const double p = raw(c);
        g(c) = y(c) ? -1.0 / p : (two_sided ? 1.0 / (1.0 - p) : 0.0);
    }
    return g;
}

}  // namespace

TaskParams init_task(const TaskConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const int h = config.hidden_dim;
    const int c = config.num_classes;
    TaskParams p;
    p.config = config;
    p.proj_audio = uniform_init(config.audio_dim, h, config.audio_dim, rng);
    p.proj_audio_bias = uniform_init(1, h, config.audio_dim, rng);
    p.proj_visual = uniform_init(config.visual_dim, h, config.visual_dim, rng);
    p.proj_visual_bias = uniform_init(1, h, config.visual_dim, rng);
    p.classifier = uniform_init(h, c, h, rng);
    p.classifier_bias = uniform_init(1, c, h, rng);
    p.temporal = uniform_init(h, c, h, rng);
    p.temporal_bias = uniform_init(1, c, h, rng);
    p.modality = uniform_init(h, c, h, rng);
    p.modality_bias = uniform_init(1, c, h, rng);
    return p;
}

Vector mmil_pool(const SnippetPredictions& s) {
    const Matrix ga = s.temporal_audio.cwiseProduct(s.modality_audio);
    const Matrix gv = s.temporal_visual.cwiseProduct(s.modality_visual);
    const Vector num = (ga.cwiseProduct(s.prob_audio) + gv.cwiseProduct(s.prob_visual)).colwise().sum().transpose();
    const Vector den = (ga + gv).colwise().sum().transpose();
    return num.cwiseQuotient(den);
}

TaskForward task_forward(const TaskParams& params, const VideoSample& sample) {
    const auto& cfg = params.config;
    if (sample.audio.dim() != cfg.audio_dim || sample.visual.dim() != cfg.visual_dim) {
        throw Error(Error::Kind::shape_mismatch, "task_forward: feature width does not match config");
    }
    TaskForward f;
    f.input_audio = (sample.audio.values * params.proj_audio).rowwise() + params.proj_audio_bias.row(0);
    f.input_visual = (sample.visual.values * params.proj_visual).rowwise() + params.proj_visual_bias.row(0);
    f.hidden = hybrid_attend(f.input_audio, f.input_visual);

    auto& s = f.snippet;
    s.prob_audio = sigmoid(Matrix((f.hidden.audio * params.classifier).rowwise() + params.classifier_bias.row(0)));
    s.prob_visual = sigmoid(Matrix((f.hidden.visual * params.classifier).rowwise() + params.classifier_bias.row(0)));
    s.temporal_audio = softmax_cols((f.hidden.audio * params.temporal).rowwise() + params.temporal_bias.row(0));
    s.temporal_visual = softmax_cols((f.hidden.visual * params.temporal).rowwise() + params.temporal_bias.row(0));
    const Matrix mod_a = (f.hidden.audio * params.modality).rowwise() + params.modality_bias.row(0);
    const Matrix mod_v = (f.hidden.visual * params.modality).rowwise() + params.modality_bias.row(0);
    // Two-way softmax over {audio, visual} is a sigmoid of the logit difference.
    s.modality_audio = sigmoid(Matrix(mod_a - mod_v));
    s.modality_visual = (1.0 - s.modality_audio.array()).matrix();

    const Matrix ga = s.temporal_audio.cwiseProduct(s.modality_audio);
    const Matrix gv = s.temporal_visual.cwiseProduct(s.modality_visual);
    f.pooling_norm = (ga + gv).colwise().sum().transpose();
    f.video_raw = mmil_pool(s);
    f.video.prob = clamp(f.video_raw);
    f.audio_video_raw = s.temporal_audio.cwiseProduct(s.prob_audio).colwise().sum().transpose();
    f.visual_video_raw = s.temporal_visual.cwiseProduct(s.prob_visual).colwise().sum().transpose();
    f.audio_video = clamp(f.audio_video_raw);
    f.visual_video = clamp(f.visual_video_raw);
    return f;
}

LabelVector union_label(const LabelVector& audio, const LabelVector& visual) {
    if (audio.size() != visual.size()) {
        throw Error(Error::Kind::shape_mismatch, "union_label: length mismatch");
    }
    return label_or(audio, visual);
}

double binary_cross_entropy(const Vector& prob, const LabelVector& target, bool two_sided) {
    if (prob.size() != target.size()) {
        throw Error(Error::Kind::shape_mismatch, "binary_cross_entropy: length mismatch");
    }
    double loss = 0.0;
    for (Eigen::Index c = 0; c < prob.size(); ++c) {
        const double p = clamp_probability(prob(c));
        if (target(c)) {
            loss -= std::log(p);
        } else if (two_sided) {
            loss -= std::log(1.0 - p);
        }
    }
    return loss;
}

double video_level_loss(const VideoPrediction& pred, const LabelVector& target, bool two_sided) {
    return binary_cross_entropy(pred.prob, target, two_sided);
}

double modality_loss(const Vector& audio_prob, const Vector& visual_prob, const LabelVector& audio_target,
                     const LabelVector& visual_target, bool two_sided) {
    return binary_cross_entropy(audio_prob, audio_target, two_sided) +
           binary_cross_entropy(visual_prob, visual_target, two_sided);
}

TemporalLabels predict_temporal_labels(const SnippetPredictions& snippet, double threshold) {
    auto decide = [threshold](const Matrix& p) {
        return p.unaryExpr([threshold](double v) { return v >= threshold ? 1 : 0; }).cast<int>().eval();
    };
    TemporalLabels out;
    out.audio = decide(snippet.prob_audio);
    out.visual = decide(snippet.prob_visual);
    out.audiovisual = segment_and(out.audio, out.visual);
    return out;
}

TaskLoss task_loss(const TaskConfig& config, const TaskForward& f, const TaskTargets& targets) {
    TaskLoss loss;
    if (config.video_loss) {
        loss.video = video_level_loss(f.video, union_label(targets.audio, targets.visual), config.two_sided_bce);
    }
    loss.modality = modality_loss(f.audio_video, f.visual_video, targets.audio, targets.visual, config.two_sided_bce);
    return loss;
}

TaskLoss accumulate_task_gradient(const TaskParams& params, const VideoSample& sample, const TaskForward& f,
                                  const TaskTargets& targets, double scale, TaskParams& grad) {
    const auto& cfg = params.config;
    const TaskLoss loss = task_loss(cfg, f, targets);
    const auto& s = f.snippet;
    const Eigen::Index t_len = s.prob_audio.rows();
    const Eigen::Index n_cls = s.prob_audio.cols();

    const Vector d_video = cfg.video_loss
                               ? Vector(scale * bce_grad(f.video_raw, union_label(targets.audio, targets.visual),
                                                         cfg.two_sided_bce))
                               : Vector(Vector::Zero(n_cls));
    const Vector d_audio_video = scale * bce_grad(f.audio_video_raw, targets.audio, cfg.two_sided_bce);
    const Vector d_visual_video = scale * bce_grad(f.visual_video_raw, targets.visual, cfg.two_sided_bce);

    Matrix d_prob_a(t_len, n_cls), d_prob_v(t_len, n_cls);
    Matrix d_temp_a(t_len, n_cls), d_temp_v(t_len, n_cls);
    Matrix d_mod_a(t_len, n_cls), d_mod_v(t_len, n_cls);
    for (Eigen::Index c = 0; c < n_cls; ++c) {
        const double inv_den = 1.0 / f.pooling_norm(c);
        const double pbar = f.video_raw(c);
        for (Eigen::Index t = 0; t < t_len; ++t) {
            const double ga = s.temporal_audio(t, c) * s.modality_audio(t, c);
            const double gv = s.temporal_visual(t, c) * s.modality_visual(t, c);
            const double dga = d_video(c) * (s.prob_audio(t, c) - pbar) * inv_den;
            const double dgv = d_video(c) * (s.prob_visual(t, c) - pbar) * inv_den;
            d_prob_a(t, c) = d_video(c) * ga * inv_den + d_audio_video(c) * s.temporal_audio(t, c);
            d_prob_v(t, c) = d_video(c) * gv * inv_den + d_visual_video(c) * s.temporal_visual(t, c);
            d_temp_a(t, c) = dga * s.modality_audio(t, c) + d_audio_video(c) * s.prob_audio(t, c);
            d_temp_v(t, c) = dgv * s.modality_visual(t, c) + d_visual_video(c) * s.prob_visual(t, c);
            d_mod_a(t, c) = dga * s.temporal_audio(t, c);
            d_mod_v(t, c) = dgv * s.temporal_visual(t, c);
        }
    }

    // Back through the activations to the per-head logits.
    const Matrix dlogit_a = d_prob_a.cwiseProduct(s.prob_audio.cwiseProduct((1.0 - s.prob_audio.array()).matrix()));
    const Matrix dlogit_v = d_prob_v.cwiseProduct(s.prob_visual.cwiseProduct((1.0 - s.prob_visual.array()).matrix()));
    auto softmax_col_back = [](const Matrix& w, const Matrix& dw) {
        const Eigen::RowVectorXd dot = w.cwiseProduct(dw).colwise().sum();
        return Matrix(w.array() * (dw.rowwise() - dot).array());
    };
    const Matrix dtl_a = softmax_col_back(s.temporal_audio, d_temp_a);
    const Matrix dtl_v = softmax_col_back(s.temporal_visual, d_temp_v);
    const Matrix sig_prime = s.modality_audio.cwiseProduct(s.modality_visual);
    const Matrix dml_a = (d_mod_a - d_mod_v).cwiseProduct(sig_prime);
    const Matrix dml_v = -dml_a;

    const Matrix& ha = f.hidden.audio;
    const Matrix& hv = f.hidden.visual;
    grad.classifier.noalias() += ha.transpose() * dlogit_a + hv.transpose() * dlogit_v;
    grad.classifier_bias += dlogit_a.colwise().sum() + dlogit_v.colwise().sum();
    grad.temporal.noalias() += ha.transpose() * dtl_a + hv.transpose() * dtl_v;
    grad.temporal_bias += dtl_a.colwise().sum() + dtl_v.colwise().sum();
    grad.modality.noalias() += ha.transpose() * dml_a + hv.transpose() * dml_v;
    grad.modality_bias += dml_a.colwise().sum() + dml_v.colwise().sum();

    const Matrix dha = dlogit_a * params.classifier.transpose() + dtl_a * params.temporal.transpose() +
                       dml_a * params.modality.transpose();
    const Matrix dhv = dlogit_v * params.classifier.transpose() + dtl_v * params.temporal.transpose() +
                       dml_v * params.modality.transpose();
    Matrix dxa;
    Matrix dxv;
    hybrid_attend_backward(f.input_audio, f.input_visual, f.hidden, dha, dhv, dxa, dxv);
    grad.proj_audio.noalias() += sample.audio.values.transpose() * dxa;
    grad.proj_audio_bias += dxa.colwise().sum();
    grad.proj_visual.noalias() += sample.visual.values.transpose() * dxv;
    grad.proj_visual_bias += dxv.colwise().sum();
    return loss;
}

}  // namespace rlld
