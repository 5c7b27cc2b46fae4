#include "rlld/attention.hpp"

#include <cmath>

namespace rlld {

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

Vector scaled_dot_attention(const Vector& query_row, const Matrix& keys, const Matrix& values, double d) {
    if (keys.cols() != query_row.size() || keys.rows() != values.rows() || keys.rows() == 0 || !(d > 0.0)) {
        throw Error(Error::Kind::shape_mismatch, "scaled_dot_attention: incompatible shapes or d <= 0");
    }
    const Matrix scores = (query_row.transpose() * keys.transpose()) / std::sqrt(d);
    return (softmax_rows(scores) * values).transpose();
}

Attention attend(const Matrix& queries, const Matrix& keys, const Matrix& values, double d) {
    if (keys.cols() != queries.cols() || keys.rows() != values.rows() || keys.rows() == 0 || !(d > 0.0)) {
        throw Error(Error::Kind::shape_mismatch, "attend: incompatible shapes or d <= 0");
    }
    Attention a;
    a.weights = softmax_rows(queries * keys.transpose() / std::sqrt(d));
    a.output = a.weights * values;
    return a;
}

void attend_backward(const Matrix& queries, const Matrix& keys, const Matrix& values, const Matrix& weights,
                     double d, const Matrix& d_output, Matrix& dq, Matrix& dk, Matrix& dv) {
    const double inv_scale = 1.0 / std::sqrt(d);
    dv.noalias() += weights.transpose() * d_output;
    const Matrix d_weights = d_output * values.transpose();
    // Softmax Jacobian per row: dS = A * (dA - rowsum(dA * A)).
    const Eigen::VectorXd row_dot = (d_weights.array() * weights.array()).rowwise().sum();
    const Matrix d_scores =
        (weights.array() * (d_weights.array().colwise() - row_dot.array())).matrix() * inv_scale;
    dq.noalias() += d_scores * keys;
    dk.noalias() += d_scores.transpose() * queries;
}

HybridAttention hybrid_attend(const Matrix& audio, const Matrix& visual) {
    if (audio.cols() != visual.cols() || audio.rows() != visual.rows()) {
        throw Error(Error::Kind::shape_mismatch, "hybrid_attend: audio and visual streams must share shape");
    }
    const double d = static_cast<double>(audio.cols());
    Attention sa = attend(audio, audio, audio, d);
    Attention ca = attend(audio, visual, visual, d);
    Attention sv = attend(visual, visual, visual, d);
    Attention cv = attend(visual, audio, audio, d);

    HybridAttention h;
    h.audio = audio + sa.output + ca.output;
    h.visual = visual + sv.output + cv.output;
    h.self_audio_weights = std::move(sa.weights);
    h.cross_audio_weights = std::move(ca.weights);
    h.self_visual_weights = std::move(sv.weights);
    h.cross_visual_weights = std::move(cv.weights);
    return h;
}

void hybrid_attend_backward(const Matrix& audio, const Matrix& visual, const HybridAttention& fwd,
                            const Matrix& d_audio, const Matrix& d_visual, Matrix& grad_audio,
                            Matrix& grad_visual) {
    const double d = static_cast<double>(audio.cols());
    grad_audio = d_audio;
    grad_visual = d_visual;
    // Self attention uses the stream as query, key and value at once.
    attend_backward(audio, audio, audio, fwd.self_audio_weights, d, d_audio, grad_audio, grad_audio, grad_audio);
    attend_backward(visual, visual, visual, fwd.self_visual_weights, d, d_visual, grad_visual, grad_visual,
                    grad_visual);
    attend_backward(audio, visual, visual, fwd.cross_audio_weights, d, d_audio, grad_audio, grad_visual,
                    grad_visual);
    attend_backward(visual, audio, audio, fwd.cross_visual_weights, d, d_visual, grad_visual, grad_audio,
                    grad_audio);
}

}  // namespace rlld
