#pragma once

#include "rlld/common.hpp"

namespace rlld {

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// softmax(query_row . keys^T / sqrt(d)) . values for a single query row.
Vector scaled_dot_attention(const Vector& query_row, const Matrix& keys, const Matrix& values, double d);

struct Attention {
    Matrix output;   // rows(queries) x cols(values)
    Matrix weights;  // rows(queries) x rows(keys), each row on the simplex
};

/// Batched form of scaled_dot_attention over all query rows.
Attention attend(const Matrix& queries, const Matrix& keys, const Matrix& values, double d);

/// Accumulates the gradients of <d_output, attend(q, k, v).output> into dq, dk, dv.
/// `weights` must be the weights returned by the forward call.
void attend_backward(const Matrix& queries, const Matrix& keys, const Matrix& values, const Matrix& weights,
                     double d, const Matrix& d_output, Matrix& dq, Matrix& dk, Matrix& dv);

/// One hybrid attention block over two equally wide streams:
///   h_a = x_a + att(x_a, x_a, x_a) + att(x_a, x_v, x_v)
///   h_v = x_v + att(x_v, x_v, x_v) + att(x_v, x_a, x_a)
/// with scale dimension equal to the stream width.
struct HybridAttention {
    Matrix audio;
    Matrix visual;
    Matrix self_audio_weights;
    Matrix cross_audio_weights;   // audio queries over visual keys
    Matrix self_visual_weights;
    Matrix cross_visual_weights;  // visual queries over audio keys
};

HybridAttention hybrid_attend(const Matrix& audio, const Matrix& visual);

/// Gradients of <d_audio, h_a> + <d_visual, h_v> with respect to the inputs.
void hybrid_attend_backward(const Matrix& audio, const Matrix& visual, const HybridAttention& forward,
                            const Matrix& d_audio, const Matrix& d_visual, Matrix& grad_audio,
                            Matrix& grad_visual);

}  // namespace rlld
