#pragma once

#include <rlld/common.hpp>
#include <rlld/data.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline rlld::Matrix random_matrix(rlld::Rng& rng, long rows, long cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    return rlld::Matrix::NullaryExpr(rows, cols, [&] { return n(rng); });
}

inline rlld::BinaryMatrix random_binary(rlld::Rng& rng, long rows, long cols, double p = 0.4) {
    std::bernoulli_distribution b(p);
    return rlld::BinaryMatrix::NullaryExpr(rows, cols, [&] { return b(rng) ? 1 : 0; });
}

/// Random label vector with at least one positive entry.
inline rlld::LabelVector random_labels(rlld::Rng& rng, long c, double p = 0.5) {
    std::bernoulli_distribution b(p);
    rlld::LabelVector y(c);
    do {
        for (long j = 0; j < c; ++j) y(j) = b(rng) ? 1 : 0;
    } while (y.sum() == 0);
    return y;
}

/// A sample whose modality labels are the temporal OR of random segments.
inline rlld::VideoSample random_sample(rlld::Rng& rng, const std::string& id, long t, long c, long da, long dv,
                                       bool with_segments = true) {
    rlld::VideoSample s;
    s.id = id;
    s.audio = {random_matrix(rng, t, da), rlld::Modality::audio};
    s.visual = {random_matrix(rng, t, dv), rlld::Modality::visual};
    rlld::BinaryMatrix a, v;
    do {
        a = random_binary(rng, t, c);
        v = random_binary(rng, t, c);
    } while (a.sum() + v.sum() == 0);
    s.noisy_audio_label = rlld::temporal_or(a);
    s.noisy_visual_label = rlld::temporal_or(v);
    s.weak_label = rlld::label_or(s.noisy_audio_label, s.noisy_visual_label);
    if (with_segments) {
        s.clean_audio_segments = a;
        s.clean_visual_segments = v;
    }
    return s;
}

/// Relative error with a floor on the magnitude so near-zero gradients are
/// compared absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-2) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of f over every entry of every tensor; returns the
/// maximum relative error against the analytic gradients.
inline double max_gradient_error(const std::vector<rlld::Matrix*>& params, const std::vector<const rlld::Matrix*>& grads,
                                 const std::function<double()>& f, double h = 1e-3) {
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        rlld::Matrix& p = *params[k];
        for (long i = 0; i < p.size(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + h;
            const double up = f();
            p.data()[i] = saved - h;
            const double down = f();
            p.data()[i] = saved;
            worst = std::max(worst, relative_error(grads[k]->data()[i], (up - down) / (2.0 * h)));
        }
    }
    return worst;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rlld_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
