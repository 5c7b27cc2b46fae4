#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rlld {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Binary event-label vector of length C (entries 0 or 1).
using LabelVector = Eigen::VectorXi;

/// Binary T x C matrix of per-segment event decisions.
using BinaryMatrix = Eigen::MatrixXi;

using Rng = std::mt19937_64;

enum class Modality { audio, visual };

inline constexpr std::string_view to_string(Modality m) {
    return m == Modality::audio ? "audio" : "visual";
}

/// Lower/upper clamp applied to every probability that feeds a logarithm.
inline constexpr double kProbClamp = 1e-6;

inline double clamp_probability(double p) {
    return p < kProbClamp ? kProbClamp : (p > 1.0 - kProbClamp ? 1.0 - kProbClamp : p);
}

class Error : public std::runtime_error {
public:
    enum class Kind {
        invalid_config,
        empty_dataset,
        io,
        parse,
        shape_mismatch,
        missing_field,
        numerical,
    };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline LabelVector label_or(const LabelVector& a, const LabelVector& b) {
    return a.binaryExpr(b, [](int x, int y) { return (x != 0 || y != 0) ? 1 : 0; });
}

inline LabelVector label_and(const LabelVector& a, const LabelVector& b) {
    return a.binaryExpr(b, [](int x, int y) { return (x != 0 && y != 0) ? 1 : 0; });
}

inline BinaryMatrix segment_and(const BinaryMatrix& a, const BinaryMatrix& b) {
    return a.binaryExpr(b, [](int x, int y) { return (x != 0 && y != 0) ? 1 : 0; });
}

/// Video-level label as the temporal OR of a T x C segment matrix.
inline LabelVector temporal_or(const BinaryMatrix& segments) {
    LabelVector out = LabelVector::Zero(segments.cols());
    for (Eigen::Index c = 0; c < segments.cols(); ++c) {
        out(c) = segments.col(c).maxCoeff() > 0 ? 1 : 0;
    }
    return out;
}

}  // namespace rlld
