#pragma once

#include "rlld/common.hpp"

namespace rlld {

struct EvaluationReport;

/// Strictly positive distribution over the C classes.
struct SoftLabel {
    Vector dist;
};

/// Label smoothing: v_c = y_c (1 - eps) + eps / C, then normalized to sum 1.
SoftLabel soften_labels(const LabelVector& y, double epsilon = 0.1);

/// Adds `floor` to every entry and normalizes.
SoftLabel to_distribution(const LabelVector& labels, double floor = 0.01);

struct InterReward {
    double r1 = 0.0;       // exp(-symmetric KL / 2)
    double r2 = 0.0;       // cosine similarity
    double r_inter = 0.0;  // alpha1 r1 + alpha2 r2
};

InterReward inter_reward(const SoftLabel& soft, const SoftLabel& revised, double alpha1 = 0.6, double alpha2 = 0.4);

/// Audio branch: scale * segment-level audio F. Visual branch: scale * event-level visual F.
/// F-scores are fractions in [0, 1].
double terminal_reward(const EvaluationReport& report, Modality branch, double scale = 0.1);

inline constexpr double kDegenerateReward = -1.0;

/// -1 when the action removed every label, r_terminal + r_inter otherwise.
double combine_reward(double r_terminal, double r_inter, bool degenerate);

struct RewardBundle {
    double r1 = 0.0;
    double r2 = 0.0;
    double r_inter = 0.0;
    double r_terminal = 0.0;
    double total = 0.0;
    bool degenerate = false;
};

RewardBundle make_reward_bundle(const InterReward& inter, double r_terminal, bool degenerate);

}  // namespace rlld
