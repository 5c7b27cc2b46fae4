#include "rlld/rewards.hpp"

#include "rlld/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace rlld {

SoftLabel soften_labels(const LabelVector& y, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0) || y.size() == 0) {
        throw Error(Error::Kind::invalid_config, "soften_labels: epsilon must lie in (0, 1) and C >= 1");
    }
    const double c = static_cast<double>(y.size());
    Vector v = y.cast<double>() * (1.0 - epsilon);
    v.array() += epsilon / c;
    return {v / v.sum()};
}

SoftLabel to_distribution(const LabelVector& labels, double floor) {
    if (!(floor > 0.0) || labels.size() == 0) {
        throw Error(Error::Kind::invalid_config, "to_distribution: floor must be positive and C >= 1");
    }
    Vector v = labels.cast<double>();
    v.array() += floor;
    return {v / v.sum()};
}

InterReward inter_reward(const SoftLabel& soft, const SoftLabel& revised, double alpha1, double alpha2) {
    const Vector& a = soft.dist;
    const Vector& b = revised.dist;
    if (a.size() != b.size()) {
        throw Error(Error::Kind::shape_mismatch, "inter_reward: distribution length mismatch");
    }
    double kl_ab = 0.0;
    double kl_ba = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        kl_ab += a(j) * std::log(a(j) / b(j));
        kl_ba += b(j) * std::log(b(j) / a(j));
    }
    InterReward r;
    r.r1 = std::exp(-(kl_ab + kl_ba) / 2.0);
    if (a == b) {
        r.r2 = 1.0;
    } else {
        r.r2 = std::min(1.0, a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm()));
    }
    r.r_inter = alpha1 * r.r1 + alpha2 * r.r2;
    return r;
}

double terminal_reward(const EvaluationReport& report, Modality branch, double scale) {
    return branch == Modality::audio ? scale * report.segment.audio : scale * report.event.visual;
}

double combine_reward(double r_terminal, double r_inter, bool degenerate) {
    return degenerate ? kDegenerateReward : r_terminal + r_inter;
}

RewardBundle make_reward_bundle(const InterReward& inter, double r_terminal, bool degenerate) {
    RewardBundle b;
    b.r1 = inter.r1;
    b.r2 = inter.r2;
    b.r_inter = inter.r_inter;
    b.r_terminal = r_terminal;
    b.degenerate = degenerate;
    b.total = combine_reward(r_terminal, inter.r_inter, degenerate);
    return b;
}

}  // namespace rlld
