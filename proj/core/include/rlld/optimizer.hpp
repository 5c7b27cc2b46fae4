#pragma once

#include "rlld/common.hpp"

#include <vector>

namespace rlld {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and keyed by tensor position, so a given instance must always be stepped
/// with the same tensor list.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    /// Descends by default; `ascend` flips the update sign for reward maximization.
    /// Returns the L2 norm of the applied update.
    double step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, bool ascend = false);

    const AdamConfig& config() const { return config_; }
    long steps() const { return t_; }

private:
    AdamConfig config_;
    long t_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

/// True when every entry of every tensor is finite.
bool all_finite(const std::vector<const Matrix*>& tensors);

}  // namespace rlld
