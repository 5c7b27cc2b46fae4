#include "rlld/optimizer.hpp"

#include <cmath>

namespace rlld {

double Adam::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, bool ascend) {
    if (params.size() != grads.size()) {
        throw Error(Error::Kind::shape_mismatch, "Adam::step: parameter/gradient count mismatch");
    }
    if (m_.empty()) {
        for (const Matrix* p : params) {
            m_.push_back(Matrix::Zero(p->rows(), p->cols()));
            v_.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    } else if (m_.size() != params.size()) {
        throw Error(Error::Kind::shape_mismatch, "Adam::step: tensor list changed between steps");
    }
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double sign = ascend ? 1.0 : -1.0;
    double update_sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = *grads[i];
        if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols()) {
            throw Error(Error::Kind::shape_mismatch, "Adam::step: gradient shape mismatch");
        }
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
        const Matrix update =
            sign * config_.learning_rate * ((m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + config_.epsilon)).matrix();
        *params[i] += update;
        update_sq += update.squaredNorm();
    }
    return std::sqrt(update_sq);
}

bool all_finite(const std::vector<const Matrix*>& tensors) {
    for (const Matrix* t : tensors) {
        if (!t->allFinite()) return false;
    }
    return true;
}

}  // namespace rlld
