#pragma once

#include <cmath>
#include <vector>

#include "cassi/error.hpp"
#include "cassi/layers.hpp"

namespace cassi {

// Adam with bias correction. Blocks marked non-trainable keep slots (so the
// block list stays aligned) but are never updated.
class Adam {
public:
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit Adam(double learning_rate = 1e-3) : lr(learning_rate) {}

    void attach(const std::vector<ParamBlock>& blocks) {
        m_.clear();
        v_.clear();
        for (const auto& b : blocks) {
            m_.emplace_back(b.n, 0.0);
            v_.emplace_back(b.n, 0.0);
        }
        t_ = 0;
    }

    void step(const std::vector<ParamBlock>& blocks) {
        require(blocks.size() == m_.size(), "adam: step before attach, or block list changed");
        ++t_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& b = blocks[k];
            if (!b.trainable) continue;
            require(m_[k].size() == b.n, "adam: block size changed since attach");
            double* m = m_[k].data();
            double* v = v_[k].data();
            double rate = lr * b.lr_scale;
            for (std::size_t i = 0; i < b.n; ++i) {
                double g = b.g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                b.w[i] -= rate * mhat / (std::sqrt(vhat) + epsilon);
            }
        }
    }

    long steps() const { return t_; }

private:
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

} // namespace cassi
