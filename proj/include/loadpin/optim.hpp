#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "loadpin/nn.hpp"

namespace loadpin::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
};

/// Adam with bias correction over a fixed parameter list. Moment buffers are
/// indexed by position in the list handed to the constructor.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Param<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const Param<T>* p : params_) {
            m_.emplace_back(p->value.size(), 0.0);
            v_.emplace_back(p->value.size(), 0.0);
        }
    }

    /// One update using the gradients currently stored in the params; `t` is
    /// the 1-based step count used for bias correction.
    void step(std::size_t t) {
        if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param<T>& p = *params_[i];
            std::vector<double>& m = m_[i];
            std::vector<double>& v = v_[i];
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const double g = static_cast<double>(p.grad[j]);
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                const double mh = m[j] / c1, vh = v[j] / c2;
                p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
            }
        }
    }

    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    std::vector<Param<T>*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace loadpin::nn
