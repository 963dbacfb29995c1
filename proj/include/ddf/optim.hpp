#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ddf/params.hpp"

namespace ddf {

// Applies param -= lr * grad from the accumulated grad buffers.
class SgdOptimizer {
public:
    explicit SgdOptimizer(double lr) : lr_(lr) {
        if (lr < 0.0) throw std::runtime_error("sgd: negative learning rate");
    }

    void step(ParamSet& params) {
        for (const auto& e : params.entries()) {
            for (std::size_t i = 0; i < e.tensor.data->size(); ++i) {
                (*e.tensor.data)[i] -= lr_ * (*e.tensor.grad)[i];
            }
        }
    }

    double lr() const { return lr_; }

private:
    double lr_;
};

// Adam with bias correction; state is keyed by parameter position, so the
// optimizer must outlive exactly one ParamSet layout.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (lr < 0.0) throw std::runtime_error("adam: negative learning rate");
    }

    void step(ParamSet& params) {
        if (m_.empty()) {
            for (const auto& e : params.entries()) {
                m_.emplace_back(e.tensor.data->size(), 0.0);
                v_.emplace_back(e.tensor.data->size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw std::runtime_error("adam: param layout changed");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t p = 0; p < params.size(); ++p) {
            const Tensor& tensor = params.entry(p).tensor;
            for (std::size_t i = 0; i < tensor.data->size(); ++i) {
                const double g = (*tensor.grad)[i];
                m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g;
                v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g * g;
                const double mhat = m_[p][i] / bc1;
                const double vhat = v_[p][i] / bc2;
                (*tensor.data)[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    double lr() const { return lr_; }

private:
    double lr_;
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace ddf
