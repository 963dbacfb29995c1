#pragma once

#include <vector>

#include "ddf/ops.hpp"
#include "ddf/params.hpp"
#include "ddf/tensor.hpp"

namespace ddf {

// Per-class loss weights alpha_c = N / (K * N_c), from train-split counts.
struct ClassWeights {
    std::vector<double> weights;

    int num_classes() const { return static_cast<int>(weights.size()); }
    double at(int c) const { return weights[static_cast<std::size_t>(c)]; }

    static ClassWeights uniform(int k) { return {std::vector<double>(k, 1.0)}; }
};

inline ClassWeights class_weights(const std::vector<long long>& train_counts) {
    if (train_counts.empty()) throw std::runtime_error("class_weights: no classes");
    long long n = 0;
    for (long long c : train_counts) {
        if (c <= 0) throw std::runtime_error("class_weights: zero-count class");
        n += c;
    }
    const double k = static_cast<double>(train_counts.size());
    ClassWeights w;
    w.weights.reserve(train_counts.size());
    for (long long c : train_counts) w.weights.push_back(static_cast<double>(n) / (k * static_cast<double>(c)));
    return w;
}

inline void check_prob_rows(const Tensor& probs, const char* op) {
    if (probs.ndim() != 2) throw std::runtime_error(std::string(op) + ": expected [N,C] probabilities");
    for (int i = 0; i < probs.shape[0]; ++i) {
        double s = 0.0;
        for (int j = 0; j < probs.shape[1]; ++j) s += probs.at(i, j);
        if (std::abs(s - 1.0) > 1e-6) throw std::runtime_error(std::string(op) + ": probability row does not sum to 1");
    }
}

// Class-weighted focal loss, mean over the batch:
//   -alpha_c * (1 - p_t)^gamma * log(p_t)
// with p_t the probability assigned to the true class, clamped to
// [1e-12, 1] before the log.
inline Tensor focal_loss(const Tensor& probs, const std::vector<int>& targets, const ClassWeights& weights, double gamma) {
    check_prob_rows(probs, "focal_loss");
    if (static_cast<int>(targets.size()) != probs.shape[0]) throw std::runtime_error("focal_loss: one target per row required");
    if (gamma < 0.0) throw std::runtime_error("focal_loss: gamma must be >= 0");
    const int c = probs.shape[1];
    std::vector<double> alpha;
    alpha.reserve(targets.size());
    for (int t : targets) {
        if (t < 0 || t >= c) throw std::runtime_error("focal_loss: target id out of range");
        if (t >= weights.num_classes()) throw std::runtime_error("focal_loss: no weight for target class");
        alpha.push_back(weights.at(t));
    }
    Tensor p_t = ops::clamp(ops::take_per_row(probs, targets), 1e-12, 1.0);
    Tensor log_p = ops::log(p_t);
    Tensor focus = ops::pow_scalar(ops::scalar_add(ops::scalar_mul(p_t, -1.0), 1.0), gamma);
    Tensor alpha_t = Tensor::row(std::move(alpha));
    Tensor per_sample = ops::mul(alpha_t, ops::mul(focus, log_p));
    return ops::neg(ops::mean(per_sample));
}

// (lambda/2) * sum theta^2 over weight matrices; biases excluded.
inline Tensor l2_penalty(const ParamSet& params, double lambda_reg) {
    if (lambda_reg < 0.0) throw std::runtime_error("l2_penalty: lambda must be >= 0");
    std::vector<Tensor> terms;
    for (const auto& e : params.entries()) {
        if (e.is_bias) continue;
        terms.push_back(ops::sum(ops::mul(e.tensor, e.tensor)));
    }
    if (terms.empty() || lambda_reg == 0.0) return Tensor::scalar(0.0);
    return ops::scalar_mul(ops::add_n(terms), lambda_reg / 2.0);
}

inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.ndim() != 1 || target.ndim() != 1 || pred.shape != target.shape) {
        throw std::runtime_error("mse_loss: expected equal-length 1-d tensors");
    }
    Tensor d = ops::sub(pred, target);
    return ops::mean(ops::mul(d, d));
}

}  // namespace ddf
