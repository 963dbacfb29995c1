#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "ddf/ops.hpp"
#include "ddf/params.hpp"
#include "ddf/rng.hpp"
#include "ddf/tensor.hpp"

namespace ddf {

// Variational network q(b|a): two two-layer MLPs mapping a -> mean and
// log-variance of a diagonal Gaussian over b. Log-variance is clamped to
// [-10, 10] before any density evaluation.
class ClubEstimator {
public:
    static constexpr double kLogvarLo = -10.0;
    static constexpr double kLogvarHi = 10.0;

    ClubEstimator(int a_dim, int b_dim, int hidden, Rng& rng) : a_dim_(a_dim), b_dim_(b_dim) {
        params_.matrix("mu_w1", a_dim, hidden, rng);
        params_.bias("mu_b1", hidden);
        params_.matrix("mu_w2", hidden, b_dim, rng);
        params_.bias("mu_b2", b_dim);
        params_.matrix("lv_w1", a_dim, hidden, rng);
        params_.bias("lv_b1", hidden);
        params_.matrix("lv_w2", hidden, b_dim, rng);
        params_.bias("lv_b2", b_dim);
    }

    int a_dim() const { return a_dim_; }
    int b_dim() const { return b_dim_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // [N, a_dim] -> ([N, b_dim], [N, b_dim]); tracked when parameters (or
    // inputs) require grad.
    Tensor mu_graph(const Tensor& a) const { return head(a, "mu", params_); }
    Tensor logvar_graph(const Tensor& a) const {
        return ops::clamp(head(a, "lv", params_), kLogvarLo, kLogvarHi);
    }

    // Evaluation path: same arithmetic on detached weights, so nothing is
    // recorded regardless of how the batch tensors are flagged.
    void forward_plain(const Tensor& a, Tensor* mu, Tensor* logvar) const {
        Tensor in = ops::detach(a);
        *mu = head_with(in, ops::detach(params_.get("mu_w1")), ops::detach(params_.get("mu_b1")),
                        ops::detach(params_.get("mu_w2")), ops::detach(params_.get("mu_b2")));
        *logvar = ops::clamp(head_with(in, ops::detach(params_.get("lv_w1")), ops::detach(params_.get("lv_b1")),
                                       ops::detach(params_.get("lv_w2")), ops::detach(params_.get("lv_b2"))),
                             kLogvarLo, kLogvarHi);
    }

private:
    static Tensor head_with(const Tensor& a, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2) {
        if (a.ndim() != 2) throw std::runtime_error("club: expected [N, a_dim] batch");
        Tensor h = ops::relu(ops::add_rowwise(ops::matmul(a, w1), b1));
        return ops::add_rowwise(ops::matmul(h, w2), b2);
    }

    Tensor head(const Tensor& a, const std::string& prefix, const ParamSet& p) const {
        return head_with(a, p.get(prefix + "_w1"), p.get(prefix + "_b1"), p.get(prefix + "_w2"), p.get(prefix + "_b2"));
    }

    int a_dim_, b_dim_;
    ParamSet params_;
};

namespace detail {
inline double gaussian_log_density_row(const Tensor& mu, const Tensor& lv, int mu_row, const Tensor& b, int b_row) {
    const int d = mu.shape[1];
    double s = -0.5 * d * std::log(2.0 * std::numbers::pi);
    for (int j = 0; j < d; ++j) {
        const double diff = b.at(b_row, j) - mu.at(mu_row, j);
        const double l = lv.at(mu_row, j);
        s += -0.5 * l - 0.5 * diff * diff * std::exp(-l);
    }
    return s;
}
}  // namespace detail

// log q(b|a) for a single pair, evaluated without building a graph.
inline double log_density(const std::vector<double>& a, const std::vector<double>& b, const ClubEstimator& est) {
    if (static_cast<int>(a.size()) != est.a_dim() || static_cast<int>(b.size()) != est.b_dim()) {
        throw std::runtime_error("log_density: dimension mismatch with estimator");
    }
    Tensor a_t = Tensor::from({1, est.a_dim()}, a);
    Tensor b_t = Tensor::from({1, est.b_dim()}, b);
    Tensor mu, lv;
    est.forward_plain(a_t, &mu, &lv);
    const double v = detail::gaussian_log_density_row(mu, lv, 0, b_t, 0);
    if (!std::isfinite(v)) throw std::runtime_error("log_density: non-finite result");
    return v;
}

// The two Eq-style reductions over a matrix of pairwise log-densities
// D[i][j] = log q(b_j | a_i). Split out so tests can drive them with stubbed
// densities.
inline double vclub_combine(const std::vector<std::vector<double>>& densities) {
    const std::size_t n = densities.size();
    if (n == 0) throw std::runtime_error("vclub: empty batch");
    double diag = 0.0, all = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (densities[i].size() != n) throw std::runtime_error("vclub: density matrix not square");
        diag += densities[i][i];
        for (std::size_t j = 0; j < n; ++j) all += densities[i][j];
    }
    return diag / static_cast<double>(n) - all / (static_cast<double>(n) * static_cast<double>(n));
}

inline double loglik_combine(const std::vector<std::vector<double>>& densities) {
    const std::size_t n = densities.size();
    if (n == 0) throw std::runtime_error("loglik: empty batch");
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += densities[i][i];
    return diag / static_cast<double>(n);
}

inline std::vector<std::vector<double>> density_matrix(const Tensor& a_batch, const Tensor& b_batch, const ClubEstimator& est) {
    if (a_batch.ndim() != 2 || b_batch.ndim() != 2 || a_batch.shape[0] != b_batch.shape[0]) {
        throw std::runtime_error("club: a/b batches must pair row for row");
    }
    if (a_batch.shape[1] != est.a_dim() || b_batch.shape[1] != est.b_dim()) {
        throw std::runtime_error("club: dimension mismatch with estimator");
    }
    const int n = a_batch.shape[0];
    Tensor mu, lv;
    est.forward_plain(a_batch, &mu, &lv);
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d[i][j] = detail::gaussian_log_density_row(mu, lv, i, b_batch, j);
    return d;
}

// (1/N^2) sum_i sum_j [log q(b_i|a_i) - log q(b_j|a_i)]
inline double vclub(const Tensor& a_batch, const Tensor& b_batch, const ClubEstimator& est) {
    return vclub_combine(density_matrix(a_batch, b_batch, est));
}

// (1/N) sum_i log q(b_i|a_i)
inline double estimator_loglik(const Tensor& a_batch, const Tensor& b_batch, const ClubEstimator& est) {
    return loglik_combine(density_matrix(a_batch, b_batch, est));
}

// Graph of per-row log q(b_i|a_i), for estimator training.
inline Tensor loglik_rows_graph(const Tensor& a_batch, const Tensor& b_batch, const ClubEstimator& est) {
    const int d = est.b_dim();
    Tensor mu = est.mu_graph(a_batch);
    Tensor lv = est.logvar_graph(a_batch);
    Tensor diff = ops::sub(b_batch, mu);
    Tensor weighted = ops::mul(ops::mul(diff, diff), ops::exp(ops::neg(lv)));
    Tensor per_row = ops::add(ops::row_sum(lv), ops::row_sum(weighted));
    return ops::scalar_add(ops::scalar_mul(per_row, -0.5), -0.5 * d * std::log(2.0 * std::numbers::pi));
}

// Scalar graph of the vCLUB double sum; the differentiable model-side term.
inline Tensor vclub_graph(const Tensor& a_batch, const Tensor& b_batch, const ClubEstimator& est) {
    if (a_batch.shape[0] != b_batch.shape[0]) throw std::runtime_error("vclub: a/b batches must pair row for row");
    const int n = a_batch.shape[0];
    const int d = est.b_dim();
    Tensor mu = est.mu_graph(a_batch);
    Tensor lv = est.logvar_graph(a_batch);
    Tensor ones = Tensor::from({n}, std::vector<double>(n, 1.0));
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (int i = 0; i < n; ++i) {
        Tensor mu_i = ops::slice_row(mu, i);
        Tensor lv_i = ops::slice_row(lv, i);
        Tensor diff = ops::add_rowwise(b_batch, ops::neg(mu_i));
        Tensor weighted = ops::row_sum(ops::mul_rowwise(ops::mul(diff, diff), ops::exp(ops::neg(lv_i))));
        Tensor lv_sum = ops::reshape(ops::outer(ones, ops::sum(lv_i)), {n});
        rows.push_back(ops::scalar_add(ops::scalar_mul(ops::add(lv_sum, weighted), -0.5), -0.5 * d * std::log(2.0 * std::numbers::pi)));
    }
    Tensor dmat = ops::stack_rows(rows);  // D[i][j] = log q(b_j | a_i)
    std::vector<int> diag_idx(n);
    for (int i = 0; i < n; ++i) diag_idx[i] = i;
    Tensor diag = ops::take_per_row(dmat, diag_idx);
    return ops::sub(ops::mean(diag), ops::mean(dmat));
}

struct MiLoss {
    double model_term;      // vclub(concat(S_a,S_b), S_c), the lambda-scaled loss term
    double estimator_term;  // -loglik, minimized when fitting the estimator
};

inline MiLoss mi_loss(const Tensor& s_a, const Tensor& s_b, const Tensor& s_c, const ClubEstimator& est) {
    Tensor ab = ops::concat_cols({s_a, s_b});
    auto d = density_matrix(ops::detach(ab), ops::detach(s_c), est);
    return {vclub_combine(d), -loglik_combine(d)};
}

inline Tensor mi_model_term_graph(const Tensor& s_a, const Tensor& s_b, const Tensor& s_c, const ClubEstimator& est) {
    return vclub_graph(ops::concat_cols({s_a, s_b}), s_c, est);
}

// One plain gradient-ascent step on the estimator's log-likelihood. Only
// estimator parameters move; inputs are detached before the graph is built.
inline void estimator_update(const Tensor& a_batch, const Tensor& b_batch, ClubEstimator& est, double lr) {
    if (lr < 0.0) throw std::runtime_error("estimator_update: negative learning rate");
    est.params().zero_grad();
    Tensor loglik = ops::mean(loglik_rows_graph(ops::detach(a_batch), ops::detach(b_batch), est));
    backward(loglik);
    for (const auto& e : est.params().entries()) {
        for (std::size_t i = 0; i < e.tensor.data->size(); ++i) {
            const double g = (*e.tensor.grad)[i];
            if (!std::isfinite(g)) throw std::runtime_error("estimator_update: non-finite gradient");
            (*e.tensor.data)[i] += lr * g;  // ascent
        }
    }
    est.params().zero_grad();
}

}  // namespace ddf
