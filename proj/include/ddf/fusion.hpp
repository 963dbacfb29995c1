#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ddf/club.hpp"
#include "ddf/losses.hpp"
#include "ddf/ops.hpp"
#include "ddf/params.hpp"
#include "ddf/rng.hpp"

namespace ddf {

enum class TaskKind { classification, regression };

struct FusionConfig {
    int d_in_a = 0;
    int d_in_b = 0;
    int n_tokens = 8;
    int d_tok = 16;
    int d_common = 64;
    int d_specific = 64;
    int d_hidden = 64;
    double lambda = 0.1;
    TaskKind task = TaskKind::classification;
    int n_classes = 2;
    bool temporal = false;
    int window = 3;

    // test-mode reductions
    bool ablate_attention = false;  // attention blocks become plain token pooling
    bool ablate_specific = false;   // h_a, h_b dropped from the fused vector

    int encoded_width() const { return n_tokens * d_tok; }
    int output_dim() const { return task == TaskKind::classification ? n_classes : 1; }
    int head_input_dim() const { return ablate_specific ? d_common : 2 * d_hidden + d_common; }

    void validate() const {
        if (d_in_a <= 0 || d_in_b <= 0) throw std::runtime_error("fusion config: input dims must be positive");
        if (n_tokens < 1 || d_tok < 1) throw std::runtime_error("fusion config: token layout must be positive");
        if (d_common < 1 || d_specific < 1 || d_hidden < 1) throw std::runtime_error("fusion config: widths must be positive");
        if (lambda < 0.0 || lambda > 1.0) throw std::runtime_error("fusion config: lambda must lie in [0,1]");
        if (window < 1) throw std::runtime_error("fusion config: window must be >= 1");
        if (task == TaskKind::classification && n_classes < 2) throw std::runtime_error("fusion config: need at least two classes");
    }
};

struct FusionOutputs {
    Tensor y;    // [N, n_classes] logits or [N, 1] values
    Tensor s_a;  // [N, d_specific]
    Tensor s_b;  // [N, d_specific]
    Tensor s_c;  // [N, d_common]
};

// Per-sample pooled outer product, reshaped to a token matrix for the
// common-information branch: C = mean(Z_a) (x) mean(Z_b), [d_tok x d_tok].
inline Tensor joint_kronecker(const Tensor& z_a, const Tensor& z_b) {
    return ops::outer(ops::col_mean(z_a), ops::col_mean(z_b));
}

class FusionModel {
public:
    FusionModel(FusionConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build_encoder('a', cfg_.d_in_a, rng);
        build_encoder('b', cfg_.d_in_b, rng);
        build_self_attention('a', rng);
        build_self_attention('b', rng);
        build_cross_attention(rng);

        params_.matrix("f_a_w", cfg_.d_specific, cfg_.d_hidden, rng);
        params_.bias("f_a_b", cfg_.d_hidden);
        params_.matrix("f_b_w", cfg_.d_specific, cfg_.d_hidden, rng);
        params_.bias("f_b_b", cfg_.d_hidden);
        params_.matrix("g1_w", cfg_.head_input_dim(), cfg_.d_hidden, rng);
        params_.bias("g1_b", cfg_.d_hidden);
        params_.matrix("g2_w", cfg_.d_hidden, cfg_.output_dim(), rng);
        params_.bias("g2_b", cfg_.output_dim());
    }

    const FusionConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // One sample -> [n_tokens, d_tok]. Non-temporal input is [d_in]; temporal
    // input is [window, d_in], run through two shared-per-timestep dense
    // blocks before the tokenizing layer.
    Tensor encode(const Tensor& x, char which) const {
        const std::string m(1, which);
        const int d_in = which == 'a' ? cfg_.d_in_a : cfg_.d_in_b;
        Tensor flat;
        if (cfg_.temporal) {
            if (x.ndim() != 2 || x.shape[0] != cfg_.window || x.shape[1] != d_in) {
                throw std::runtime_error("encode: expected [window, d_in] input");
            }
            Tensor h1 = ops::relu(ops::add_rowwise(ops::matmul(x, params_.get("t" + m + "1_w")), params_.get("t" + m + "1_b")));
            Tensor h2 = ops::relu(ops::add_rowwise(ops::matmul(h1, params_.get("t" + m + "2_w")), params_.get("t" + m + "2_b")));
            flat = ops::reshape(h2, {cfg_.window * cfg_.d_tok});
        } else {
            if (x.ndim() != 1 || x.shape[0] != d_in) throw std::runtime_error("encode: expected [d_in] input");
            flat = x;
        }
        Tensor enc = ops::relu(ops::add(ops::vecmat(flat, params_.get("enc_" + m + "_w")), params_.get("enc_" + m + "_b")));
        return ops::reshape(enc, {cfg_.n_tokens, cfg_.d_tok});
    }

    // Single-head scaled dot-product attention over tokens, mean-pooled,
    // projected to d_specific.
    Tensor self_attention(const Tensor& z, char which) const {
        const std::string p = std::string("sa_") + which;
        Tensor pooled;
        if (cfg_.ablate_attention) {
            pooled = ops::col_mean(z);
        } else {
            Tensor q = ops::add_rowwise(ops::matmul(z, params_.get(p + "_wq")), params_.get(p + "_bq"));
            Tensor k = ops::add_rowwise(ops::matmul(z, params_.get(p + "_wk")), params_.get(p + "_bk"));
            Tensor v = ops::add_rowwise(ops::matmul(z, params_.get(p + "_wv")), params_.get(p + "_bv"));
            pooled = ops::col_mean(attend(q, k, v));
        }
        return ops::add(ops::vecmat(pooled, params_.get(p + "_wo")), params_.get(p + "_bo"));
    }

    // Query from the joint stream; keys and values are elementwise sums of
    // the three streams' projections after resampling every stream to
    // n_tokens rows of width d_tok.
    Tensor cross_attention_common(const Tensor& c_tokens, const Tensor& z_a, const Tensor& z_b) const {
        if (c_tokens.ndim() != 2 || c_tokens.shape[0] != cfg_.d_tok || c_tokens.shape[1] != cfg_.d_tok) {
            throw std::runtime_error("cross_attention: joint stream must be [d_tok, d_tok]");
        }
        Tensor pooled;
        if (cfg_.ablate_attention) {
            pooled = ops::col_mean(c_tokens);
        } else {
            Tensor sc = ops::matmul(params_.get("cx_lc"), c_tokens);  // [t, d_tok]
            Tensor sa = ops::matmul(params_.get("cx_la"), z_a);
            Tensor sb = ops::matmul(params_.get("cx_lb"), z_b);
            Tensor q = ops::add_rowwise(ops::matmul(sc, params_.get("cx_wq")), params_.get("cx_bq"));
            Tensor k = ops::add_n({ops::add_rowwise(ops::matmul(sc, params_.get("cx_wk_c")), params_.get("cx_bk_c")),
                                   ops::add_rowwise(ops::matmul(sa, params_.get("cx_wk_a")), params_.get("cx_bk_a")),
                                   ops::add_rowwise(ops::matmul(sb, params_.get("cx_wk_b")), params_.get("cx_bk_b"))});
            Tensor v = ops::add_n({ops::add_rowwise(ops::matmul(sc, params_.get("cx_wv_c")), params_.get("cx_bv_c")),
                                   ops::add_rowwise(ops::matmul(sa, params_.get("cx_wv_a")), params_.get("cx_bv_a")),
                                   ops::add_rowwise(ops::matmul(sb, params_.get("cx_wv_b")), params_.get("cx_bv_b"))});
            pooled = ops::col_mean(attend(q, k, v));
        }
        return ops::add(ops::vecmat(pooled, params_.get("cx_wo")), params_.get("cx_bo"));
    }

    // h_a = relu(f_a(S_a)), h_b likewise; h_final = concat(h_a, S_c, h_b);
    // y = g(h_final) with one hidden relu layer.
    std::pair<Tensor, Tensor> dense_fusion_head(const Tensor& s_a, const Tensor& s_b, const Tensor& s_c) const {
        Tensor h_final;
        if (cfg_.ablate_specific) {
            h_final = s_c;
        } else {
            Tensor h_a = ops::relu(ops::add(ops::vecmat(s_a, params_.get("f_a_w")), params_.get("f_a_b")));
            Tensor h_b = ops::relu(ops::add(ops::vecmat(s_b, params_.get("f_b_w")), params_.get("f_b_b")));
            h_final = ops::concat({h_a, s_c, h_b});
        }
        Tensor g1 = ops::relu(ops::add(ops::vecmat(h_final, params_.get("g1_w")), params_.get("g1_b")));
        Tensor y = ops::add(ops::vecmat(g1, params_.get("g2_w")), params_.get("g2_b"));
        return {h_final, y};
    }

    // Batched composition. Non-temporal batches are [N, d_in]; temporal
    // batches are [N, window*d_in] with row-major [window, d_in] per sample.
    FusionOutputs forward(const Tensor& x_a, const Tensor& x_b) const {
        if (x_a.ndim() != 2 || x_b.ndim() != 2 || x_a.shape[0] != x_b.shape[0]) {
            throw std::runtime_error("fusion forward: modality batches must pair row for row");
        }
        const int n = x_a.shape[0];
        if (n < 1) throw std::runtime_error("fusion forward: empty batch");
        std::vector<Tensor> ys, sas, sbs, scs;
        ys.reserve(n);
        sas.reserve(n);
        sbs.reserve(n);
        scs.reserve(n);
        for (int i = 0; i < n; ++i) {
            Tensor z_a = encode(sample_input(x_a, i, cfg_.d_in_a), 'a');
            Tensor z_b = encode(sample_input(x_b, i, cfg_.d_in_b), 'b');
            Tensor s_a = self_attention(z_a, 'a');
            Tensor s_b = self_attention(z_b, 'b');
            Tensor s_c = cross_attention_common(joint_kronecker(z_a, z_b), z_a, z_b);
            auto [h_final, y] = dense_fusion_head(s_a, s_b, s_c);
            ys.push_back(y);
            sas.push_back(s_a);
            sbs.push_back(s_b);
            scs.push_back(s_c);
        }
        return {ops::stack_rows(ys), ops::stack_rows(sas), ops::stack_rows(sbs), ops::stack_rows(scs)};
    }

private:
    Tensor sample_input(const Tensor& batch, int row, int d_in) const {
        Tensor flat = ops::slice_row(batch, row);
        if (!cfg_.temporal) return flat;
        if (batch.shape[1] != cfg_.window * d_in) throw std::runtime_error("fusion forward: temporal batch width must be window*d_in");
        return ops::reshape(flat, {cfg_.window, d_in});
    }

    static Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(k.shape[1]));
        Tensor weights = ops::softmax(ops::scalar_mul(ops::matmul(q, ops::transpose(k)), scale));
        return ops::matmul(weights, v);
    }

    void build_encoder(char which, int d_in, Rng& rng) {
        const std::string m(1, which);
        int flat_in = d_in;
        if (cfg_.temporal) {
            params_.matrix("t" + m + "1_w", d_in, cfg_.d_tok, rng);
            params_.bias("t" + m + "1_b", cfg_.d_tok);
            params_.matrix("t" + m + "2_w", cfg_.d_tok, cfg_.d_tok, rng);
            params_.bias("t" + m + "2_b", cfg_.d_tok);
            flat_in = cfg_.window * cfg_.d_tok;
        }
        params_.matrix("enc_" + m + "_w", flat_in, cfg_.encoded_width(), rng);
        params_.bias("enc_" + m + "_b", cfg_.encoded_width());
    }

    void build_self_attention(char which, Rng& rng) {
        const std::string p = std::string("sa_") + which;
        params_.matrix(p + "_wq", cfg_.d_tok, cfg_.d_tok, rng);
        params_.bias(p + "_bq", cfg_.d_tok);
        params_.matrix(p + "_wk", cfg_.d_tok, cfg_.d_tok, rng);
        params_.bias(p + "_bk", cfg_.d_tok);
        params_.matrix(p + "_wv", cfg_.d_tok, cfg_.d_tok, rng);
        params_.bias(p + "_bv", cfg_.d_tok);
        params_.matrix(p + "_wo", cfg_.d_tok, cfg_.d_specific, rng);
        params_.bias(p + "_bo", cfg_.d_specific);
    }

    void build_cross_attention(Rng& rng) {
        // token resamplers to the shared count t = n_tokens
        params_.matrix("cx_lc", cfg_.n_tokens, cfg_.d_tok, rng);
        params_.matrix("cx_la", cfg_.n_tokens, cfg_.n_tokens, rng);
        params_.matrix("cx_lb", cfg_.n_tokens, cfg_.n_tokens, rng);
        params_.matrix("cx_wq", cfg_.d_tok, cfg_.d_tok, rng);
        params_.bias("cx_bq", cfg_.d_tok);
        for (const char* s : {"c", "a", "b"}) {
            params_.matrix(std::string("cx_wk_") + s, cfg_.d_tok, cfg_.d_tok, rng);
            params_.bias(std::string("cx_bk_") + s, cfg_.d_tok);
            params_.matrix(std::string("cx_wv_") + s, cfg_.d_tok, cfg_.d_tok, rng);
            params_.bias(std::string("cx_bv_") + s, cfg_.d_tok);
        }
        params_.matrix("cx_wo", cfg_.d_tok, cfg_.d_common, rng);
        params_.bias("cx_bo", cfg_.d_common);
    }

    FusionConfig cfg_;
    ParamSet params_;
};

// Composite training loss: task objective plus lambda times the mutual
// information upper bound between concat(S_a, S_b) and S_c.
inline Tensor fusion_loss(const Tensor& y, const std::vector<int>& targets, const ClassWeights& weights, double gamma,
                          const Tensor& s_a, const Tensor& s_b, const Tensor& s_c, const ClubEstimator* est,
                          const FusionConfig& cfg) {
    if (cfg.task != TaskKind::classification) throw std::runtime_error("fusion_loss: config is not classification");
    cfg.validate();
    Tensor objective = focal_loss(ops::softmax(y), targets, weights, gamma);
    if (cfg.lambda == 0.0) return objective;
    if (est == nullptr) throw std::runtime_error("fusion_loss: lambda > 0 requires an estimator");
    return ops::add(objective, ops::scalar_mul(mi_model_term_graph(s_a, s_b, s_c, *est), cfg.lambda));
}

inline Tensor fusion_loss(const Tensor& y, const Tensor& target_values,
                          const Tensor& s_a, const Tensor& s_b, const Tensor& s_c, const ClubEstimator* est,
                          const FusionConfig& cfg) {
    if (cfg.task != TaskKind::regression) throw std::runtime_error("fusion_loss: config is not regression");
    cfg.validate();
    Tensor objective = mse_loss(ops::reshape(y, {y.shape[0]}), target_values);
    if (cfg.lambda == 0.0) return objective;
    if (est == nullptr) throw std::runtime_error("fusion_loss: lambda > 0 requires an estimator");
    return ops::add(objective, ops::scalar_mul(mi_model_term_graph(s_a, s_b, s_c, *est), cfg.lambda));
}

}  // namespace ddf
