#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddf/ops.hpp"
#include "ddf/params.hpp"
#include "ddf/rng.hpp"
#include "ddf/tensor.hpp"

namespace ddf {

// Feed-forward VAE over flattened inputs (default 16x16 grayscale -> 256).
// Encoder: one relu layer to a hidden width, then linear mu / logvar heads
// of width d_latent. Decoder mirrors: latent -> hidden relu -> linear back
// to the input width, so decode(encode(x)) always matches x's shape.
struct VaeConfig {
    int d_in = 256;
    int d_hidden = 64;
    int d_latent = 8;

    void validate() const {
        if (d_in < 1 || d_hidden < 1 || d_latent < 1) {
            throw std::runtime_error("vae config: dims must be >= 1");
        }
    }
};

class VaeModel {
public:
    static constexpr double kLogvarLo = -10.0;
    static constexpr double kLogvarHi = 10.0;

    VaeModel(const VaeConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg_.validate();
        params_.matrix("enc_w", cfg_.d_in, cfg_.d_hidden, rng);
        params_.bias("enc_b", cfg_.d_hidden);
        params_.matrix("mu_w", cfg_.d_hidden, cfg_.d_latent, rng);
        params_.bias("mu_b", cfg_.d_latent);
        params_.matrix("lv_w", cfg_.d_hidden, cfg_.d_latent, rng);
        params_.bias("lv_b", cfg_.d_latent);
        params_.matrix("dec_w1", cfg_.d_latent, cfg_.d_hidden, rng);
        params_.bias("dec_b1", cfg_.d_hidden);
        params_.matrix("dec_w2", cfg_.d_hidden, cfg_.d_in, rng);
        params_.bias("dec_b2", cfg_.d_in);
    }

    const VaeConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // [m, d_in] -> mu, logvar each [m, d_latent]; logvar is clamped before
    // it leaves the encoder so every downstream sigma is finite.
    void encode_graph(const Tensor& x, Tensor* mu, Tensor* logvar) const {
        check_input(x);
        Tensor h = ops::relu(ops::add_rowwise(ops::matmul(x, params_.get("enc_w")), params_.get("enc_b")));
        *mu = ops::add_rowwise(ops::matmul(h, params_.get("mu_w")), params_.get("mu_b"));
        *logvar = ops::clamp(ops::add_rowwise(ops::matmul(h, params_.get("lv_w")), params_.get("lv_b")),
                             kLogvarLo, kLogvarHi);
    }

    // [m, d_latent] -> [m, d_in]; linear output (inputs are real-valued).
    Tensor decode(const Tensor& z) const {
        if (z.ndim() != 2 || z.shape[1] != cfg_.d_latent) {
            throw std::runtime_error("vae decode: expected [m, " + std::to_string(cfg_.d_latent) + "] batch");
        }
        Tensor h = ops::relu(ops::add_rowwise(ops::matmul(z, params_.get("dec_w1")), params_.get("dec_b1")));
        return ops::add_rowwise(ops::matmul(h, params_.get("dec_w2")), params_.get("dec_b2"));
    }

    void check_input(const Tensor& x) const {
        if (x.ndim() != 2 || x.shape[1] != cfg_.d_in) {
            throw std::runtime_error("vae: expected [m, " + std::to_string(cfg_.d_in) + "] batch, got " + x.shape_str());
        }
    }

private:
    VaeConfig cfg_;
    ParamSet params_;
};

struct VaeOutput {
    Tensor x_hat;   // [m, d_in]
    Tensor mu;      // [m, d_latent]
    Tensor logvar;  // [m, d_latent]
};

// Reparameterized forward with caller-supplied noise: z = mu + sigma * eps.
// eps must match mu's shape; pass zeros to get z == mu exactly.
inline VaeOutput vae_forward_with_eps(const Tensor& x, const VaeModel& model, const Tensor& eps) {
    VaeOutput out;
    model.encode_graph(x, &out.mu, &out.logvar);
    if (eps.shape != out.mu.shape) {
        throw std::runtime_error("vae_forward: eps shape " + eps.shape_str() + " != mu shape " + out.mu.shape_str());
    }
    Tensor sigma = ops::exp(ops::scalar_mul(out.logvar, 0.5));
    Tensor z = ops::add(out.mu, ops::mul(sigma, eps));
    out.x_hat = model.decode(z);
    return out;
}

inline VaeOutput vae_forward(const Tensor& x, const VaeModel& model, Rng& rng) {
    model.check_input(x);
    const int m = x.shape[0];
    Tensor eps = Tensor::zeros({m, model.config().d_latent});
    for (double& v : *eps.data) v = rng.normal();
    return vae_forward_with_eps(x, model, eps);
}

// Mean squared error over every entry of the batch.
inline Tensor recon_loss(const Tensor& x, const Tensor& x_hat) {
    if (x.shape != x_hat.shape) throw std::runtime_error("recon_loss: shape mismatch");
    Tensor d = ops::sub(x, x_hat);
    return ops::mean(ops::mul(d, d));
}

// -1/2 sum_j (1 + logvar_j - mu_j^2 - sigma_j^2), mean over the batch.
// Non-negative for any (mu, logvar): 1 + t - e^t <= 0 with equality at t=0.
inline Tensor kl_divergence(const Tensor& mu, const Tensor& logvar) {
    if (mu.shape != logvar.shape) throw std::runtime_error("kl_divergence: shape mismatch");
    const int m = mu.ndim() == 2 ? mu.shape[0] : 1;
    Tensor inner = ops::add(ops::scalar_add(logvar, 1.0),
                            ops::neg(ops::add(ops::mul(mu, mu), ops::exp(logvar))));
    return ops::scalar_mul(ops::sum(inner), -0.5 / static_cast<double>(m));
}

// Unweighted sum of the two terms.
inline Tensor vae_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar) {
    return ops::add(recon_loss(x, x_hat), kl_divergence(mu, logvar));
}

// Embedding = mu(x), deterministic, no graph. Safe to call concurrently on
// a model nothing is training.
inline Tensor vae_encode(const Tensor& x_batch, const VaeModel& model) {
    model.check_input(x_batch);
    const ParamSet& p = model.params();
    Tensor in = ops::detach(x_batch);
    Tensor h = ops::relu(ops::add_rowwise(ops::matmul(in, ops::detach(p.get("enc_w"))), ops::detach(p.get("enc_b"))));
    return ops::add_rowwise(ops::matmul(h, ops::detach(p.get("mu_w"))), ops::detach(p.get("mu_b")));
}

}  // namespace ddf
