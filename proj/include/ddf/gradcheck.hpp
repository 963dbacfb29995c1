#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "ddf/params.hpp"
#include "ddf/tensor.hpp"

namespace ddf {

// Moves every parameter entry to a generic point. Zero-initialized biases
// can place relu pre-activations exactly on the kink (where central
// differences are meaningless); checks should run after this.
inline void jitter_params(ParamSet& params, Rng& rng, double scale = 0.05) {
    for (const auto& e : params.entries()) {
        for (double& v : *e.tensor.data) v += rng.uniform(-scale, scale);
    }
}

// Compares reverse-mode gradients of f against central differences.
// Returns max over all parameter entries of
//   |analytic - central| / max(1, |central|).
// f must rebuild its graph on every call (graphs are single-use) and be
// deterministic for fixed inputs.
inline double finite_diff_check(const std::function<Tensor(ParamSet&)>& f, ParamSet& params, double eps = 1e-5) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::runtime_error("finite_diff_check: eps must be in [1e-7, 1e-3]");

    params.zero_grad();
    Tensor loss = f(params);
    if (loss.numel() != 1) throw std::runtime_error("finite_diff_check: f must return a scalar");
    if (!std::isfinite(loss.value())) throw std::runtime_error("finite_diff_check: f returned non-finite value");
    backward(loss);

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& t = params.entry(pi).tensor;
        for (std::size_t i = 0; i < t.data->size(); ++i) {
            const double saved = (*t.data)[i];
            (*t.data)[i] = saved + eps;
            const double up = f(params).value();
            (*t.data)[i] = saved - eps;
            const double down = f(params).value();
            (*t.data)[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw std::runtime_error("finite_diff_check: f returned non-finite value");
            }
            const double central = (up - down) / (2.0 * eps);
            const double analytic = (*t.grad)[i];
            const double rel = std::abs(analytic - central) / std::max(1.0, std::abs(central));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace ddf
