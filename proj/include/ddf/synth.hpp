#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddf/data.hpp"
#include "ddf/rng.hpp"

namespace ddf {

enum class SynthTask { classification, regression, temporal };

// Ground-truth latent factor model: a shared latent s plus per-modality
// specific latents (u_a, u_b) mixed into the two observed modalities.
// `redundancy` is the fraction of observed rows that load on s; the rest
// load only on the modality's own specific latent.
struct SynthConfig {
    SynthTask task = SynthTask::classification;
    int n = 1000;  // samples; temporal uses n_series * series_len instead
    int d_shared = 4;
    int d_spec_a = 3;
    int d_spec_b = 3;
    int dim_a = 16;
    int dim_b = 12;
    double noise_std = 0.1;
    double redundancy = 0.5;
    int n_classes = 3;
    int n_series = 10;
    int series_len = 200;
    double ar_phi = 0.8;
    std::uint64_t seed = 1;

    void validate() const {
        if (n < 1 || d_shared < 1 || d_spec_a < 1 || d_spec_b < 1 || dim_a < 1 || dim_b < 1) {
            throw std::runtime_error("synth config: dims and n must be >= 1");
        }
        if (noise_std < 0.0) throw std::runtime_error("synth config: noise_std must be >= 0");
        if (!(redundancy >= 0.0 && redundancy <= 1.0)) throw std::runtime_error("synth config: redundancy must be in [0, 1]");
        if (task == SynthTask::classification && n_classes < 2) throw std::runtime_error("synth config: need >= 2 classes");
        if (task == SynthTask::temporal) {
            if (n_series < 1 || series_len < 2) throw std::runtime_error("synth config: temporal needs n_series >= 1, series_len >= 2");
            if (!(std::abs(ar_phi) < 1.0)) throw std::runtime_error("synth config: |ar_phi| must be < 1");
        }
    }

    int d_latent() const { return d_shared + d_spec_a + d_spec_b; }
};

struct SynthResult {
    MultimodalDataset ds;
    std::vector<std::vector<double>> latents;  // [s; u_a; u_b] per record
};

namespace detail {

// Observed = M * [s; u_latent], with the first `shared_rows` rows loading
// only on s and the rest only on the specific latent. Entries are scaled by
// 1/sqrt(fan-in) so features stay O(1).
struct MixingMatrix {
    std::vector<std::vector<double>> rows;
    int d_shared, d_spec;

    MixingMatrix(int dim_out, int d_shared_in, int d_spec_in, double redundancy, Rng& rng)
        : d_shared(d_shared_in), d_spec(d_spec_in) {
        const int shared_rows = static_cast<int>(std::llround(redundancy * dim_out));
        for (int i = 0; i < dim_out; ++i) {
            std::vector<double> row(d_shared + d_spec, 0.0);
            if (i < shared_rows) {
                for (int j = 0; j < d_shared; ++j) row[j] = rng.uniform(-1.0, 1.0) / std::sqrt(d_shared);
            } else {
                for (int j = 0; j < d_spec; ++j) row[d_shared + j] = rng.uniform(-1.0, 1.0) / std::sqrt(d_spec);
            }
            rows.push_back(std::move(row));
        }
    }

    std::vector<double> apply(const std::vector<double>& s, const std::vector<double>& u) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const std::vector<double>& row : rows) {
            double v = 0.0;
            for (int j = 0; j < d_shared; ++j) v += row[j] * s[j];
            for (int j = 0; j < d_spec; ++j) v += row[d_shared + j] * u[j];
            out.push_back(v);
        }
        return out;
    }
};

// Fixed one-hidden-layer tanh network from the full latent vector; argmax
// of its logits labels classification samples, its single output labels
// regression/temporal ones. Nonlinear in s, u_a, and u_b so no modality or
// stream carries the label alone.
struct LabelTeacher {
    static constexpr int kHidden = 16;
    std::vector<std::vector<double>> w1;  // [d_latent][kHidden]
    std::vector<double> b1;
    std::vector<std::vector<double>> w2;  // [kHidden][n_out]

    LabelTeacher(int d_latent, int n_out, Rng& rng) {
        const double s1 = 1.0 / std::sqrt(d_latent);
        for (int i = 0; i < d_latent; ++i) {
            std::vector<double> row(kHidden);
            for (double& v : row) v = rng.uniform(-1.5, 1.5) * s1;
            w1.push_back(std::move(row));
        }
        b1.resize(kHidden);
        for (double& v : b1) v = rng.uniform(-0.5, 0.5);
        const double s2 = 1.0 / std::sqrt(kHidden);
        for (int i = 0; i < kHidden; ++i) {
            std::vector<double> row(n_out);
            for (double& v : row) v = rng.uniform(-1.5, 1.5) * s2;
            w2.push_back(std::move(row));
        }
    }

    std::vector<double> logits(const std::vector<double>& z) const {
        std::vector<double> h(kHidden, 0.0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            for (int j = 0; j < kHidden; ++j) h[j] += z[i] * w1[i][j];
        }
        for (int j = 0; j < kHidden; ++j) h[j] = std::tanh(h[j] + b1[j]);
        std::vector<double> out(w2[0].size(), 0.0);
        for (int j = 0; j < kHidden; ++j) {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += h[j] * w2[j][k];
        }
        return out;
    }

    int argmax_label(const std::vector<double>& z) const {
        const std::vector<double> l = logits(z);
        int best = 0;
        for (std::size_t k = 1; k < l.size(); ++k) {
            if (l[k] > l[best]) best = static_cast<int>(k);
        }
        return best;
    }
};

inline std::string synth_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05d", prefix, i);
    return buf;
}

}  // namespace detail

inline SynthResult synth_multimodal(const SynthConfig& cfg) {
    cfg.validate();
    Rng mix_rng(derive_seed(cfg.seed, "synth-mixing"));
    detail::MixingMatrix mix_a(cfg.dim_a, cfg.d_shared, cfg.d_spec_a, cfg.redundancy, mix_rng);
    detail::MixingMatrix mix_b(cfg.dim_b, cfg.d_shared, cfg.d_spec_b, cfg.redundancy, mix_rng);
    Rng teacher_rng(derive_seed(cfg.seed, "synth-teacher"));
    const int n_out = cfg.task == SynthTask::classification ? cfg.n_classes : 1;
    detail::LabelTeacher teacher(cfg.d_latent(), n_out, teacher_rng);
    Rng latent_rng(derive_seed(cfg.seed, "synth-latents"));
    Rng noise_rng(derive_seed(cfg.seed, "synth-noise"));

    SynthResult out;
    out.ds.dim_a = cfg.dim_a;
    out.ds.dim_b = cfg.dim_b;

    auto emit = [&](std::string id, const std::vector<double>& z, const std::string& group, long long t) {
        const std::vector<double> s(z.begin(), z.begin() + cfg.d_shared);
        const std::vector<double> ua(z.begin() + cfg.d_shared, z.begin() + cfg.d_shared + cfg.d_spec_a);
        const std::vector<double> ub(z.begin() + cfg.d_shared + cfg.d_spec_a, z.end());
        Record r;
        r.id = std::move(id);
        r.mod_a = mix_a.apply(s, ua);
        r.mod_b = mix_b.apply(s, ub);
        for (double& v : r.mod_a) v += cfg.noise_std * noise_rng.normal();
        for (double& v : r.mod_b) v += cfg.noise_std * noise_rng.normal();
        if (cfg.task == SynthTask::classification) {
            r.label = teacher.argmax_label(z);
        } else {
            r.label = teacher.logits(z)[0];
        }
        r.group = group;
        r.t = t;
        out.ds.records.push_back(std::move(r));
        out.latents.push_back(z);
    };

    if (cfg.task == SynthTask::temporal) {
        out.ds.has_group = true;
        out.ds.has_t = true;
        const double innovation = std::sqrt(1.0 - cfg.ar_phi * cfg.ar_phi);
        for (int g = 0; g < cfg.n_series; ++g) {
            const std::string group = "series_" + std::to_string(g);
            std::vector<double> z(cfg.d_latent());
            for (double& v : z) v = latent_rng.normal();
            for (int t = 0; t < cfg.series_len; ++t) {
                if (t > 0) {
                    for (double& v : z) v = cfg.ar_phi * v + innovation * latent_rng.normal();
                }
                emit(group + "_" + detail::synth_id("t", t), z, group, t);
            }
        }
    } else {
        for (int i = 0; i < cfg.n; ++i) {
            std::vector<double> z(cfg.d_latent());
            for (double& v : z) v = latent_rng.normal();
            emit(detail::synth_id("s", i), z, "", 0);
        }
    }
    out.ds.validate();
    return out;
}

}  // namespace ddf
