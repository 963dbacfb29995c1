#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ddf/gradcheck.hpp"
#include "ddf/losses.hpp"
#include "ddf/optim.hpp"
#include "ddf/rng.hpp"
#include "ddf/vae.hpp"
#include "support/linalg.hpp"

using namespace ddf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

Tensor random_batch(int m, int n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor x = Tensor::zeros({m, n});
    for (double& v : *x.data) v = rng.uniform(lo, hi);
    return x;
}

// Two-factor image set: an 8x8 horizontal gradient scaled by the dominant
// factor plus a vertical gradient scaled by a weaker one, with pixel noise.
struct TwoFactorImages {
    Tensor x;                    // [m, 64]
    std::vector<double> factor1; // dominant
    std::vector<double> factor2;
};

TwoFactorImages make_two_factor_images(int m, Rng& rng) {
    const int side = 8;
    TwoFactorImages out;
    out.x = Tensor::zeros({m, side * side});
    for (int i = 0; i < m; ++i) {
        const double f1 = rng.uniform(-1.0, 1.0);
        const double f2 = rng.uniform(-1.0, 1.0);
        out.factor1.push_back(f1);
        out.factor2.push_back(f2);
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                const double p1 = 2.0 * c / (side - 1) - 1.0;  // horizontal gradient
                const double p2 = 2.0 * r / (side - 1) - 1.0;  // vertical gradient
                const double v = 10.0 * f1 * p1 + 4.0 * f2 * p2 + 0.05 * rng.normal();
                out.x.set(i, r * side + c, v);
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("vae config rejects non-positive dims", "[vae]") {
    Rng rng(1);
    CHECK_THROWS_AS(VaeModel({0, 4, 2}, rng), std::runtime_error);
    CHECK_THROWS_AS(VaeModel({4, 0, 2}, rng), std::runtime_error);
    CHECK_THROWS_AS(VaeModel({4, 4, 0}, rng), std::runtime_error);
}

TEST_CASE("zero noise makes the latent equal the posterior mean", "[vae]") {
    Rng rng(11);
    VaeModel model({6, 8, 3}, rng);
    Tensor x = random_batch(4, 6, rng);

    Tensor eps = Tensor::zeros({4, 3});
    VaeOutput out = vae_forward_with_eps(x, model, eps);
    Tensor via_mu = model.decode(ops::detach(out.mu));

    REQUIRE(out.x_hat.shape == via_mu.shape);
    for (std::size_t i = 0; i < out.x_hat.data->size(); ++i) {
        CHECK((*out.x_hat.data)[i] == (*via_mu.data)[i]);
    }
}

TEST_CASE("forward with sampling is deterministic given the seed", "[vae]") {
    Rng init(5);
    VaeModel model({6, 8, 3}, init);
    Tensor x = random_batch(5, 6, init);

    Rng r1(42), r2(42), r3(43);
    VaeOutput a = vae_forward(x, model, r1);
    VaeOutput b = vae_forward(x, model, r2);
    VaeOutput c = vae_forward(x, model, r3);

    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.x_hat.data->size(); ++i) {
        same = same && (*a.x_hat.data)[i] == (*b.x_hat.data)[i];
        differs = differs || (*a.x_hat.data)[i] != (*c.x_hat.data)[i];
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("batch shapes follow the config", "[vae]") {
    Rng rng(7);
    VaeModel model({6, 10, 3}, rng);
    Tensor x = random_batch(5, 6, rng);
    VaeOutput out = vae_forward(x, model, rng);

    CHECK(out.x_hat.shape == std::vector<int>{5, 6});
    CHECK(out.mu.shape == std::vector<int>{5, 3});
    CHECK(out.logvar.shape == std::vector<int>{5, 3});
    CHECK(vae_encode(x, model).shape == std::vector<int>{5, 3});

    VaeModel wide({6, 10, 8}, rng);
    CHECK(vae_encode(x, wide).shape == std::vector<int>{5, 8});

    Tensor bad = random_batch(5, 7, rng);
    CHECK_THROWS_AS(vae_forward(bad, model, rng), std::runtime_error);
    Tensor wrong_eps = Tensor::zeros({5, 2});
    CHECK_THROWS_AS(vae_forward_with_eps(x, model, wrong_eps), std::runtime_error);
}

TEST_CASE("forward rejects non-finite activations", "[vae]") {
    Rng rng(9);
    VaeModel model({4, 6, 2}, rng);
    Tensor x = random_batch(2, 4, rng);
    x.set(1, 2, std::numeric_limits<double>::infinity());
    CHECK_THROWS_WITH(vae_forward(x, model, rng), ContainsSubstring("matmul"));
}

TEST_CASE("reconstruction error pins hand values and rejects mismatched shapes", "[vae]") {
    Tensor same = Tensor::from({2, 2}, {0.3, -0.7, 1.5, 0.0});
    CHECK(recon_loss(same, same).value() == 0.0);

    Tensor x = Tensor::from({1, 2}, {0.0, 0.0});
    Tensor x_hat = Tensor::from({1, 2}, {1.0, 1.0});
    CHECK(recon_loss(x, x_hat).value() == 1.0);

    Tensor narrow = Tensor::from({1, 3}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(recon_loss(x, narrow), std::runtime_error);
}

TEST_CASE("reconstruction error agrees with the generic mean squared error", "[vae]") {
    Rng rng(21);
    Tensor x = random_batch(3, 4, rng);
    Tensor x_hat = random_batch(3, 4, rng);
    Tensor flat_x = ops::reshape(x, {12});
    Tensor flat_hat = ops::reshape(x_hat, {12});
    CHECK_THAT(recon_loss(x, x_hat).value(), WithinAbs(mse_loss(flat_hat, flat_x).value(), 1e-12));
}

TEST_CASE("kl matches hand-computed values", "[vae]") {
    Tensor mu0 = Tensor::from({1, 2}, {0.0, 0.0});
    Tensor lv0 = Tensor::from({1, 2}, {0.0, 0.0});
    CHECK(kl_divergence(mu0, lv0).value() == 0.0);

    Tensor mu1 = Tensor::from({1, 1}, {1.0});
    Tensor lv1 = Tensor::from({1, 1}, {0.0});
    CHECK(kl_divergence(mu1, lv1).value() == 0.5);

    Tensor mu2 = Tensor::from({1, 1}, {0.0});
    Tensor lv2 = Tensor::from({1, 1}, {std::log(2.0)});
    CHECK_THAT(kl_divergence(mu2, lv2).value(), WithinAbs((1.0 - std::log(2.0)) / 2.0, 1e-12));
    CHECK_THAT(kl_divergence(mu2, lv2).value(), WithinAbs(0.1534, 5e-5));

    // batch mean: stacking the same row twice leaves the value unchanged
    Tensor mu_b = Tensor::from({2, 1}, {1.0, 1.0});
    Tensor lv_b = Tensor::from({2, 1}, {0.0, 0.0});
    CHECK_THAT(kl_divergence(mu_b, lv_b).value(), WithinAbs(0.5, 1e-12));
}

TEST_CASE("kl is non-negative across the clamp range", "[vae]") {
    Rng rng(33);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor mu = random_batch(2, 3, rng, -3.0, 3.0);
        Tensor lv = random_batch(2, 3, rng, VaeModel::kLogvarLo, VaeModel::kLogvarHi);
        CHECK(kl_divergence(mu, lv).value() >= -1e-12);
    }
}

TEST_CASE("total loss is the unweighted sum of its parts", "[vae]") {
    // perfect reconstruction and a posterior equal to the prior
    Tensor x = Tensor::from({1, 2}, {0.4, -0.2});
    Tensor mu = Tensor::from({1, 1}, {0.0});
    Tensor lv = Tensor::from({1, 1}, {0.0});
    CHECK(vae_loss(x, x, mu, lv).value() == 0.0);

    // components 2.0 and 0.5
    Tensor x0 = Tensor::from({1, 1}, {0.0});
    Tensor x1 = Tensor::from({1, 1}, {std::sqrt(2.0)});
    Tensor mu1 = Tensor::from({1, 1}, {1.0});
    CHECK_THAT(vae_loss(x0, x1, mu1, lv).value(), WithinAbs(2.5, 1e-12));

    Rng rng(3);
    Tensor xa = random_batch(3, 4, rng);
    Tensor xb = random_batch(3, 4, rng);
    Tensor m2 = random_batch(3, 2, rng);
    Tensor l2 = random_batch(3, 2, rng);
    CHECK_THAT(vae_loss(xa, xb, m2, l2).value(),
               WithinAbs(recon_loss(xa, xb).value() + kl_divergence(m2, l2).value(), 1e-12));
}

TEST_CASE("total loss gradient matches finite differences", "[vae]") {
    Rng rng(17);
    VaeModel model({5, 6, 3}, rng);
    jitter_params(model.params(), rng);
    Tensor x = random_batch(4, 5, rng);
    Tensor eps = Tensor::zeros({4, 3});
    for (double& v : *eps.data) v = rng.normal();

    auto f = [&](ParamSet&) {
        VaeOutput out = vae_forward_with_eps(x, model, eps);
        return vae_loss(x, out.x_hat, out.mu, out.logvar);
    };
    CHECK(finite_diff_check(f, model.params()) < 1e-4);
}

TEST_CASE("identical inputs encode to identical embeddings", "[vae]") {
    Rng rng(8);
    VaeModel model({6, 8, 4}, rng);
    Tensor x = Tensor::zeros({2, 6});
    for (int j = 0; j < 6; ++j) {
        const double v = rng.uniform(-1.0, 1.0);
        x.set(0, j, v);
        x.set(1, j, v);
    }
    Tensor e = vae_encode(x, model);
    for (int j = 0; j < 4; ++j) CHECK(e.at(0, j) == e.at(1, j));
}

TEST_CASE("training on two-factor images halves the loss and exposes the dominant factor", "[vae]") {
    Rng data_rng(derive_seed(2024, "vae-data"));
    TwoFactorImages set = make_two_factor_images(96, data_rng);

    Rng model_rng(derive_seed(2024, "vae-model"));
    VaeModel model({64, 24, 3}, model_rng);
    AdamOptimizer opt(0.01);
    Rng noise_rng(derive_seed(2024, "vae-noise"));

    auto eval_loss = [&]() {
        Tensor eps = Tensor::zeros({set.x.shape[0], 3});
        VaeOutput out = vae_forward_with_eps(set.x, model, eps);
        return vae_loss(set.x, out.x_hat, out.mu, out.logvar).value();
    };

    const double initial = eval_loss();
    for (int epoch = 0; epoch < 200; ++epoch) {
        model.params().zero_grad();
        VaeOutput out = vae_forward(set.x, model, noise_rng);
        Tensor loss = vae_loss(set.x, out.x_hat, out.mu, out.logvar);
        backward(loss);
        opt.step(model.params());
    }
    const double trained = eval_loss();

    INFO("initial " << initial << " trained " << trained);
    CHECK(trained <= 0.5 * initial);

    Tensor emb = vae_encode(set.x, model);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < emb.shape[0]; ++i) {
        rows.push_back({emb.at(i, 0), emb.at(i, 1), emb.at(i, 2)});
    }
    const double r2 = testsupport::linear_probe_r2(rows, set.factor1);
    INFO("probe R^2 " << r2);
    CHECK(r2 >= 0.8);
}
