#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ddf/gradcheck.hpp"
#include "ddf/losses.hpp"
#include "ddf/ops.hpp"
#include "ddf/rng.hpp"

using namespace ddf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("class weights for balanced, skewed, and large-count cases", "[losses]") {
    ClassWeights balanced = class_weights({50, 50});
    CHECK(balanced.at(0) == 1.0);
    CHECK(balanced.at(1) == 1.0);

    ClassWeights skew = class_weights({10, 90});
    CHECK_THAT(skew.at(0), WithinAbs(5.0, 1e-12));
    CHECK_THAT(skew.at(1), WithinAbs(0.5555555555555556, 1e-12));

    // 5-grade retinal screening distribution: 15210+162+310+190+394 = 16266
    ClassWeights icdr = class_weights({15210, 162, 310, 190, 394});
    CHECK_THAT(icdr.at(0), WithinAbs(16266.0 / (5.0 * 15210.0), 1e-12));
    CHECK_THAT(icdr.at(0), WithinAbs(0.2139, 5e-5));

    REQUIRE_THROWS_WITH(class_weights({5, 0, 3}), Catch::Matchers::ContainsSubstring("zero-count"));
}

TEST_CASE("class weights are scale invariant", "[losses]") {
    ClassWeights a = class_weights({7, 21, 14});
    ClassWeights b = class_weights({700, 2100, 1400});
    for (int c = 0; c < 3; ++c) REQUIRE_THAT(a.at(c), WithinAbs(b.at(c), 1e-12));
}

TEST_CASE("focal loss pinned values", "[losses]") {
    ClassWeights ones = ClassWeights::uniform(2);

    // gamma=0 reduces to cross-entropy: p_t = 0.5
    Tensor p_half = Tensor::from({1, 2}, {0.5, 0.5});
    CHECK_THAT(focal_loss(p_half, {0}, ones, 0.0).value(), WithinAbs(0.6931471805599453, 1e-12));

    // perfect prediction is exactly 0 for gamma > 0
    Tensor p_one = Tensor::from({1, 2}, {1.0, 0.0});
    CHECK(focal_loss(p_one, {0}, ones, 2.0).value() == 0.0);

    // gamma=2, p_t=0.9: 0.01 * (-log 0.9)
    Tensor p_09 = Tensor::from({1, 2}, {0.9, 0.1});
    CHECK_THAT(focal_loss(p_09, {0}, ones, 2.0).value(), WithinRel(1.0536051565782634e-3, 1e-10));
}

TEST_CASE("focal loss with gamma 0 matches plain cross-entropy on random batches", "[losses]") {
    Rng rng(31);
    const int n = 17, c = 4;
    Tensor logits = Tensor::zeros({n, c});
    for (double& v : *logits.data) v = rng.normal();
    Tensor probs = ops::softmax(logits);
    std::vector<int> targets;
    for (int i = 0; i < n; ++i) targets.push_back(static_cast<int>(rng.below(c)));

    double ce = 0.0;
    for (int i = 0; i < n; ++i) ce -= std::log(probs.at(i, targets[i]));
    ce /= n;

    CHECK_THAT(focal_loss(probs, targets, ClassWeights::uniform(c), 0.0).value(), WithinAbs(ce, 1e-12));
}

TEST_CASE("focal loss applies per-class weights and batch mean", "[losses]") {
    // two samples, alpha = [2, 0.5], gamma = 0
    Tensor probs = Tensor::from({2, 2}, {0.5, 0.5, 0.25, 0.75});
    ClassWeights w{{2.0, 0.5}};
    const double expect = (2.0 * -std::log(0.5) + 0.5 * -std::log(0.75)) / 2.0;
    CHECK_THAT(focal_loss(probs, {0, 1}, w, 0.0).value(), WithinAbs(expect, 1e-12));
}

TEST_CASE("focal loss is non-increasing in p_t", "[losses]") {
    ClassWeights ones = ClassWeights::uniform(2);
    double prev = 1e18;
    for (double p = 0.05; p < 1.0; p += 0.05) {
        Tensor probs = Tensor::from({1, 2}, {p, 1.0 - p});
        const double v = focal_loss(probs, {0}, ones, 2.0).value();
        REQUIRE(v <= prev + 1e-15);
        prev = v;
    }
}

TEST_CASE("focal loss input validation", "[losses]") {
    ClassWeights ones = ClassWeights::uniform(2);
    Tensor bad_rows = Tensor::from({1, 2}, {0.7, 0.5});
    REQUIRE_THROWS_WITH(focal_loss(bad_rows, {0}, ones, 2.0), Catch::Matchers::ContainsSubstring("sum to 1"));
    Tensor ok = Tensor::from({1, 2}, {0.5, 0.5});
    REQUIRE_THROWS_WITH(focal_loss(ok, {2}, ones, 2.0), Catch::Matchers::ContainsSubstring("out of range"));
    REQUIRE_THROWS_AS(focal_loss(ok, {0}, ones, -1.0), std::runtime_error);
}

TEST_CASE("focal loss gradients match finite differences on a 3-class batch", "[losses]") {
    Rng rng(77);
    ParamSet params;
    params.matrix("w", 5, 3, rng);
    params.bias("b", 3);
    Tensor x = Tensor::zeros({6, 5});
    Rng data_rng(78);
    for (double& v : *x.data) v = data_rng.normal();
    std::vector<int> targets = {0, 1, 2, 0, 1, 2};
    ClassWeights w = class_weights({3, 2, 1});

    auto f = [&](ParamSet& p) {
        Tensor probs = ops::softmax(ops::add_rowwise(ops::matmul(x, p.get("w")), p.get("b")));
        return focal_loss(probs, targets, w, 2.0);
    };
    CHECK(finite_diff_check(f, params, 1e-5) < 1e-4);
}

TEST_CASE("l2 penalty pinned values and bias exclusion", "[losses]") {
    ParamSet params;
    params.add("theta", Tensor::row({1, 2}, true));
    params.add("b", Tensor::row({100, 100}, true), /*is_bias=*/true);

    CHECK(l2_penalty(params, 0.0).value() == 0.0);
    CHECK_THAT(l2_penalty(params, 1.0).value(), WithinAbs(2.5, 1e-15));
    CHECK_THAT(l2_penalty(params, 0.4).value(), WithinAbs(1.0, 1e-15));
}

TEST_CASE("l2 penalty gradient is lambda times theta", "[losses]") {
    ParamSet params;
    Tensor theta = Tensor::row({1.5, -2.0, 0.25}, true);
    params.add("theta", theta);
    const double lambda = 0.7;

    Tensor loss = l2_penalty(params, lambda);
    backward(loss);
    for (int i = 0; i < 3; ++i) REQUIRE_THAT(theta.grad_at(i), WithinAbs(lambda * theta.at(i), 1e-10));

    auto f = [lambda](ParamSet& p) { return l2_penalty(p, lambda); };
    CHECK(finite_diff_check(f, params, 1e-5) < 1e-8);
}

TEST_CASE("mse pinned values", "[losses]") {
    Tensor a = Tensor::row({1, 3});
    CHECK(mse_loss(a, a).value() == 0.0);
    CHECK(mse_loss(Tensor::row({0}), Tensor::row({2})).value() == 4.0);
    CHECK_THAT(mse_loss(Tensor::row({1, 3}), Tensor::row({2, 5})).value(), WithinAbs(2.5, 1e-15));
    REQUIRE_THROWS_AS(mse_loss(Tensor::row({1}), Tensor::row({1, 2})), std::runtime_error);
}

TEST_CASE("mse gradients match finite differences", "[losses]") {
    ParamSet params;
    params.add("pred", Tensor::row({0.3, -1.2, 2.0}, true));
    Tensor target = Tensor::row({0.0, 1.0, 2.5});
    auto f = [&target](ParamSet& p) { return mse_loss(p.get("pred"), target); };
    CHECK(finite_diff_check(f, params, 1e-5) < 1e-8);
}
