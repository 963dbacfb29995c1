#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ddf/checkpoint.hpp"
#include "ddf/data.hpp"
#include "ddf/synth.hpp"
#include "ddf/trainer.hpp"

using namespace ddf;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string temp_path(const std::string& stem) {
    static int counter = 0;
    return (std::filesystem::temp_directory_path() / (stem + std::to_string(counter++) + ".bin")).string();
}

// Two far-apart gaussian blobs in modality a; modality b is pure noise.
MultimodalDataset make_blobs(int per_class, double sep, std::uint64_t seed) {
    MultimodalDataset ds;
    ds.dim_a = 2;
    ds.dim_b = 2;
    Rng rng(seed);
    for (int c = 0; c < 2; ++c) {
        const double center = c == 0 ? -sep / 2.0 : sep / 2.0;
        for (int i = 0; i < per_class; ++i) {
            Record r;
            r.id = "blob" + std::to_string(c) + "_" + std::to_string(i);
            r.mod_a = {center + rng.normal(), center + rng.normal()};
            r.mod_b = {rng.normal(), rng.normal()};
            r.label = c;
            ds.records.push_back(r);
        }
    }
    return ds;
}

// XOR clusters: label 1 iff the two coordinates have opposite signs.
MultimodalDataset make_xor(int per_cluster, std::uint64_t seed) {
    MultimodalDataset ds;
    ds.dim_a = 2;
    ds.dim_b = 1;
    Rng rng(seed);
    const double centers[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (int q = 0; q < 4; ++q) {
        for (int i = 0; i < per_cluster; ++i) {
            Record r;
            r.id = "xor" + std::to_string(q) + "_" + std::to_string(i);
            r.mod_a = {centers[q][0] + 0.1 * rng.normal(), centers[q][1] + 0.1 * rng.normal()};
            r.mod_b = {0.0};
            r.label = (centers[q][0] * centers[q][1] < 0) ? 1.0 : 0.0;
            ds.records.push_back(r);
        }
    }
    return ds;
}

// Well-separated two-modality classification data sized for the fusion model.
MultimodalDataset make_fusion_blobs(int per_class, int n_classes, std::uint64_t seed) {
    MultimodalDataset ds;
    ds.dim_a = 4;
    ds.dim_b = 3;
    Rng rng(seed);
    for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Record r;
            r.id = "f" + std::to_string(c) + "_" + std::to_string(i);
            for (int j = 0; j < ds.dim_a; ++j) r.mod_a.push_back(3.0 * c + 0.3 * rng.normal());
            for (int j = 0; j < ds.dim_b; ++j) r.mod_b.push_back(-2.0 * c + 0.3 * rng.normal());
            r.label = c;
            ds.records.push_back(r);
        }
    }
    return ds;
}

FusionConfig small_fusion_config(double lambda) {
    FusionConfig cfg;
    cfg.d_in_a = 4;
    cfg.d_in_b = 3;
    cfg.n_tokens = 2;
    cfg.d_tok = 4;
    cfg.d_common = 4;
    cfg.d_specific = 3;
    cfg.d_hidden = 8;
    cfg.lambda = lambda;
    cfg.task = TaskKind::classification;
    cfg.n_classes = 2;
    return cfg;
}

}  // namespace

TEST_CASE("early stopper follows the patience contract exactly", "[trainer]") {
    // val sequence: improves at epoch 1 and 2, then 7 non-improving epochs.
    // patience 7 -> stop returned at epoch 9, best epoch 2 restored.
    ParamSet ps;
    ps.add("w", Tensor::row({0.0}, true), false);
    EarlyStopper stop(7);

    const std::vector<double> vals = {1.0, 0.9, 0.95, 0.9, 1.1, 0.92, 0.9, 1.3, 0.91};
    bool stopped = false;
    int stop_epoch = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        (*ps.get("w").data)[0] = static_cast<double>(i + 1);  // mark the epoch in the weights
        if (stop.observe(vals[i], ps)) {
            stopped = true;
            stop_epoch = static_cast<int>(i + 1);
            break;
        }
    }

    REQUIRE(stopped);
    CHECK(stop_epoch == 9);
    CHECK(stop.best_epoch() == 2);
    CHECK(stop.best_val() == 0.9);

    stop.restore_best(ps);
    CHECK(ps.get("w").at(0) == 2.0);  // weights as of epoch 2, not epoch 9
}

TEST_CASE("early stopper keeps going while improvement continues", "[trainer]") {
    ParamSet ps;
    ps.add("w", Tensor::row({0.0}, true), false);
    EarlyStopper stop(2);
    CHECK_FALSE(stop.observe(5.0, ps));
    CHECK_FALSE(stop.observe(4.0, ps));
    CHECK_FALSE(stop.observe(4.0, ps));  // equal is not an improvement
    CHECK(stop.observe(4.0, ps));        // second consecutive non-improvement
    CHECK(stop.best_epoch() == 2);
}

TEST_CASE("early stopper refuses to restore before any observation", "[trainer]") {
    ParamSet ps;
    ps.add("w", Tensor::row({1.0}, true), false);
    EarlyStopper stop(3);
    CHECK_THROWS_WITH(stop.restore_best(ps), ContainsSubstring("no snapshot"));
}

TEST_CASE("train config validation rejects bad settings", "[trainer]") {
    TrainConfig tc;
    tc.validate();  // defaults are fine

    TrainConfig bad = tc;
    bad.lr = 0.0;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("lr"));
    bad = tc;
    bad.patience = 0;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("patience"));
    bad = tc;
    bad.val_frac = 0.5;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("val_frac"));
    bad = tc;
    bad.optimizer = "lbfgs";
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("optimizer"));
    bad = tc;
    bad.lambda_mi = 1.5;
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("lambda"));
    bad = tc;
    bad.seeds.clear();
    CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("seed"));
}

TEST_CASE("epoch batches cover every index exactly once", "[trainer]") {
    Rng rng(7);
    auto batches = detail::epoch_batches(10, 3, rng);
    REQUIRE(batches.size() == 4);
    CHECK(batches[0].size() == 3);
    CHECK(batches[3].size() == 1);
    std::set<std::size_t> seen;
    for (const auto& b : batches) {
        for (std::size_t i : b) seen.insert(i);
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("fusion training drives the objective below 0.1 on separable data", "[trainer]") {
    MultimodalDataset ds = make_fusion_blobs(40, 2, 11);
    FusionConfig cfg = small_fusion_config(0.0);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 200;
    tc.batch_size = 16;
    tc.patience = 50;
    tc.lambda_mi = 0.0;
    FusionTrainResult res = train_fusion(ds, cfg, tc, 3);
    REQUIRE(!res.history.empty());
    CHECK(res.history.back().train < 0.1);
    CHECK(res.best_epoch >= 1);
    CHECK(std::isfinite(res.best_val));
}

TEST_CASE("same seed gives a bit-identical training run", "[trainer]") {
    MultimodalDataset ds = make_fusion_blobs(30, 2, 13);
    FusionConfig cfg = small_fusion_config(0.0);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 6;
    tc.batch_size = 16;
    tc.lambda_mi = 0.3;  // exercise the alternating schedule too
    tc.estimator_hidden = 8;

    FusionTrainResult r1 = train_fusion(ds, cfg, tc, 99);
    FusionTrainResult r2 = train_fusion(ds, cfg, tc, 99);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train == r2.history[i].train);
        CHECK(r1.history[i].val == r2.history[i].val);
    }
    CHECK(r1.model.params().value_hash() == r2.model.params().value_hash());
    CHECK(r1.estimator.params().value_hash() == r2.estimator.params().value_hash());

    FusionTrainResult r3 = train_fusion(ds, cfg, tc, 100);
    CHECK(r3.model.params().value_hash() != r1.model.params().value_hash());
}

TEST_CASE("estimator and model updates stay isolated in the alternating schedule", "[trainer]") {
    FusionConfig cfg = small_fusion_config(0.5);
    Rng mrng(5), erng(6);
    FusionModel model(cfg, mrng);
    ClubEstimator est(2 * cfg.d_specific, cfg.d_common, 8, erng);

    Rng drng(7);
    Tensor a = Tensor::zeros({6, 4});
    Tensor b = Tensor::zeros({6, 3});
    for (std::size_t i = 0; i < a.data->size(); ++i) (*a.data)[i] = drng.normal();
    for (std::size_t i = 0; i < b.data->size(); ++i) (*b.data)[i] = drng.normal();
    BatchTargets bt;
    bt.labels = {0, 1, 0, 1, 0, 1};

    TrainConfig tc;
    tc.lambda_mi = 0.5;
    Optimizer est_opt("adam", 1e-3);
    Optimizer model_opt("adam", 1e-3);

    FusionOutputs f = model.forward(a, b);

    const auto model_before = model.params().value_hash();
    const auto est_before = est.params().value_hash();
    estimator_ascent_step(f, est, est_opt);
    CHECK(model.params().value_hash() == model_before);  // ascent must not touch the model
    CHECK(est.params().value_hash() != est_before);

    const auto est_mid = est.params().value_hash();
    ClassWeights w = ClassWeights::uniform(2);
    model_descent_step(model, f, bt, w, tc, &est, model_opt, &est_opt);
    CHECK(model.params().value_hash() != model_before);  // descent moves the model
    CHECK(est.params().value_hash() == est_mid);         // but never the estimator
}

TEST_CASE("summed mode steps both parameter sets from one loss", "[trainer]") {
    FusionConfig cfg = small_fusion_config(0.5);
    Rng mrng(15), erng(16);
    FusionModel model(cfg, mrng);
    ClubEstimator est(2 * cfg.d_specific, cfg.d_common, 8, erng);

    Rng drng(17);
    Tensor a = Tensor::zeros({4, 4});
    Tensor b = Tensor::zeros({4, 3});
    for (std::size_t i = 0; i < a.data->size(); ++i) (*a.data)[i] = drng.normal();
    for (std::size_t i = 0; i < b.data->size(); ++i) (*b.data)[i] = drng.normal();
    BatchTargets bt;
    bt.labels = {0, 1, 1, 0};

    TrainConfig tc;
    tc.lambda_mi = 0.5;
    tc.summed_mi = true;
    Optimizer est_opt("adam", 1e-3);
    Optimizer model_opt("adam", 1e-3);

    const auto model_before = model.params().value_hash();
    const auto est_before = est.params().value_hash();
    FusionOutputs f = model.forward(a, b);
    const double loss = model_descent_step(model, f, bt, ClassWeights::uniform(2), tc, &est, model_opt, &est_opt);
    CHECK(std::isfinite(loss));
    CHECK(model.params().value_hash() != model_before);
    CHECK(est.params().value_hash() != est_before);
}

TEST_CASE("summed-mode training runs end to end", "[trainer]") {
    MultimodalDataset ds = make_fusion_blobs(25, 2, 21);
    FusionConfig cfg = small_fusion_config(0.0);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 4;
    tc.batch_size = 16;
    tc.lambda_mi = 0.2;
    tc.summed_mi = true;
    tc.estimator_hidden = 8;
    FusionTrainResult res = train_fusion(ds, cfg, tc, 8);
    REQUIRE(res.history.size() == 4);
    for (const EpochLosses& e : res.history) {
        CHECK(std::isfinite(e.train));
        CHECK(std::isfinite(e.val));
    }
}

TEST_CASE("train_fusion rejects datasets whose widths do not match the config", "[trainer]") {
    MultimodalDataset ds = make_fusion_blobs(10, 2, 3);
    FusionConfig cfg = small_fusion_config(0.0);
    cfg.d_in_a = 9;
    TrainConfig tc;
    tc.epochs = 1;
    CHECK_THROWS_WITH(train_fusion(ds, cfg, tc, 1), ContainsSubstring("do not match"));
}

TEST_CASE("logistic baseline separates distant blobs", "[trainer]") {
    MultimodalDataset ds = make_blobs(100, 6.0, 41);
    TrainConfig tc;
    tc.lr = 0.05;
    tc.epochs = 120;
    tc.batch_size = 32;
    tc.patience = 30;
    BaselineTrainResult res = train_baseline(ds, BaselineKind::logreg, TaskKind::classification, "a", tc, 5);
    MetricsReport rep = evaluate_baseline(res.model, ds, "a", TaskKind::classification);
    CHECK(rep.classification.accuracy >= 0.99);
}

TEST_CASE("mlp baseline solves xor where the linear model cannot", "[trainer]") {
    MultimodalDataset ds = make_xor(60, 42);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 200;
    tc.batch_size = 32;
    tc.patience = 60;

    BaselineTrainResult mlp = train_baseline(ds, BaselineKind::mlp, TaskKind::classification, "a", tc, 5);
    MetricsReport mlp_rep = evaluate_baseline(mlp.model, ds, "a", TaskKind::classification);
    CHECK(mlp_rep.classification.accuracy >= 0.95);

    BaselineTrainResult lin = train_baseline(ds, BaselineKind::logreg, TaskKind::classification, "a", tc, 5);
    MetricsReport lin_rep = evaluate_baseline(lin.model, ds, "a", TaskKind::classification);
    CHECK(lin_rep.classification.accuracy <= 0.6);
}

TEST_CASE("baseline regression fits a linear map", "[trainer]") {
    MultimodalDataset ds;
    ds.dim_a = 1;
    ds.dim_b = 1;
    Rng rng(77);
    for (int i = 0; i < 120; ++i) {
        Record r;
        r.id = "r" + std::to_string(i);
        const double x = rng.uniform(-2.0, 2.0);
        r.mod_a = {x};
        r.mod_b = {0.0};
        r.label = 3.0 * x + 1.0;
        ds.records.push_back(r);
    }
    TrainConfig tc;
    tc.lr = 0.05;
    tc.epochs = 300;
    tc.batch_size = 32;
    tc.patience = 100;
    BaselineTrainResult res = train_baseline(ds, BaselineKind::logreg, TaskKind::regression, "a", tc, 9);
    MetricsReport rep = evaluate_baseline(res.model, ds, "a", TaskKind::regression);
    CHECK(rep.regression.r2 >= 0.98);
}

TEST_CASE("class weights are inverse frequency normalised by class count", "[trainer]") {
    ClassWeights w = class_weights({90, 10});
    REQUIRE(w.num_classes() == 2);
    CHECK_THAT(w.at(0), Catch::Matchers::WithinAbs(100.0 / (2.0 * 90.0), 1e-12));  // 0.5556
    CHECK_THAT(w.at(1), Catch::Matchers::WithinAbs(5.0, 1e-12));
}

TEST_CASE("evaluate_model gives perfect scores to an oracle predictor", "[trainer]") {
    MultimodalDataset ds;
    ds.dim_a = 1;
    ds.dim_b = 1;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        Record r;
        r.id = "e" + std::to_string(i);
        r.mod_a = {static_cast<double>(i % 3)};
        r.mod_b = {0.0};
        r.label = i % 3;
        ds.records.push_back(r);
        labels.push_back(i % 3);
    }
    auto oracle = [&](const Tensor& a, const Tensor&) {
        Tensor y = Tensor::zeros({a.shape[0], 3});
        for (int i = 0; i < a.shape[0]; ++i) y.set(i, static_cast<int>(a.at(i, 0)), 20.0);
        return y;
    };
    MetricsReport rep = evaluate_model(oracle, ds, TaskKind::classification);
    CHECK(rep.n == 30);
    CHECK(rep.classification.accuracy == 1.0);
    CHECK(rep.classification.f1_macro == 1.0);
    CHECK(rep.classification.f1_weighted == 1.0);
    CHECK(rep.classification.auc_macro == 1.0);
}

TEST_CASE("predicting the target mean pins r2 at zero", "[trainer]") {
    MultimodalDataset ds;
    ds.dim_a = 1;
    ds.dim_b = 1;
    for (int i = 0; i < 4; ++i) {
        Record r;
        r.id = "m" + std::to_string(i);
        r.mod_a = {0.0};
        r.mod_b = {0.0};
        r.label = static_cast<double>(i + 1);  // 1..4, mean 2.5
        ds.records.push_back(r);
    }
    auto constant = [](const Tensor& a, const Tensor&) {
        Tensor y = Tensor::zeros({a.shape[0], 1});
        for (int i = 0; i < a.shape[0]; ++i) y.set(i, 0, 2.5);
        return y;
    };
    MetricsReport rep = evaluate_model(constant, ds, TaskKind::regression);
    CHECK(rep.regression.r2 == 0.0);
    CHECK(rep.regression.mse == 1.25);
}

TEST_CASE("evaluation is invariant to test-set row order", "[trainer]") {
    MultimodalDataset ds;
    ds.dim_a = 1;
    ds.dim_b = 1;
    Rng rng(55);
    for (int i = 0; i < 40; ++i) {
        Record r;
        r.id = "p" + std::to_string(i);
        const double x = rng.normal();
        r.mod_a = {x};
        r.mod_b = {0.0};
        r.label = (x + 0.3 * rng.normal()) > 0 ? 1.0 : 0.0;
        ds.records.push_back(r);
    }
    MultimodalDataset shuffled = detail::like(ds);
    shuffled.records = ds.records;
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(56);
    detail::shuffle_indices(order, shuffle_rng);
    for (std::size_t i = 0; i < order.size(); ++i) shuffled.records[i] = ds.records[order[i]];

    auto predict = [](const Tensor& a, const Tensor&) {
        Tensor y = Tensor::zeros({a.shape[0], 2});
        for (int i = 0; i < a.shape[0]; ++i) {
            y.set(i, 0, -a.at(i, 0));
            y.set(i, 1, a.at(i, 0));
        }
        return y;
    };
    MetricsReport r1 = evaluate_model(predict, ds, TaskKind::classification);
    MetricsReport r2 = evaluate_model(predict, shuffled, TaskKind::classification);
    CHECK(r1.classification.accuracy == r2.classification.accuracy);
    CHECK(r1.classification.f1_macro == r2.classification.f1_macro);
    CHECK(r1.classification.f1_weighted == r2.classification.f1_weighted);
    CHECK(r1.classification.auc_macro == r2.classification.auc_macro);
}

TEST_CASE("evaluate_model rejects an empty test set", "[trainer]") {
    MultimodalDataset ds;
    ds.dim_a = 1;
    ds.dim_b = 1;
    auto predict = [](const Tensor& a, const Tensor&) { return Tensor::zeros({a.shape[0], 2}); };
    CHECK_THROWS_WITH(evaluate_model(predict, ds, TaskKind::classification), ContainsSubstring("empty test set"));
}

TEST_CASE("grouped metrics appear when the dataset carries groups", "[trainer]") {
    MultimodalDataset ds;
    ds.dim_a = 1;
    ds.dim_b = 1;
    ds.has_group = true;
    for (int i = 0; i < 12; ++i) {
        Record r;
        r.id = "g" + std::to_string(i);
        r.mod_a = {static_cast<double>(i % 2)};
        r.mod_b = {0.0};
        r.label = i % 2;
        r.group = i < 6 ? "g0" : "g1";
        ds.records.push_back(r);
    }
    auto oracle = [](const Tensor& a, const Tensor&) {
        Tensor y = Tensor::zeros({a.shape[0], 2});
        for (int i = 0; i < a.shape[0]; ++i) y.set(i, static_cast<int>(a.at(i, 0)), 10.0);
        return y;
    };
    MetricsReport rep = evaluate_model(oracle, ds, TaskKind::classification);
    REQUIRE(rep.grouped);
    CHECK(rep.group_classification.by_group.size() == 2);
}

TEST_CASE("metrics_to_map exposes the headline numbers", "[trainer]") {
    MetricsReport rep;
    rep.task = TaskKind::classification;
    rep.classification.accuracy = 0.5;
    rep.classification.f1_macro = 0.25;
    auto m = metrics_to_map(rep);
    CHECK(m.at("accuracy") == 0.5);
    CHECK(m.at("f1_macro") == 0.25);
    CHECK(m.count("auc_macro") == 1);

    MetricsReport reg;
    reg.task = TaskKind::regression;
    reg.regression.rmse = 2.0;
    auto mr = metrics_to_map(reg);
    CHECK(mr.at("rmse") == 2.0);
    CHECK(mr.count("r2") == 1);
}

TEST_CASE("multi seed aggregation reports sample mean and stddev", "[trainer]") {
    auto run = [](std::uint64_t seed) {
        std::map<std::string, double> m;
        m["f1_macro"] = seed == 1 ? 0.8 : 0.9;
        return m;
    };
    MultiSeedResult res = multi_seed_run({1, 2}, run);
    REQUIRE(res.per_seed.size() == 2);
    CHECK_THAT(res.summary.at("f1_macro").mean, Catch::Matchers::WithinAbs(0.85, 1e-12));
    CHECK_THAT(res.summary.at("f1_macro").stddev, Catch::Matchers::WithinAbs(0.07071067811865475, 1e-12));
}

TEST_CASE("multi seed stddev is exactly zero for identical runs", "[trainer]") {
    auto run = [](std::uint64_t) { return std::map<std::string, double>{{"r2", 0.7}}; };
    MultiSeedResult res = multi_seed_run({4, 5, 6}, run);
    CHECK(res.summary.at("r2").mean == 0.7);
    CHECK(res.summary.at("r2").stddev == 0.0);
}

TEST_CASE("multi seed run needs at least two seeds and names the failing one", "[trainer]") {
    auto run = [](std::uint64_t) { return std::map<std::string, double>{{"x", 0.0}}; };
    CHECK_THROWS_WITH(multi_seed_run({1}, run), ContainsSubstring(">= 2 seeds"));

    auto bad = [](std::uint64_t seed) -> std::map<std::string, double> {
        if (seed == 5) throw std::runtime_error("boom");
        return {{"x", 0.0}};
    };
    CHECK_THROWS_WITH(multi_seed_run({4, 5}, bad), ContainsSubstring("seed 5 failed: boom"));
}

TEST_CASE("checkpoint round-trips parameters bit for bit", "[trainer][checkpoint]") {
    Rng rng(31);
    ParamSet ps;
    ps.matrix("w", 3, 4, rng);
    ps.bias("b", 4);
    (*ps.get("b").data)[2] = -0.75;

    std::map<std::string, std::string> config{{"arch", "ddf"}, {"seeds", "1,2,3"}};
    std::vector<std::pair<double, double>> history{{1.25, 1.5}, {0.5, 0.75}};
    CheckpointData data = checkpoint_from(ps, config, 42, history);

    const std::string path = temp_path("ckpt_roundtrip");
    checkpoint_save(path, data);
    CheckpointData loaded = checkpoint_load(path);

    CHECK(loaded.config == config);
    CHECK(loaded.seed == 42);
    REQUIRE(loaded.history.size() == 2);
    CHECK(loaded.history[0] == history[0]);
    CHECK(loaded.history[1] == history[1]);
    REQUIRE(loaded.params.size() == 2);

    // Scramble the model, restore, and demand exact equality.
    const std::vector<std::vector<double>> original = ps.snapshot();
    Rng scramble(32);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        for (double& v : *ps.entry(i).tensor.data) v = scramble.normal();
    }
    checkpoint_restore(loaded, ps);
    const std::vector<std::vector<double>> restored = ps.snapshot();
    REQUIRE(restored.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        REQUIRE(restored[i].size() == original[i].size());
        for (std::size_t j = 0; j < original[i].size(); ++j) CHECK(restored[i][j] == original[i][j]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoints fail the checksum before parsing", "[trainer][checkpoint]") {
    Rng rng(33);
    ParamSet ps;
    ps.matrix("w", 4, 4, rng);
    CheckpointData data = checkpoint_from(ps, {{"k", "v"}}, 7, {{1.0, 2.0}});
    std::string bytes = checkpoint_serialize(data);

    for (std::size_t cut : {bytes.size() - 5, bytes.size() / 2, std::size_t{20}}) {
        const std::string truncated = bytes.substr(0, cut);
        CHECK_THROWS_WITH(checkpoint_parse(truncated), ContainsSubstring("checksum mismatch"));
    }

    // single flipped payload byte is also caught
    std::string corrupt = bytes;
    corrupt[bytes.size() / 2] = static_cast<char>(corrupt[bytes.size() / 2] ^ 0x40);
    CHECK_THROWS_WITH(checkpoint_parse(corrupt), ContainsSubstring("checksum mismatch"));
}

TEST_CASE("checkpoints with a foreign magic or version are rejected", "[trainer][checkpoint]") {
    CHECK_THROWS_WITH(checkpoint_parse("hello world, definitely not a checkpoint"),
                      ContainsSubstring("not a checkpoint file"));

    Rng rng(34);
    ParamSet ps;
    ps.bias("b", 2);
    std::string bytes = checkpoint_serialize(checkpoint_from(ps, {}, 1, {}));
    // bump the version field, then re-stamp the checksum so only the version trips
    bytes[8] = 2;
    const std::string body = bytes.substr(0, bytes.size() - 8);
    const std::uint64_t sum = detail::fnv1a(body);
    for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + i] = static_cast<char>((sum >> (8 * i)) & 0xff);
    CHECK_THROWS_WITH(checkpoint_parse(bytes), ContainsSubstring("version 2 is not supported"));
}

TEST_CASE("restore rejects mismatched parameter sets", "[trainer][checkpoint]") {
    Rng rng(35);
    ParamSet saved;
    saved.matrix("w", 2, 3, rng);
    CheckpointData data = checkpoint_from(saved, {}, 0, {});

    ParamSet wrong_shape;
    wrong_shape.matrix("w", 3, 2, rng);
    CHECK_THROWS_WITH(checkpoint_restore(data, wrong_shape),
                      ContainsSubstring("dimension mismatch for w"));

    ParamSet wrong_name;
    wrong_name.matrix("v", 2, 3, rng);
    CHECK_THROWS_WITH(checkpoint_restore(data, wrong_name), ContainsSubstring("missing parameter"));

    ParamSet extra;
    extra.matrix("w", 2, 3, rng);
    extra.bias("b", 3);
    CHECK_THROWS_WITH(checkpoint_restore(data, extra), ContainsSubstring("parameters"));
}

TEST_CASE("checkpoint config keys may not contain separators", "[trainer][checkpoint]") {
    ParamSet ps;
    ps.bias("b", 1);
    CHECK_THROWS_AS(checkpoint_serialize(checkpoint_from(ps, {{"bad=key", "v"}}, 0, {})), std::runtime_error);
    CHECK_THROWS_AS(checkpoint_serialize(checkpoint_from(ps, {{"k", "bad\nvalue"}}, 0, {})), std::runtime_error);
}

TEST_CASE("trained fusion model survives a checkpoint round-trip unchanged", "[trainer][checkpoint]") {
    MultimodalDataset ds = make_fusion_blobs(25, 2, 61);
    FusionConfig cfg = small_fusion_config(0.0);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 5;
    tc.batch_size = 16;
    FusionTrainResult res = train_fusion(ds, cfg, tc, 17);

    std::vector<std::pair<double, double>> hist;
    for (const EpochLosses& e : res.history) hist.emplace_back(e.train, e.val);
    const std::string path = temp_path("ckpt_fusion");
    checkpoint_save(path, checkpoint_from(res.model.params(), {{"arch", "ddf"}}, 17, hist));

    MetricsReport before = evaluate_fusion(res.model, ds);

    Rng fresh_rng(62);
    FusionModel fresh(cfg, fresh_rng);
    checkpoint_restore(checkpoint_load(path), fresh.params());
    CHECK(fresh.params().value_hash() == res.model.params().value_hash());

    MetricsReport after = evaluate_fusion(fresh, ds);
    CHECK(before.classification.accuracy == after.classification.accuracy);
    CHECK(before.classification.f1_macro == after.classification.f1_macro);
    std::filesystem::remove(path);
}
