#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddf/club.hpp"
#include "ddf/data.hpp"
#include "ddf/fusion.hpp"
#include "ddf/losses.hpp"
#include "ddf/metrics.hpp"
#include "ddf/optim.hpp"
#include "ddf/params.hpp"
#include "ddf/rng.hpp"

namespace ddf {

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 200;
    int batch_size = 32;
    int patience = 7;
    std::string optimizer = "adam";  // adam | sgd
    double lambda_mi = 0.0;
    double gamma_focal = 2.0;
    double weight_decay = 1e-4;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    double val_frac = 0.15;
    bool summed_mi = false;  // single summed MI loss instead of alternating updates
    double estimator_lr = 1e-3;
    int estimator_hidden = 32;

    void validate() const {
        if (!(lr > 0.0)) throw std::runtime_error("train config: lr must be > 0");
        if (epochs < 1) throw std::runtime_error("train config: epochs must be >= 1");
        if (batch_size < 1) throw std::runtime_error("train config: batch_size must be >= 1");
        if (patience < 1) throw std::runtime_error("train config: patience must be >= 1");
        if (optimizer != "adam" && optimizer != "sgd") throw std::runtime_error("train config: optimizer must be adam or sgd");
        if (!(val_frac > 0.0 && val_frac < 0.5)) throw std::runtime_error("train config: val_frac must be in (0, 0.5)");
        if (!(lambda_mi >= 0.0 && lambda_mi <= 1.0)) throw std::runtime_error("train config: lambda_mi must be in [0, 1]");
        if (gamma_focal < 0.0) throw std::runtime_error("train config: gamma_focal must be >= 0");
        if (weight_decay < 0.0) throw std::runtime_error("train config: weight_decay must be >= 0");
        if (!(estimator_lr > 0.0)) throw std::runtime_error("train config: estimator_lr must be > 0");
        if (estimator_hidden < 1) throw std::runtime_error("train config: estimator_hidden must be >= 1");
        if (seeds.empty()) throw std::runtime_error("train config: need at least one seed");
    }
};

// Tracks validation loss with strict improvement, keeps the best-epoch
// snapshot, and fires once `patience` consecutive epochs fail to improve.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw std::runtime_error("early stop: patience must be >= 1");
    }

    // Records one epoch (1-based). Returns true when training should stop.
    bool observe(double val_loss, const ParamSet& params) {
        ++epoch_;
        if (val_loss < best_val_) {
            best_val_ = val_loss;
            best_epoch_ = epoch_;
            best_snapshot_ = params.snapshot();
            since_improve_ = 0;
            return false;
        }
        ++since_improve_;
        return since_improve_ >= patience_;
    }

    void restore_best(ParamSet& params) const {
        if (best_snapshot_.empty()) throw std::runtime_error("early stop: no snapshot recorded yet");
        params.restore(best_snapshot_);
    }

    double best_val() const { return best_val_; }
    int best_epoch() const { return best_epoch_; }
    int epochs_since_improve() const { return since_improve_; }
    int epochs_seen() const { return epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_improve_ = 0;
    double best_val_ = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_snapshot_;
};

// Uniform step interface over the two concrete update rules.
class Optimizer {
public:
    Optimizer(const std::string& kind, double lr) {
        if (kind == "adam") {
            adam_.emplace(lr);
        } else if (kind == "sgd") {
            sgd_.emplace(lr);
        } else {
            throw std::runtime_error("optimizer: unknown kind " + kind);
        }
    }

    void step(ParamSet& params) {
        if (adam_) {
            adam_->step(params);
        } else {
            sgd_->step(params);
        }
    }

private:
    std::optional<AdamOptimizer> adam_;
    std::optional<SgdOptimizer> sgd_;
};

namespace detail {

inline Tensor modality_tensor(const MultimodalDataset& ds, const std::vector<std::size_t>& rows, bool modality_a) {
    const int d = modality_a ? ds.dim_a : ds.dim_b;
    Tensor t = Tensor::zeros({static_cast<int>(rows.size()), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<double>& f = modality_a ? ds.records[rows[i]].mod_a : ds.records[rows[i]].mod_b;
        for (int j = 0; j < d; ++j) t.set(static_cast<int>(i), j, f[j]);
    }
    return t;
}

inline std::vector<std::size_t> all_rows(const MultimodalDataset& ds) {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

inline std::vector<int> class_targets(const MultimodalDataset& ds, const std::vector<std::size_t>& rows, int n_classes) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) {
        const double label = ds.records[r].label;
        const int c = static_cast<int>(label);
        if (static_cast<double>(c) != label || c < 0 || c >= n_classes) {
            throw std::runtime_error("trainer: label " + std::to_string(label) + " of record " + ds.records[r].id +
                                     " is not a class id in [0, " + std::to_string(n_classes) + ")");
        }
        out.push_back(c);
    }
    return out;
}

inline Tensor value_targets(const MultimodalDataset& ds, const std::vector<std::size_t>& rows) {
    Tensor t = Tensor::zeros({static_cast<int>(rows.size())});
    for (std::size_t i = 0; i < rows.size(); ++i) (*t.data)[i] = ds.records[rows[i]].label;
    return t;
}

// Unstratified random split for regression data without a time axis.
inline std::pair<MultimodalDataset, MultimodalDataset> random_split(const MultimodalDataset& ds, double train_frac,
                                                                    std::uint64_t seed) {
    std::vector<std::size_t> idx = all_rows(ds);
    Rng rng(derive_seed(seed, "plain-split"));
    shuffle_indices(idx, rng);
    const auto n = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(idx.size())));
    const std::size_t n_train = std::clamp<std::size_t>(n, 1, idx.size() - 1);
    MultimodalDataset train = like(ds), test = like(ds);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        (k < n_train ? train : test).records.push_back(ds.records[idx[k]]);
    }
    return {train, test};
}

// Train/val carve: stratified for classification, chronological when a time
// axis exists, plain random otherwise.
inline std::pair<MultimodalDataset, MultimodalDataset> carve_validation(const MultimodalDataset& ds, TaskKind task,
                                                                        double val_frac, std::uint64_t seed) {
    if (ds.size() < 2) throw std::runtime_error("trainer: need at least 2 records to carve validation data");
    if (task == TaskKind::classification) return split_random_stratified(ds, 1.0 - val_frac, derive_seed(seed, "val-carve"));
    if (ds.has_t) return split_chronological(ds, 1.0 - val_frac);
    return random_split(ds, 1.0 - val_frac, derive_seed(seed, "val-carve"));
}

inline std::vector<long long> label_counts(const std::vector<int>& labels, int n_classes) {
    std::vector<long long> counts(static_cast<std::size_t>(n_classes), 0);
    for (int c : labels) ++counts[static_cast<std::size_t>(c)];
    return counts;
}

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle_indices(idx, rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(idx.begin() + start, idx.begin() + end);
    }
    return batches;
}

}  // namespace detail

// Per-batch targets for either task.
struct BatchTargets {
    std::vector<int> labels;  // classification
    Tensor values;            // regression, [N]
};

// Phase 1 of the alternating schedule: one ascent step fitting the
// variational q to the current branch outputs. Inputs are detached, so only
// estimator parameters move.
inline void estimator_ascent_step(const FusionOutputs& f, ClubEstimator& est, Optimizer& opt) {
    est.params().zero_grad();
    Tensor ab = ops::concat_cols({ops::detach(f.s_a), ops::detach(f.s_b)});
    Tensor nll = ops::neg(ops::mean(loglik_rows_graph(ab, ops::detach(f.s_c), est)));
    backward(nll);
    opt.step(est.params());
    est.params().zero_grad();
}

// Phase 2: one descent step on objective + lambda*MI + L2. The estimator
// contributes to the MI term's graph but is not stepped here (except in
// summed mode, where one combined loss drives both parameter sets, likelihood
// term included). Returns the loss value optimized.
inline double model_descent_step(FusionModel& model, const FusionOutputs& f, const BatchTargets& targets,
                                 const ClassWeights& weights, const TrainConfig& tc, ClubEstimator* est,
                                 Optimizer& model_opt, Optimizer* est_opt) {
    const FusionConfig& cfg = model.config();
    model.params().zero_grad();
    if (est) est->params().zero_grad();

    Tensor loss = cfg.task == TaskKind::classification
                      ? fusion_loss(f.y, targets.labels, weights, tc.gamma_focal, f.s_a, f.s_b, f.s_c, est, cfg)
                      : fusion_loss(f.y, targets.values, f.s_a, f.s_b, f.s_c, est, cfg);
    if (tc.summed_mi && cfg.lambda > 0.0) {
        if (est == nullptr) throw std::runtime_error("model step: summed MI mode requires an estimator");
        Tensor ab = ops::concat_cols({f.s_a, f.s_b});
        Tensor nll = ops::neg(ops::mean(loglik_rows_graph(ab, f.s_c, *est)));
        loss = ops::add(loss, ops::scalar_mul(nll, cfg.lambda));
    }
    if (tc.weight_decay > 0.0) loss = ops::add(loss, l2_penalty(model.params(), tc.weight_decay));

    backward(loss);
    model_opt.step(model.params());
    if (tc.summed_mi && cfg.lambda > 0.0 && est_opt) est_opt->step(est->params());
    model.params().zero_grad();
    if (est) est->params().zero_grad();
    return loss.value();
}

struct EpochLosses {
    double train = 0.0;
    double val = 0.0;
};

struct FusionTrainResult {
    FusionModel model;
    ClubEstimator estimator;
    std::vector<EpochLosses> history;
    int best_epoch = 0;  // 1-based
    double best_val = std::numeric_limits<double>::quiet_NaN();
    bool early_stopped = false;
};

// Full training run: carve validation from the given training data, run the
// alternating (or summed) schedule with minibatches, early-stop on the
// validation objective, and restore the best-epoch weights. History records
// the mean optimized batch loss and the validation objective per epoch.
// tc.lambda_mi overrides cfg.lambda so one knob controls the schedule.
inline FusionTrainResult train_fusion(const MultimodalDataset& ds, FusionConfig cfg, const TrainConfig& tc,
                                      std::uint64_t seed) {
    tc.validate();
    cfg.lambda = tc.lambda_mi;
    cfg.validate();
    const int expect_a = cfg.temporal ? cfg.window * cfg.d_in_a : cfg.d_in_a;
    const int expect_b = cfg.temporal ? cfg.window * cfg.d_in_b : cfg.d_in_b;
    if (ds.dim_a != expect_a || ds.dim_b != expect_b) {
        throw std::runtime_error("train_fusion: dataset dims (" + std::to_string(ds.dim_a) + "," + std::to_string(ds.dim_b) +
                                 ") do not match config expectation (" + std::to_string(expect_a) + "," +
                                 std::to_string(expect_b) + ")");
    }

    auto [train_part, val_part] = detail::carve_validation(ds, cfg.task, tc.val_frac, seed);

    Rng model_rng(derive_seed(seed, "fusion-init"));
    Rng est_rng(derive_seed(seed, "estimator-init"));
    FusionTrainResult res{FusionModel(cfg, model_rng),
                          ClubEstimator(2 * cfg.d_specific, cfg.d_common, tc.estimator_hidden, est_rng),
                          {}};

    const bool classify = cfg.task == TaskKind::classification;
    const std::vector<std::size_t> train_rows = detail::all_rows(train_part);
    const std::vector<std::size_t> val_rows = detail::all_rows(val_part);
    ClassWeights weights = ClassWeights::uniform(cfg.n_classes);
    std::vector<int> train_labels, val_labels;
    Tensor train_values, val_values;
    if (classify) {
        train_labels = detail::class_targets(train_part, train_rows, cfg.n_classes);
        val_labels = detail::class_targets(val_part, val_rows, cfg.n_classes);
        weights = class_weights(detail::label_counts(train_labels, cfg.n_classes));
    } else {
        train_values = detail::value_targets(train_part, train_rows);
        val_values = detail::value_targets(val_part, val_rows);
    }
    Tensor val_a = detail::modality_tensor(val_part, val_rows, true);
    Tensor val_b = detail::modality_tensor(val_part, val_rows, false);

    Optimizer model_opt(tc.optimizer, tc.lr);
    Optimizer est_opt("adam", tc.estimator_lr);
    EarlyStopper stopper(tc.patience);
    Rng batch_rng(derive_seed(seed, "batch-order"));

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (const std::vector<std::size_t>& batch : detail::epoch_batches(train_part.size(), tc.batch_size, batch_rng)) {
            std::vector<std::size_t> rows;
            rows.reserve(batch.size());
            for (std::size_t b : batch) rows.push_back(train_rows[b]);
            Tensor a = detail::modality_tensor(train_part, rows, true);
            Tensor b = detail::modality_tensor(train_part, rows, false);
            BatchTargets bt;
            if (classify) {
                for (std::size_t b_i : batch) bt.labels.push_back(train_labels[b_i]);
            } else {
                Tensor v = Tensor::zeros({static_cast<int>(batch.size())});
                for (std::size_t i = 0; i < batch.size(); ++i) (*v.data)[i] = (*train_values.data)[batch[i]];
                bt.values = v;
            }

            FusionOutputs f = res.model.forward(a, b);
            if (cfg.lambda > 0.0 && !tc.summed_mi) estimator_ascent_step(f, res.estimator, est_opt);
            loss_sum += model_descent_step(res.model, f, bt, weights, tc, &res.estimator, model_opt, &est_opt) *
                        static_cast<double>(batch.size());
            seen += batch.size();
        }

        FusionOutputs vf = res.model.forward(val_a, val_b);
        const double val_loss = classify
                                    ? focal_loss(ops::softmax(vf.y), val_labels, weights, tc.gamma_focal).value()
                                    : mse_loss(ops::reshape(vf.y, {vf.y.shape[0]}), val_values).value();
        res.history.push_back({loss_sum / static_cast<double>(seen), val_loss});
        if (stopper.observe(val_loss, res.model.params())) {
            res.early_stopped = true;
            break;
        }
    }

    stopper.restore_best(res.model.params());
    res.best_epoch = stopper.best_epoch();
    res.best_val = stopper.best_val();
    return res;
}

enum class BaselineKind { logreg, mlp };

// Early-fusion baselines over a single feature block: a linear softmax
// classifier, or a two-hidden-layer relu net.
class BaselineModel {
public:
    static constexpr int kHidden = 64;

    BaselineModel(BaselineKind kind, int d_in, int n_out, Rng& rng) : kind_(kind), d_in_(d_in), n_out_(n_out) {
        if (d_in < 1 || n_out < 1) throw std::runtime_error("baseline: dims must be positive");
        if (kind_ == BaselineKind::logreg) {
            params_.matrix("w", d_in, n_out, rng);
            params_.bias("b", n_out);
        } else {
            params_.matrix("w1", d_in, kHidden, rng);
            params_.bias("b1", kHidden);
            params_.matrix("w2", kHidden, kHidden, rng);
            params_.bias("b2", kHidden);
            params_.matrix("w3", kHidden, n_out, rng);
            params_.bias("b3", n_out);
        }
    }

    BaselineKind kind() const { return kind_; }
    int d_in() const { return d_in_; }
    int n_out() const { return n_out_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // [N, d_in] -> [N, n_out] raw scores.
    Tensor forward(const Tensor& x) const {
        if (x.ndim() != 2 || x.shape[1] != d_in_) throw std::runtime_error("baseline: expected [N, " + std::to_string(d_in_) + "] batch");
        if (kind_ == BaselineKind::logreg) {
            return ops::add_rowwise(ops::matmul(x, params_.get("w")), params_.get("b"));
        }
        Tensor h1 = ops::relu(ops::add_rowwise(ops::matmul(x, params_.get("w1")), params_.get("b1")));
        Tensor h2 = ops::relu(ops::add_rowwise(ops::matmul(h1, params_.get("w2")), params_.get("b2")));
        return ops::add_rowwise(ops::matmul(h2, params_.get("w3")), params_.get("b3"));
    }

private:
    BaselineKind kind_;
    int d_in_, n_out_;
    ParamSet params_;
};

// Feature block for a modality selection: "a", "b", or "ab" (early-fusion
// concatenation).
inline Tensor features(const MultimodalDataset& ds, const std::string& modalities,
                       const std::vector<std::size_t>& rows) {
    if (modalities != "a" && modalities != "b" && modalities != "ab") {
        throw std::runtime_error("features: modalities must be a, b, or ab");
    }
    const bool use_a = modalities != "b";
    const bool use_b = modalities != "a";
    const int d = (use_a ? ds.dim_a : 0) + (use_b ? ds.dim_b : 0);
    Tensor t = Tensor::zeros({static_cast<int>(rows.size()), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Record& r = ds.records[rows[i]];
        int j = 0;
        if (use_a) {
            for (double v : r.mod_a) t.set(static_cast<int>(i), j++, v);
        }
        if (use_b) {
            for (double v : r.mod_b) t.set(static_cast<int>(i), j++, v);
        }
    }
    return t;
}

inline Tensor features(const MultimodalDataset& ds, const std::string& modalities) {
    return features(ds, modalities, detail::all_rows(ds));
}

struct BaselineTrainResult {
    BaselineModel model;
    std::vector<EpochLosses> history;
    int best_epoch = 0;
    double best_val = std::numeric_limits<double>::quiet_NaN();
    bool early_stopped = false;
};

// Baseline training: class-weighted focal loss for classification, mse for
// regression; the mlp adds the L2 penalty. Same carve/batching/early-stop
// contract as train_fusion.
inline BaselineTrainResult train_baseline(const MultimodalDataset& ds, BaselineKind kind, TaskKind task,
                                          const std::string& modalities, const TrainConfig& tc, std::uint64_t seed,
                                          int n_classes_hint = 0) {
    tc.validate();
    const bool classify = task == TaskKind::classification;
    int n_classes = 2;
    if (classify) {
        double top = 0.0;
        for (const Record& r : ds.records) top = std::max(top, r.label);
        n_classes = std::max(static_cast<int>(top) + 1, n_classes_hint);
        if (n_classes < 2) throw std::runtime_error("train_baseline: need at least two classes");
    }

    auto [train_part, val_part] = detail::carve_validation(ds, task, tc.val_frac, seed);
    const std::vector<std::size_t> train_rows = detail::all_rows(train_part);
    const std::vector<std::size_t> val_rows = detail::all_rows(val_part);

    Tensor train_x = features(train_part, modalities, train_rows);
    Tensor val_x = features(val_part, modalities, val_rows);
    ClassWeights weights = ClassWeights::uniform(n_classes);
    std::vector<int> train_labels, val_labels;
    Tensor train_values, val_values;
    if (classify) {
        train_labels = detail::class_targets(train_part, train_rows, n_classes);
        val_labels = detail::class_targets(val_part, val_rows, n_classes);
        weights = class_weights(detail::label_counts(train_labels, n_classes));
    } else {
        train_values = detail::value_targets(train_part, train_rows);
        val_values = detail::value_targets(val_part, val_rows);
    }

    Rng init_rng(derive_seed(seed, "baseline-init"));
    BaselineTrainResult res{BaselineModel(kind, train_x.shape[1], classify ? n_classes : 1, init_rng), {}};

    Optimizer opt(tc.optimizer, tc.lr);
    EarlyStopper stopper(tc.patience);
    Rng batch_rng(derive_seed(seed, "batch-order"));

    auto objective = [&](const Tensor& y, const std::vector<int>& labels, const Tensor& values) {
        return classify ? focal_loss(ops::softmax(y), labels, weights, tc.gamma_focal)
                        : mse_loss(ops::reshape(y, {y.shape[0]}), values);
    };

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (const std::vector<std::size_t>& batch : detail::epoch_batches(train_part.size(), tc.batch_size, batch_rng)) {
            Tensor x = Tensor::zeros({static_cast<int>(batch.size()), train_x.shape[1]});
            std::vector<int> labels;
            Tensor values = Tensor::zeros({static_cast<int>(batch.size())});
            for (std::size_t i = 0; i < batch.size(); ++i) {
                for (int j = 0; j < train_x.shape[1]; ++j) x.set(static_cast<int>(i), j, train_x.at(static_cast<int>(batch[i]), j));
                if (classify) {
                    labels.push_back(train_labels[batch[i]]);
                } else {
                    (*values.data)[i] = (*train_values.data)[batch[i]];
                }
            }
            res.model.params().zero_grad();
            Tensor loss = objective(res.model.forward(x), labels, values);
            if (kind == BaselineKind::mlp && tc.weight_decay > 0.0) {
                loss = ops::add(loss, l2_penalty(res.model.params(), tc.weight_decay));
            }
            backward(loss);
            opt.step(res.model.params());
            res.model.params().zero_grad();
            loss_sum += loss.value() * static_cast<double>(batch.size());
            seen += batch.size();
        }

        const double val_loss = objective(res.model.forward(val_x), val_labels, val_values).value();
        res.history.push_back({loss_sum / static_cast<double>(seen), val_loss});
        if (stopper.observe(val_loss, res.model.params())) {
            res.early_stopped = true;
            break;
        }
    }

    stopper.restore_best(res.model.params());
    res.best_epoch = stopper.best_epoch();
    res.best_val = stopper.best_val();
    return res;
}

struct MetricsReport {
    TaskKind task = TaskKind::classification;
    std::size_t n = 0;
    ClassificationMetrics classification;
    RegressionMetrics regression;
    bool grouped = false;
    GroupedClassification group_classification;
    GroupedRegression group_regression;
};

// Evaluates any predictor (a -> b -> raw scores) on a test set. Scores are
// softmaxed for classification so reports are over probabilities. Group
// breakdowns are added when the dataset carries groups.
inline MetricsReport evaluate_model(const std::function<Tensor(const Tensor&, const Tensor&)>& predict,
                                    const MultimodalDataset& test, TaskKind task) {
    if (test.records.empty()) throw std::runtime_error("evaluate: empty test set");
    const std::vector<std::size_t> rows = detail::all_rows(test);
    Tensor a = detail::modality_tensor(test, rows, true);
    Tensor b = detail::modality_tensor(test, rows, false);
    Tensor y = ops::detach(predict(a, b));

    MetricsReport rep;
    rep.task = task;
    rep.n = test.size();
    std::vector<std::string> groups;
    if (test.has_group) {
        for (const Record& r : test.records) groups.push_back(r.group);
    }

    if (task == TaskKind::classification) {
        int n_classes = y.shape[1];
        std::vector<int> targets = detail::class_targets(test, rows, n_classes);
        Tensor probs = ops::softmax(y);
        rep.classification = full_classification_report(probs, targets);
        if (test.has_group) {
            rep.grouped = true;
            rep.group_classification = group_classification_report(probs, targets, groups);
        }
    } else {
        std::vector<double> pred(y.data->begin(), y.data->end());
        std::vector<double> target;
        for (const Record& r : test.records) target.push_back(r.label);
        rep.regression = regression_report(pred, target);
        if (test.has_group) {
            rep.grouped = true;
            rep.group_regression = group_regression_report(pred, target, groups);
        }
    }
    return rep;
}

inline MetricsReport evaluate_fusion(const FusionModel& model, const MultimodalDataset& test) {
    return evaluate_model([&](const Tensor& a, const Tensor& b) { return model.forward(a, b).y; }, test,
                          model.config().task);
}

inline MetricsReport evaluate_baseline(const BaselineModel& model, const MultimodalDataset& test,
                                       const std::string& modalities, TaskKind task) {
    return evaluate_model([&](const Tensor& a, const Tensor& b) {
        std::vector<Tensor> blocks;
        if (modalities != "b") blocks.push_back(a);
        if (modalities != "a") blocks.push_back(b);
        return model.forward(blocks.size() == 1 ? blocks[0] : ops::concat_cols(blocks));
    }, test, task);
}

// Flat metric view for aggregation and report files.
inline std::map<std::string, double> metrics_to_map(const MetricsReport& rep) {
    std::map<std::string, double> m;
    if (rep.task == TaskKind::classification) {
        m["accuracy"] = rep.classification.accuracy;
        m["f1_macro"] = rep.classification.f1_macro;
        m["f1_weighted"] = rep.classification.f1_weighted;
        m["auc_macro"] = rep.classification.auc_macro;
    } else {
        m["mae"] = rep.regression.mae;
        m["mse"] = rep.regression.mse;
        m["rmse"] = rep.regression.rmse;
        m["smape"] = rep.regression.smape;
        m["r2"] = rep.regression.r2;
    }
    return m;
}

struct SeedSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n-1)
};

struct MultiSeedResult {
    std::vector<std::uint64_t> seeds;
    std::vector<std::map<std::string, double>> per_seed;
    std::map<std::string, SeedSummary> summary;
};

// Runs the full pipeline once per seed and aggregates each metric's sample
// mean and standard deviation. A failing seed aborts the whole run with the
// seed named.
inline MultiSeedResult multi_seed_run(const std::vector<std::uint64_t>& seeds,
                                      const std::function<std::map<std::string, double>(std::uint64_t)>& run) {
    if (seeds.size() < 2) throw std::runtime_error("multi_seed_run: need >= 2 seeds for a standard deviation");
    MultiSeedResult res;
    res.seeds = seeds;
    for (std::uint64_t s : seeds) {
        try {
            res.per_seed.push_back(run(s));
        } catch (const std::exception& e) {
            throw std::runtime_error("multi_seed_run: seed " + std::to_string(s) + " failed: " + e.what());
        }
        if (res.per_seed.back().size() != res.per_seed.front().size()) {
            throw std::runtime_error("multi_seed_run: seed " + std::to_string(s) + " reported a different metric set");
        }
    }
    const double n = static_cast<double>(seeds.size());
    for (const auto& [key, first] : res.per_seed.front()) {
        bool all_equal = true;
        for (const auto& m : res.per_seed) all_equal = all_equal && m.at(key) == first;
        if (all_equal) {  // deterministic runs must not report rounding noise as variance
            res.summary[key] = {first, 0.0};
            continue;
        }
        double mean = 0.0;
        for (const auto& m : res.per_seed) mean += m.at(key);
        mean /= n;
        double ss = 0.0;
        for (const auto& m : res.per_seed) ss += (m.at(key) - mean) * (m.at(key) - mean);
        res.summary[key] = {mean, std::sqrt(ss / (n - 1.0))};
    }
    return res;
}

}  // namespace ddf
