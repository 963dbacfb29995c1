#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddf/checkpoint.hpp"
#include "ddf/data.hpp"
#include "ddf/fusion.hpp"
#include "ddf/gradcheck.hpp"
#include "ddf/synth.hpp"
#include "ddf/trainer.hpp"
#include "ddf/vae.hpp"

namespace ddf::cli {

using json = nlohmann::ordered_json;

// ------------------------------------------------------------------ helpers

inline std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_log(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("short write to " + path);
}

inline std::string file_digest(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(read_file_bytes(path))));
    return buf;
}

// Every subcommand drops one of these next to its outputs: the fully
// materialized configuration, digests of every input file, the seed list, and
// the produced files. Re-running with the same resolved config reproduces the
// outputs byte for byte.
struct Manifest {
    std::string subcommand;
    std::map<std::string, std::string> resolved;
    std::map<std::string, std::string> inputs;  // path -> digest
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> outputs;
};

inline std::string manifest_filename(const std::string& subcommand) {
    std::string name = subcommand;
    for (char& c : name) {
        if (c == '-') c = '_';
    }
    return name + "_manifest.json";
}

inline std::string write_manifest(const Manifest& m, const std::string& out_dir) {
    json doc;
    doc["subcommand"] = m.subcommand;
    doc["resolved"] = m.resolved;
    doc["inputs"] = m.inputs;
    doc["seeds"] = m.seeds;
    doc["outputs"] = m.outputs;
    const std::string path = (std::filesystem::path(out_dir) / manifest_filename(m.subcommand)).string();
    write_text_file(path, doc.dump(2) + "\n");
    return path;
}

// Flat "key = value" config file with '#' comments. Keys are the long option
// names without the leading dashes. Values from the file are injected as
// --key=value tokens for every option the command line did not already set,
// so precedence is command line, then file, then built-in defaults.
inline std::vector<std::pair<std::string, std::string>> parse_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        if (key == "config") throw std::runtime_error(path + ":" + std::to_string(lineno) + ": a config file cannot name another config file");
        if (!seen.insert(key).second) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        pairs.emplace_back(std::move(key), std::move(value));
    }
    return pairs;
}

inline void expand_config_args(std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw std::runtime_error("--config needs a file path");
            path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            break;
        }
    }
    if (path.empty()) return;
    const auto already_set = [&](const std::string& key) {
        const std::string flag = "--" + key;
        for (const std::string& a : args) {
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        }
        return false;
    };
    for (const auto& [key, value] : parse_flat_config(path)) {
        if (!already_set(key)) args.push_back("--" + key + "=" + value);
    }
}

struct TaskSpec {
    TaskKind kind = TaskKind::classification;
    bool temporal = false;
    std::string canon;  // cls | reg | temporal
};

inline TaskSpec parse_task(const std::string& s) {
    if (s == "cls" || s == "classification") return {TaskKind::classification, false, "cls"};
    if (s == "reg" || s == "regression") return {TaskKind::regression, false, "reg"};
    if (s == "temporal") return {TaskKind::regression, true, "temporal"};
    throw std::runtime_error("unknown task '" + s + "' (expected cls, reg, or temporal)");
}

// "--seeds 7,8,9" is an explicit list; a bare count like "--seeds 3" expands
// to base, base+1, ... so the default base seed 1 gives {1,2,3}.
inline std::vector<std::uint64_t> parse_seeds(const std::string& s, std::uint64_t base) {
    std::vector<std::uint64_t> out;
    if (s.find(',') == std::string::npos) {
        std::size_t used = 0;
        const long long count = std::stoll(s, &used);
        if (used != s.size() || count < 1) throw std::runtime_error("seeds: expected a count or a comma list, got '" + s + "'");
        for (long long i = 0; i < count; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
        return out;
    }
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(cell, &used);
        if (used != cell.size()) throw std::runtime_error("seeds: bad entry '" + cell + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::runtime_error("seeds: empty list");
    std::set<std::uint64_t> uniq(out.begin(), out.end());
    if (uniq.size() != out.size()) throw std::runtime_error("seeds: duplicate seed in list");
    return out;
}

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
    return s;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_full(v[i]);
    return s;
}

// Applies stored z-score statistics to a dataset, with the same constant-
// feature passthrough rule used when the statistics were fitted.
inline void apply_saved_zscore(MultimodalDataset& ds, const std::vector<double>& mean_a, const std::vector<double>& std_a,
                               const std::vector<double>& mean_b, const std::vector<double>& std_b) {
    if (static_cast<int>(mean_a.size()) != ds.dim_a || static_cast<int>(mean_b.size()) != ds.dim_b) {
        throw std::runtime_error("normalization stats do not match data width");
    }
    for (Record& r : ds.records) {
        for (int j = 0; j < ds.dim_a; ++j) {
            if (std_a[j] != 0.0) r.mod_a[j] = (r.mod_a[j] - mean_a[j]) / std_a[j];
        }
        for (int j = 0; j < ds.dim_b; ++j) {
            if (std_b[j] != 0.0) r.mod_b[j] = (r.mod_b[j] - mean_b[j]) / std_b[j];
        }
    }
}

inline json metrics_json(const MetricsReport& rep) {
    json m;
    for (const auto& [k, v] : metrics_to_map(rep)) m[k] = v;
    return m;
}

inline json grouped_json(const MetricsReport& rep) {
    json g;
    if (!rep.grouped) return g;
    if (rep.task == TaskKind::classification) {
        for (const auto& [name, cm] : rep.group_classification.by_group) {
            json row;
            row["accuracy"] = cm.accuracy;
            row["f1_macro"] = cm.f1_macro;
            row["f1_weighted"] = cm.f1_weighted;
            row["auc_macro"] = cm.auc_macro;
            g["by_group"][name] = row;
        }
        g["max_gap"] = rep.group_classification.max_gap;
        g["skipped_groups"] = rep.group_classification.skipped_groups;
    } else {
        for (const auto& [name, rm] : rep.group_regression.by_group) {
            json row;
            row["mae"] = rm.mae;
            row["mse"] = rm.mse;
            row["rmse"] = rm.rmse;
            row["smape"] = rm.smape;
            row["r2"] = rm.r2;
            g["by_group"][name] = row;
        }
        g["max_gap"] = rep.group_regression.max_gap;
        g["skipped_groups"] = rep.group_regression.skipped_groups;
    }
    return g;
}

// ------------------------------------------------------------------- synth

struct SynthOptions {
    std::string task = "cls";
    int n = 1000;
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
    std::string out;
    std::string out_dir;  // empty: directory of --out
};

inline int run_synth(const SynthOptions& o) {
    SynthConfig cfg;
    std::string out_dir;
    try {
        if (o.out.empty()) throw std::runtime_error("--out is required");
        TaskSpec task = parse_task(o.task);
        cfg.task = task.canon == "cls" ? SynthTask::classification
                                       : (task.temporal ? SynthTask::temporal : SynthTask::regression);
        cfg.n = o.n;
        cfg.d_shared = o.d_shared;
        cfg.d_spec_a = o.d_spec_a;
        cfg.d_spec_b = o.d_spec_b;
        cfg.dim_a = o.dim_a;
        cfg.dim_b = o.dim_b;
        cfg.noise_std = o.noise_std;
        cfg.redundancy = o.redundancy;
        cfg.n_classes = o.n_classes;
        cfg.n_series = o.n_series;
        cfg.series_len = o.series_len;
        cfg.ar_phi = o.ar_phi;
        cfg.seed = o.seed;
        cfg.validate();
        out_dir = o.out_dir.empty() ? std::filesystem::path(o.out).parent_path().string() : o.out_dir;
        if (out_dir.empty()) out_dir = ".";
    } catch (const std::exception& e) {
        std::cerr << "synth: " << e.what() << "\n";
        return 1;
    }

    try {
        SynthResult res = synth_multimodal(cfg);
        write_embedding_csv(res.ds, o.out);

        // latent sidecar: the generating factors per record, for probing
        const std::string latent_path = o.out + ".latents.csv";
        std::string side = "id";
        for (int j = 0; j < cfg.d_latent(); ++j) side += ",z_" + std::to_string(j);
        side += "\n";
        for (std::size_t i = 0; i < res.ds.records.size(); ++i) {
            side += res.ds.records[i].id;
            for (double v : res.latents[i]) side += "," + fmt_full(v);
            side += "\n";
        }
        write_text_file(latent_path, side);

        Manifest m;
        m.subcommand = "synth";
        m.resolved = {{"task", o.task},
                      {"n", std::to_string(cfg.n)},
                      {"d_shared", std::to_string(cfg.d_shared)},
                      {"d_spec_a", std::to_string(cfg.d_spec_a)},
                      {"d_spec_b", std::to_string(cfg.d_spec_b)},
                      {"dim_a", std::to_string(cfg.dim_a)},
                      {"dim_b", std::to_string(cfg.dim_b)},
                      {"noise_std", fmt_full(cfg.noise_std)},
                      {"redundancy", fmt_full(cfg.redundancy)},
                      {"n_classes", std::to_string(cfg.n_classes)},
                      {"n_series", std::to_string(cfg.n_series)},
                      {"series_len", std::to_string(cfg.series_len)},
                      {"ar_phi", fmt_full(cfg.ar_phi)},
                      {"seed", std::to_string(cfg.seed)},
                      {"out", o.out}};
        m.seeds = {cfg.seed};
        m.outputs = {o.out, latent_path};
        write_manifest(m, out_dir);
        std::cout << "synth: wrote " << res.ds.size() << " records to " << o.out << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "synth: " << e.what() << "\n";
        return 2;
    }
}

// ------------------------------------------------------------------- train

struct TrainOptions {
    std::string data;
    std::string arch = "ddf";  // logreg | mlp | dense | ddf
    std::string modalities = "ab";
    std::string task = "cls";
    std::string split;  // stratified70 | chrono80 | random70; default by task
    double lambda = 0.1;
    double gamma = 2.0;
    int patience = 7;
    int window = 3;
    std::string seeds = "3";
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    double lr = 1e-3;
    int epochs = 200;
    int batch_size = 32;
    std::string optimizer = "adam";
    double weight_decay = 1e-4;
    double val_frac = 0.15;
    double estimator_lr = 1e-3;
    int estimator_hidden = 32;
    bool summed_mi = false;
    bool normalize = false;
    int n_tokens = 8;
    int d_tok = 16;
    int d_common = 64;
    int d_specific = 64;
    int d_hidden = 64;
};

namespace traindetail {

struct Prepared {
    TaskSpec task;
    std::string split;
    MultimodalDataset train;
    MultimodalDataset test;
    int n_classes = 0;       // classification only
    int raw_dim_a = 0;       // per-timestep widths (pre-window)
    int raw_dim_b = 0;
    ZscoreStats norm;        // populated when normalize is on
    bool normalized = false;
};

// Load, split, optionally normalize, and window. Everything here is
// fail-fast validation: no training compute happens until it returns.
inline Prepared prepare_data(const TrainOptions& o) {
    Prepared p;
    p.task = parse_task(o.task);
    p.split = o.split;
    if (p.split.empty()) {
        p.split = p.task.temporal ? "chrono80" : (p.task.kind == TaskKind::classification ? "stratified70" : "random70");
    }
    if (p.split != "stratified70" && p.split != "chrono80" && p.split != "random70") {
        throw std::runtime_error("unknown split '" + p.split + "' (expected stratified70, chrono80, or random70)");
    }
    if (p.task.temporal && p.split != "chrono80") {
        throw std::runtime_error("temporal task requires --split chrono80");
    }

    MultimodalDataset ds = load_embedding_csv(o.data);
    p.raw_dim_a = ds.dim_a;
    p.raw_dim_b = ds.dim_b;

    if (p.task.kind == TaskKind::classification) {
        double top = 0.0;
        for (const Record& r : ds.records) {
            if (r.label != static_cast<double>(static_cast<long long>(r.label)) || r.label < 0.0) {
                throw std::runtime_error("record " + r.id + " has non-integer class label " + fmt_log(r.label));
            }
            top = std::max(top, r.label);
        }
        p.n_classes = static_cast<int>(top) + 1;
        if (p.n_classes < 2) throw std::runtime_error("classification data needs at least two classes");
    }

    if (p.split == "stratified70") {
        auto parts = split_random_stratified(ds, 0.7, derive_seed(o.seed, "test-split"));
        p.train = std::move(parts.first);
        p.test = std::move(parts.second);
    } else if (p.split == "chrono80") {
        auto parts = split_chronological(ds, 0.8);
        p.train = std::move(parts.first);
        p.test = std::move(parts.second);
    } else {
        auto parts = ddf::detail::random_split(ds, 0.7, derive_seed(o.seed, "test-split"));
        p.train = std::move(parts.first);
        p.test = std::move(parts.second);
    }

    if (o.normalize) {
        std::vector<MultimodalDataset*> others{&p.test};
        p.norm = zscore_normalize(p.train, others);
        p.normalized = true;
    }
    if (p.task.temporal) {
        p.train = sliding_window(p.train, o.window);
        p.test = sliding_window(p.test, o.window);
    }
    return p;
}

}  // namespace traindetail

inline int run_train(const TrainOptions& o) {
    traindetail::Prepared prep;
    TrainConfig tc;
    std::vector<std::uint64_t> seeds;
    bool fusion_arch = false;
    BaselineKind baseline_kind = BaselineKind::logreg;
    FusionConfig fcfg;
    std::map<std::string, std::string> resolved;
    try {
        if (o.data.empty()) throw std::runtime_error("--data is required");
        if (o.arch != "logreg" && o.arch != "mlp" && o.arch != "dense" && o.arch != "ddf") {
            throw std::runtime_error("unknown arch '" + o.arch + "' (expected logreg, mlp, dense, or ddf)");
        }
        if (o.modalities != "a" && o.modalities != "b" && o.modalities != "ab") {
            throw std::runtime_error("unknown modalities '" + o.modalities + "' (expected a, b, or ab)");
        }
        fusion_arch = o.arch == "dense" || o.arch == "ddf";
        if (fusion_arch && o.modalities != "ab") {
            throw std::runtime_error("arch " + o.arch + " fuses both modalities; use --modalities ab");
        }
        if (o.arch == "mlp") baseline_kind = BaselineKind::mlp;

        seeds = parse_seeds(o.seeds, o.seed);
        tc.lr = o.lr;
        tc.epochs = o.epochs;
        tc.batch_size = o.batch_size;
        tc.patience = o.patience;
        tc.optimizer = o.optimizer;
        tc.lambda_mi = o.arch == "ddf" ? o.lambda : 0.0;
        tc.gamma_focal = o.gamma;
        tc.weight_decay = o.weight_decay;
        tc.seeds = seeds;
        tc.val_frac = o.val_frac;
        tc.summed_mi = o.summed_mi;
        tc.estimator_lr = o.estimator_lr;
        tc.estimator_hidden = o.estimator_hidden;
        tc.validate();

        prep = traindetail::prepare_data(o);

        if (fusion_arch) {
            fcfg.d_in_a = prep.raw_dim_a;
            fcfg.d_in_b = prep.raw_dim_b;
            fcfg.n_tokens = o.n_tokens;
            fcfg.d_tok = o.d_tok;
            fcfg.d_common = o.d_common;
            fcfg.d_specific = o.d_specific;
            fcfg.d_hidden = o.d_hidden;
            fcfg.lambda = tc.lambda_mi;
            fcfg.task = prep.task.kind;
            fcfg.n_classes = prep.task.kind == TaskKind::classification ? prep.n_classes : 2;
            fcfg.temporal = prep.task.temporal;
            fcfg.window = o.window;
            fcfg.ablate_attention = o.arch == "dense";  // dense fusion: no disentanglement branches
            fcfg.validate();
        }

        resolved = {{"data", o.data},
                    {"arch", o.arch},
                    {"modalities", o.modalities},
                    {"task", prep.task.canon},
                    {"split", prep.split},
                    {"lambda", fmt_full(tc.lambda_mi)},
                    {"gamma", fmt_full(tc.gamma_focal)},
                    {"patience", std::to_string(tc.patience)},
                    {"window", std::to_string(o.window)},
                    {"seed", std::to_string(o.seed)},
                    {"seeds", join_seeds(seeds)},
                    {"lr", fmt_full(tc.lr)},
                    {"epochs", std::to_string(tc.epochs)},
                    {"batch_size", std::to_string(tc.batch_size)},
                    {"optimizer", tc.optimizer},
                    {"weight_decay", fmt_full(tc.weight_decay)},
                    {"val_frac", fmt_full(tc.val_frac)},
                    {"estimator_lr", fmt_full(tc.estimator_lr)},
                    {"estimator_hidden", std::to_string(tc.estimator_hidden)},
                    {"summed_mi", o.summed_mi ? "1" : "0"},
                    {"normalize", o.normalize ? "1" : "0"},
                    {"n_tokens", std::to_string(o.n_tokens)},
                    {"d_tok", std::to_string(o.d_tok)},
                    {"d_common", std::to_string(o.d_common)},
                    {"d_specific", std::to_string(o.d_specific)},
                    {"d_hidden", std::to_string(o.d_hidden)}};
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        const auto out_path = [&](const std::string& name) {
            return (std::filesystem::path(o.out_dir) / name).string();
        };

        std::string log;
        log += "train: arch=" + o.arch + " task=" + prep.task.canon + " modalities=" + o.modalities +
               " split=" + prep.split + " n_train=" + std::to_string(prep.train.size()) +
               " n_test=" + std::to_string(prep.test.size()) +
               (prep.task.kind == TaskKind::classification ? " n_classes=" + std::to_string(prep.n_classes) : "") + "\n";
        for (const std::string& w : prep.norm.warnings) log += "normalize: " + w + "\n";

        // config echo stored in every checkpoint; eval rebuilds the model from it
        std::map<std::string, std::string> echo = resolved;
        echo.erase("data");
        echo.erase("seeds");
        echo["raw_dim_a"] = std::to_string(prep.raw_dim_a);
        echo["raw_dim_b"] = std::to_string(prep.raw_dim_b);
        if (prep.task.kind == TaskKind::classification) echo["n_classes"] = std::to_string(prep.n_classes);
        if (prep.normalized) {
            echo["norm_mean_a"] = join_doubles(prep.norm.mean_a);
            echo["norm_std_a"] = join_doubles(prep.norm.std_a);
            echo["norm_mean_b"] = join_doubles(prep.norm.mean_b);
            echo["norm_std_b"] = join_doubles(prep.norm.std_b);
        }
        if (!fusion_arch) {
            const Tensor probe = features(prep.train, o.modalities, {0});
            echo["d_in"] = std::to_string(probe.shape[1]);
            echo["n_out"] = std::to_string(prep.task.kind == TaskKind::classification ? prep.n_classes : 1);
        }

        std::vector<std::string> outputs;
        std::vector<MetricsReport> reports;

        auto run_one = [&](std::uint64_t s) -> std::map<std::string, double> {
            std::vector<std::pair<double, double>> hist_pairs;
            MetricsReport rep;
            if (fusion_arch) {
                FusionTrainResult r = train_fusion(prep.train, fcfg, tc, s);
                rep = evaluate_fusion(r.model, prep.test);
                for (const EpochLosses& e : r.history) hist_pairs.emplace_back(e.train, e.val);
                std::map<std::string, std::string> cp_cfg = echo;
                cp_cfg["run_seed"] = std::to_string(s);
                checkpoint_save(out_path("checkpoint_seed" + std::to_string(s) + ".bin"),
                                checkpoint_from(r.model.params(), cp_cfg, s, hist_pairs));
                log += "seed " + std::to_string(s) + ": " + std::to_string(r.history.size()) + " epochs, best epoch " +
                       std::to_string(r.best_epoch) + " (val " + fmt_log(r.best_val) + ")" +
                       (r.early_stopped ? ", stopped early" : "") + "\n";
            } else {
                BaselineTrainResult r = train_baseline(prep.train, baseline_kind, prep.task.kind, o.modalities, tc, s,
                                                       prep.n_classes);
                rep = evaluate_baseline(r.model, prep.test, o.modalities, prep.task.kind);
                for (const EpochLosses& e : r.history) hist_pairs.emplace_back(e.train, e.val);
                std::map<std::string, std::string> cp_cfg = echo;
                cp_cfg["run_seed"] = std::to_string(s);
                checkpoint_save(out_path("checkpoint_seed" + std::to_string(s) + ".bin"),
                                checkpoint_from(r.model.params(), cp_cfg, s, hist_pairs));
                log += "seed " + std::to_string(s) + ": " + std::to_string(r.history.size()) + " epochs, best epoch " +
                       std::to_string(r.best_epoch) + " (val " + fmt_log(r.best_val) + ")" +
                       (r.early_stopped ? ", stopped early" : "") + "\n";
            }

            std::string hist = "epoch,train_loss,val_loss\n";
            for (std::size_t i = 0; i < hist_pairs.size(); ++i) {
                hist += std::to_string(i + 1) + "," + fmt_full(hist_pairs[i].first) + "," +
                        fmt_full(hist_pairs[i].second) + "\n";
            }
            write_text_file(out_path("history_seed" + std::to_string(s) + ".csv"), hist);
            outputs.push_back("checkpoint_seed" + std::to_string(s) + ".bin");
            outputs.push_back("history_seed" + std::to_string(s) + ".csv");

            reports.push_back(rep);
            auto m = metrics_to_map(rep);
            std::string line = "seed " + std::to_string(s) + ": test";
            for (const auto& [k, v] : m) line += " " + k + "=" + fmt_log(v);
            log += line + "\n";
            return m;
        };

        json metrics_doc;
        metrics_doc["arch"] = o.arch;
        metrics_doc["modalities"] = o.modalities;
        metrics_doc["task"] = prep.task.canon;
        metrics_doc["n_test"] = prep.test.size();
        metrics_doc["seeds"] = seeds;

        json per_seed;
        json summary;
        if (seeds.size() >= 2) {
            MultiSeedResult agg = multi_seed_run(seeds, run_one);
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                json row;
                for (const auto& [k, v] : agg.per_seed[i]) row[k] = v;
                per_seed[std::to_string(seeds[i])] = row;
            }
            for (const auto& [k, s] : agg.summary) {
                summary[k] = {{"mean", s.mean}, {"stddev", s.stddev}};
                log += "summary: " + k + " mean=" + fmt_log(s.mean) + " stddev=" + fmt_log(s.stddev) + "\n";
            }
        } else {
            auto m = run_one(seeds[0]);
            json row;
            for (const auto& [k, v] : m) row[k] = v;
            per_seed[std::to_string(seeds[0])] = row;
            for (const auto& [k, v] : m) {
                summary[k] = {{"mean", v}, {"stddev", 0.0}};
                log += "summary: " + k + " mean=" + fmt_log(v) + " stddev=0\n";
            }
        }
        metrics_doc["per_seed"] = per_seed;
        metrics_doc["summary"] = summary;

        if (!reports.empty() && reports.front().grouped) {
            // per-group metric means across seeds
            std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
            for (const MetricsReport& rep : reports) {
                json g = grouped_json(rep);
                for (const auto& [gname, row] : g["by_group"].items()) {
                    for (const auto& [mk, mv] : row.items()) {
                        if (mv.is_number()) {
                            auto& slot = acc[gname][mk];
                            slot.first += mv.get<double>();
                            slot.second += 1;
                        }
                    }
                }
            }
            json groups;
            for (const auto& [gname, row] : acc) {
                json r;
                for (const auto& [mk, slot] : row) r[mk] = slot.first / slot.second;
                groups[gname] = r;
            }
            metrics_doc["groups"] = groups;
        }

        write_text_file(out_path("metrics.json"), metrics_doc.dump(2) + "\n");
        write_text_file(out_path("train.log"), log);
        outputs.push_back("metrics.json");
        outputs.push_back("train.log");

        Manifest m;
        m.subcommand = "train";
        m.resolved = resolved;
        m.inputs = {{o.data, file_digest(o.data)}};
        m.seeds = seeds;
        m.outputs = outputs;
        write_manifest(m, o.out_dir);
        std::cout << "train: " << seeds.size() << " seed(s) finished; outputs in " << o.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return 2;
    }
}

// -------------------------------------------------------------------- eval

struct EvalOptions {
    std::string data;
    std::string checkpoint;
    std::string out_dir = ".";
};

inline int run_eval(const EvalOptions& o) {
    CheckpointData ckpt;
    MultimodalDataset test;
    TaskSpec task;
    std::string arch, modalities;
    int window = 3;
    try {
        if (o.data.empty()) throw std::runtime_error("--data is required");
        if (o.checkpoint.empty()) throw std::runtime_error("--checkpoint is required");
        ckpt = checkpoint_load(o.checkpoint);
        for (const char* key : {"arch", "task", "modalities", "window"}) {
            if (!ckpt.config.count(key)) throw std::runtime_error("checkpoint lacks the '" + std::string(key) + "' config entry");
        }
        arch = ckpt.config.at("arch");
        modalities = ckpt.config.at("modalities");
        task = parse_task(ckpt.config.at("task"));
        window = std::stoi(ckpt.config.at("window"));

        test = load_embedding_csv(o.data);
        if (ckpt.config.count("norm_mean_a")) {
            apply_saved_zscore(test, parse_double_list(ckpt.config.at("norm_mean_a")),
                               parse_double_list(ckpt.config.at("norm_std_a")),
                               parse_double_list(ckpt.config.at("norm_mean_b")),
                               parse_double_list(ckpt.config.at("norm_std_b")));
        }
        if (task.temporal) test = sliding_window(test, window);
    } catch (const std::exception& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        MetricsReport rep;
        Rng rng(1);  // initialization is immediately overwritten by the restore
        if (arch == "ddf" || arch == "dense") {
            FusionConfig fcfg;
            fcfg.d_in_a = std::stoi(ckpt.config.at("raw_dim_a"));
            fcfg.d_in_b = std::stoi(ckpt.config.at("raw_dim_b"));
            fcfg.n_tokens = std::stoi(ckpt.config.at("n_tokens"));
            fcfg.d_tok = std::stoi(ckpt.config.at("d_tok"));
            fcfg.d_common = std::stoi(ckpt.config.at("d_common"));
            fcfg.d_specific = std::stoi(ckpt.config.at("d_specific"));
            fcfg.d_hidden = std::stoi(ckpt.config.at("d_hidden"));
            fcfg.lambda = std::stod(ckpt.config.at("lambda"));
            fcfg.task = task.kind;
            fcfg.n_classes = task.kind == TaskKind::classification ? std::stoi(ckpt.config.at("n_classes")) : 2;
            fcfg.temporal = task.temporal;
            fcfg.window = window;
            fcfg.ablate_attention = arch == "dense";
            FusionModel model(fcfg, rng);
            checkpoint_restore(ckpt, model.params());
            rep = evaluate_fusion(model, test);
        } else if (arch == "logreg" || arch == "mlp") {
            BaselineModel model(arch == "mlp" ? BaselineKind::mlp : BaselineKind::logreg,
                                std::stoi(ckpt.config.at("d_in")), std::stoi(ckpt.config.at("n_out")), rng);
            checkpoint_restore(ckpt, model.params());
            rep = evaluate_baseline(model, test, modalities, task.kind);
        } else {
            throw std::runtime_error("checkpoint has unknown arch '" + arch + "'");
        }

        json doc;
        doc["arch"] = arch;
        doc["modalities"] = modalities;
        doc["task"] = task.canon;
        doc["n"] = rep.n;
        doc["checkpoint_seed"] = ckpt.seed;
        doc["metrics"] = metrics_json(rep);
        if (rep.grouped) doc["groups"] = grouped_json(rep);
        const std::string out_file = (std::filesystem::path(o.out_dir) / "eval_metrics.json").string();
        write_text_file(out_file, doc.dump(2) + "\n");

        Manifest m;
        m.subcommand = "eval";
        m.resolved = {{"data", o.data}, {"checkpoint", o.checkpoint}};
        m.inputs = {{o.data, file_digest(o.data)}, {o.checkpoint, file_digest(o.checkpoint)}};
        m.outputs = {"eval_metrics.json"};
        write_manifest(m, o.out_dir);
        std::cout << "eval: wrote " << out_file << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return 2;
    }
}

// --------------------------------------------------------------- gradcheck

struct GradcheckOptions {
    std::string model = "all";  // fusion | temporal | baseline | vae | all
    double eps = 1e-5;
    std::uint64_t seed = 7;
    std::string out_dir = ".";
};

namespace gradcheckdetail {

inline ParamSet combined_params(const ParamSet& a, const std::string& pa, const ParamSet& b, const std::string& pb) {
    ParamSet both;
    for (const auto& e : a.entries()) both.add(pa + e.name, e.tensor, e.is_bias);
    for (const auto& e : b.entries()) both.add(pb + e.name, e.tensor, e.is_bias);
    return both;
}

inline double check_baseline(double eps, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "gradcheck-baseline"));
    BaselineModel model(BaselineKind::mlp, 5, 3, rng);
    jitter_params(model.params(), rng);
    Tensor x = Tensor::zeros({6, 5});
    for (double& v : *x.data) v = rng.normal();
    const std::vector<int> targets{0, 1, 2, 0, 1, 2};
    const ClassWeights w = class_weights({2, 2, 2});
    auto f = [&](ParamSet&) {
        Tensor loss = focal_loss(ops::softmax(model.forward(x)), targets, w, 2.0);
        return ops::add(loss, l2_penalty(model.params(), 1e-2));
    };
    return finite_diff_check(f, model.params(), eps);
}

inline double check_fusion(double eps, std::uint64_t seed, bool temporal) {
    FusionConfig cfg;
    cfg.d_in_a = 4;
    cfg.d_in_b = 3;
    cfg.n_tokens = 2;
    cfg.d_tok = 4;
    cfg.d_common = 4;
    cfg.d_specific = 3;
    cfg.d_hidden = 6;
    cfg.lambda = 0.5;
    if (temporal) {
        cfg.task = TaskKind::regression;
        cfg.temporal = true;
        cfg.window = 2;
    } else {
        cfg.task = TaskKind::classification;
        cfg.n_classes = 2;
    }
    Rng rng(derive_seed(seed, temporal ? "gradcheck-temporal" : "gradcheck-fusion"));
    FusionModel model(cfg, rng);
    ClubEstimator est(2 * cfg.d_specific, cfg.d_common, 6, rng);
    jitter_params(model.params(), rng);
    jitter_params(est.params(), rng);

    const int n = 5;
    Tensor a = Tensor::zeros({n, temporal ? cfg.window * cfg.d_in_a : cfg.d_in_a});
    Tensor b = Tensor::zeros({n, temporal ? cfg.window * cfg.d_in_b : cfg.d_in_b});
    for (double& v : *a.data) v = rng.normal();
    for (double& v : *b.data) v = rng.normal();
    const std::vector<int> targets{0, 1, 0, 1, 0};
    Tensor values = Tensor::zeros({n});
    for (double& v : *values.data) v = rng.normal();
    const ClassWeights w = class_weights({3, 2});

    ParamSet both = combined_params(model.params(), "model.", est.params(), "est.");
    auto f = [&](ParamSet&) {
        FusionOutputs fo = model.forward(a, b);
        return temporal ? fusion_loss(fo.y, values, fo.s_a, fo.s_b, fo.s_c, &est, cfg)
                        : fusion_loss(fo.y, targets, w, 2.0, fo.s_a, fo.s_b, fo.s_c, &est, cfg);
    };
    return finite_diff_check(f, both, eps);
}

inline double check_vae(double eps, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "gradcheck-vae"));
    VaeConfig cfg;
    cfg.d_in = 5;
    cfg.d_hidden = 6;
    cfg.d_latent = 3;
    VaeModel model(cfg, rng);
    jitter_params(model.params(), rng);
    Tensor x = Tensor::zeros({4, 5});
    for (double& v : *x.data) v = rng.normal();
    Tensor eps_noise = Tensor::zeros({4, 3});
    for (double& v : *eps_noise.data) v = rng.normal();
    auto f = [&](ParamSet&) {
        VaeOutput out = vae_forward_with_eps(x, model, eps_noise);
        return vae_loss(x, out.x_hat, out.mu, out.logvar);
    };
    return finite_diff_check(f, model.params(), eps);
}

}  // namespace gradcheckdetail

inline int run_gradcheck(const GradcheckOptions& o) {
    std::vector<std::string> which;
    try {
        if (o.model == "all") {
            which = {"baseline", "fusion", "temporal", "vae"};
        } else if (o.model == "fusion" || o.model == "temporal" || o.model == "baseline" || o.model == "vae") {
            which = {o.model};
        } else {
            throw std::runtime_error("unknown model '" + o.model + "' (expected baseline, fusion, temporal, vae, or all)");
        }
        if (!(o.eps >= 1e-7 && o.eps <= 1e-3)) throw std::runtime_error("eps must lie in [1e-7, 1e-3]");
    } catch (const std::exception& e) {
        std::cerr << "gradcheck: " << e.what() << "\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        constexpr double kTol = 1e-4;
        std::string text;
        bool ok = true;
        for (const std::string& name : which) {
            double err = 0.0;
            if (name == "baseline") err = gradcheckdetail::check_baseline(o.eps, o.seed);
            if (name == "fusion") err = gradcheckdetail::check_fusion(o.eps, o.seed, false);
            if (name == "temporal") err = gradcheckdetail::check_fusion(o.eps, o.seed, true);
            if (name == "vae") err = gradcheckdetail::check_vae(o.eps, o.seed);
            const bool pass = err < kTol;
            ok = ok && pass;
            text += "gradcheck " + name + ": max relative error " + fmt_full(err) + (pass ? " (pass)" : " (FAIL)") + "\n";
        }
        std::cout << text;
        write_text_file((std::filesystem::path(o.out_dir) / "gradcheck.txt").string(), text);

        Manifest m;
        m.subcommand = "gradcheck";
        m.resolved = {{"model", o.model}, {"eps", fmt_full(o.eps)}, {"seed", std::to_string(o.seed)}};
        m.seeds = {o.seed};
        m.outputs = {"gradcheck.txt"};
        write_manifest(m, o.out_dir);
        return ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "gradcheck: " << e.what() << "\n";
        return 2;
    }
}

// --------------------------------------------------------------- vae-train

struct VaeTrainOptions {
    std::string data;
    std::string modalities = "a";  // which feature block the VAE compresses
    int d_latent = 8;
    int d_hidden = 64;
    int epochs = 200;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

inline int run_vae_train(const VaeTrainOptions& o) {
    MultimodalDataset ds;
    std::optional<Tensor> x_all;
    try {
        if (o.data.empty()) throw std::runtime_error("--data is required");
        if (o.modalities != "a" && o.modalities != "b") throw std::runtime_error("--modalities must be a or b");
        if (o.d_latent < 1 || o.d_hidden < 1) throw std::runtime_error("latent and hidden sizes must be positive");
        if (o.epochs < 1 || o.batch_size < 1) throw std::runtime_error("epochs and batch size must be positive");
        if (!(o.lr > 0.0)) throw std::runtime_error("lr must be > 0");
        ds = load_embedding_csv(o.data);
        x_all = features(ds, o.modalities);
    } catch (const std::exception& e) {
        std::cerr << "vae-train: " << e.what() << "\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        VaeConfig vc;
        vc.d_in = x_all->shape[1];
        vc.d_hidden = o.d_hidden;
        vc.d_latent = o.d_latent;
        Rng model_rng(derive_seed(o.seed, "vae-model"));
        VaeModel model(vc, model_rng);
        AdamOptimizer opt(o.lr);
        Rng noise(derive_seed(o.seed, "vae-noise"));
        Rng order(derive_seed(o.seed, "vae-batches"));

        const int n = x_all->shape[0];
        std::vector<std::pair<double, double>> history;
        std::string log = "vae-train: n=" + std::to_string(n) + " d_in=" + std::to_string(vc.d_in) +
                          " d_hidden=" + std::to_string(vc.d_hidden) + " d_latent=" + std::to_string(vc.d_latent) + "\n";
        for (int epoch = 1; epoch <= o.epochs; ++epoch) {
            double loss_sum = 0.0;
            std::size_t seen = 0;
            for (const auto& batch : ddf::detail::epoch_batches(static_cast<std::size_t>(n), o.batch_size, order)) {
                Tensor x = Tensor::zeros({static_cast<int>(batch.size()), vc.d_in});
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    for (int j = 0; j < vc.d_in; ++j) x.set(static_cast<int>(i), j, x_all->at(static_cast<int>(batch[i]), j));
                }
                Tensor eps = Tensor::zeros({static_cast<int>(batch.size()), vc.d_latent});
                for (double& v : *eps.data) v = noise.normal();
                model.params().zero_grad();
                VaeOutput out = vae_forward_with_eps(x, model, eps);
                Tensor loss = vae_loss(x, out.x_hat, out.mu, out.logvar);
                backward(loss);
                opt.step(model.params());
                model.params().zero_grad();
                loss_sum += loss.value() * static_cast<double>(batch.size());
                seen += batch.size();
            }
            const double epoch_loss = loss_sum / static_cast<double>(seen);
            history.emplace_back(epoch_loss, epoch_loss);
            log += "epoch " + std::to_string(epoch) + "/" + std::to_string(o.epochs) + " loss " + fmt_log(epoch_loss) + "\n";
        }

        std::map<std::string, std::string> echo{{"kind", "vae"},
                                                {"modalities", o.modalities},
                                                {"d_in", std::to_string(vc.d_in)},
                                                {"d_hidden", std::to_string(vc.d_hidden)},
                                                {"d_latent", std::to_string(vc.d_latent)},
                                                {"epochs", std::to_string(o.epochs)},
                                                {"batch_size", std::to_string(o.batch_size)},
                                                {"lr", fmt_full(o.lr)}};
        const std::string ckpt_rel = "vae.bin";
        checkpoint_save((std::filesystem::path(o.out_dir) / ckpt_rel).string(),
                        checkpoint_from(model.params(), echo, o.seed, history));
        write_text_file((std::filesystem::path(o.out_dir) / "vae_train.log").string(), log);

        Manifest m;
        m.subcommand = "vae-train";
        m.resolved = echo;
        m.resolved["data"] = o.data;
        m.resolved["seed"] = std::to_string(o.seed);
        m.inputs = {{o.data, file_digest(o.data)}};
        m.seeds = {o.seed};
        m.outputs = {ckpt_rel, "vae_train.log"};
        write_manifest(m, o.out_dir);
        std::cout << "vae-train: final loss " << fmt_log(history.back().first) << "; checkpoint in " << o.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "vae-train: " << e.what() << "\n";
        return 2;
    }
}

// -------------------------------------------------------------- vae-encode

struct VaeEncodeOptions {
    std::string data;
    std::string checkpoint;
    std::string out;
    std::string out_dir;  // empty: directory of --out
};

inline int run_vae_encode(const VaeEncodeOptions& o) {
    MultimodalDataset ds;
    CheckpointData ckpt;
    std::string modality;
    std::string out_dir;
    try {
        if (o.data.empty()) throw std::runtime_error("--data is required");
        if (o.checkpoint.empty()) throw std::runtime_error("--checkpoint is required");
        if (o.out.empty()) throw std::runtime_error("--out is required");
        ckpt = checkpoint_load(o.checkpoint);
        if (!ckpt.config.count("kind") || ckpt.config.at("kind") != "vae") {
            throw std::runtime_error("checkpoint was not produced by vae-train");
        }
        modality = ckpt.config.at("modalities");
        ds = load_embedding_csv(o.data);
        const int d_in = std::stoi(ckpt.config.at("d_in"));
        const int have = modality == "a" ? ds.dim_a : ds.dim_b;
        if (have != d_in) {
            throw std::runtime_error("checkpoint encodes " + std::to_string(d_in) + "-wide modality " + modality +
                                     ", data has width " + std::to_string(have));
        }
        out_dir = o.out_dir.empty() ? std::filesystem::path(o.out).parent_path().string() : o.out_dir;
        if (out_dir.empty()) out_dir = ".";
    } catch (const std::exception& e) {
        std::cerr << "vae-encode: " << e.what() << "\n";
        return 1;
    }

    try {
        VaeConfig vc;
        vc.d_in = std::stoi(ckpt.config.at("d_in"));
        vc.d_hidden = std::stoi(ckpt.config.at("d_hidden"));
        vc.d_latent = std::stoi(ckpt.config.at("d_latent"));
        Rng rng(1);
        VaeModel model(vc, rng);
        checkpoint_restore(ckpt, model.params());

        Tensor x = features(ds, modality);
        Tensor mu = vae_encode(x, model);

        // replace the encoded modality's block so the file stays a valid
        // embedding CSV for downstream training
        MultimodalDataset out_ds = ddf::detail::like(ds);
        if (modality == "a") {
            out_ds.dim_a = vc.d_latent;
        } else {
            out_ds.dim_b = vc.d_latent;
        }
        for (std::size_t i = 0; i < ds.records.size(); ++i) {
            Record r = ds.records[i];
            std::vector<double> emb(static_cast<std::size_t>(vc.d_latent));
            for (int j = 0; j < vc.d_latent; ++j) emb[static_cast<std::size_t>(j)] = mu.at(static_cast<int>(i), j);
            if (modality == "a") {
                r.mod_a = emb;
            } else {
                r.mod_b = emb;
            }
            out_ds.records.push_back(std::move(r));
        }
        write_embedding_csv(out_ds, o.out);

        Manifest m;
        m.subcommand = "vae-encode";
        m.resolved = {{"data", o.data}, {"checkpoint", o.checkpoint}, {"modalities", modality}, {"out", o.out}};
        m.inputs = {{o.data, file_digest(o.data)}, {o.checkpoint, file_digest(o.checkpoint)}};
        m.outputs = {o.out};
        write_manifest(m, out_dir);
        std::cout << "vae-encode: wrote " << out_ds.size() << " records to " << o.out << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "vae-encode: " << e.what() << "\n";
        return 2;
    }
}

// ------------------------------------------------------------------ report

struct ReportOptions {
    std::string inputs;  // comma-separated metrics.json paths
    std::string out;     // default: <out_dir>/report.json
    std::string out_dir = ".";
};

inline int run_report(const ReportOptions& o) {
    std::vector<std::string> paths;
    std::vector<json> docs;
    try {
        if (o.inputs.empty()) throw std::runtime_error("--inputs is required (comma-separated metrics.json files)");
        std::stringstream ss(o.inputs);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (!cell.empty()) paths.push_back(cell);
        }
        if (paths.empty()) throw std::runtime_error("--inputs named no files");
        for (const std::string& p : paths) {
            json doc = json::parse(read_file_bytes(p));
            for (const char* key : {"arch", "modalities", "summary"}) {
                if (!doc.contains(key)) throw std::runtime_error(p + " is missing the '" + std::string(key) + "' field");
            }
            docs.push_back(std::move(doc));
        }
    } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << "\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        json rows;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const json& doc = docs[i];
            const std::string key = doc.at("modalities").get<std::string>() + "/" + doc.at("arch").get<std::string>();
            if (rows.contains(key)) throw std::runtime_error("duplicate row key '" + key + "' from " + paths[i]);
            json row;
            if (doc.contains("task")) row["task"] = doc.at("task");
            if (doc.contains("n_test")) row["n_test"] = doc.at("n_test");
            row["summary"] = doc.at("summary");
            if (doc.contains("groups")) row["groups"] = doc.at("groups");
            rows[key] = row;
        }
        json out_doc;
        out_doc["rows"] = rows;

        const std::string out_path =
            o.out.empty() ? (std::filesystem::path(o.out_dir) / "report.json").string() : o.out;
        write_text_file(out_path, out_doc.dump(2) + "\n");

        Manifest m;
        m.subcommand = "report";
        m.resolved = {{"inputs", o.inputs}, {"out", out_path}};
        for (const std::string& p : paths) m.inputs[p] = file_digest(p);
        m.outputs = {out_path};
        write_manifest(m, o.out_dir);
        std::cout << "report: " << rows.size() << " row(s) in " << out_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << "\n";
        return 2;
    }
}

// ---------------------------------------------------------------- dispatch

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"disentangled dense fusion toolkit"};
    app.name("ddf");
    app.require_subcommand(1);

    SynthOptions so;
    auto* synth = app.add_subcommand("synth", "generate a synthetic multimodal embedding CSV");
    synth->add_option("--task", so.task, "cls | reg | temporal");
    synth->add_option("--n", so.n, "sample count (non-temporal)");
    synth->add_option("--d-shared", so.d_shared, "shared latent dims");
    synth->add_option("--d-spec-a", so.d_spec_a, "modality-a specific latent dims");
    synth->add_option("--d-spec-b", so.d_spec_b, "modality-b specific latent dims");
    synth->add_option("--dim-a", so.dim_a, "modality-a observed width");
    synth->add_option("--dim-b", so.dim_b, "modality-b observed width");
    synth->add_option("--noise-std", so.noise_std, "observation noise");
    synth->add_option("--redundancy", so.redundancy, "fraction of rows mixing only shared factors");
    synth->add_option("--n-classes", so.n_classes, "classification classes");
    synth->add_option("--n-series", so.n_series, "temporal series count");
    synth->add_option("--series-len", so.series_len, "temporal steps per series");
    synth->add_option("--ar-phi", so.ar_phi, "AR(1) coefficient");
    synth->add_option("--seed", so.seed, "generator seed");
    synth->add_option("--out", so.out, "output CSV path")->required();
    synth->add_option("--out-dir", so.out_dir, "manifest directory (default: directory of --out)");
    std::string config_path;
    synth->add_option("--config", config_path, "flat key = value config file");

    TrainOptions to;
    auto* train = app.add_subcommand("train", "train a model and write checkpoints, history, and metrics");
    train->add_option("--data", to.data, "embedding CSV")->required();
    train->add_option("--arch", to.arch, "logreg | mlp | dense | ddf");
    train->add_option("--modalities", to.modalities, "a | b | ab");
    train->add_option("--task", to.task, "cls | reg | temporal");
    train->add_option("--split", to.split, "stratified70 | chrono80 | random70");
    train->add_option("--lambda", to.lambda, "MI penalty weight (ddf)");
    train->add_option("--gamma", to.gamma, "focal exponent");
    train->add_option("--patience", to.patience, "early-stop patience");
    train->add_option("--window", to.window, "temporal window length");
    train->add_option("--seeds", to.seeds, "seed count or comma list");
    train->add_option("--seed", to.seed, "base seed");
    train->add_option("--out-dir", to.out_dir, "output directory");
    train->add_option("--lr", to.lr, "learning rate");
    train->add_option("--epochs", to.epochs, "max epochs");
    train->add_option("--batch-size", to.batch_size, "minibatch size");
    train->add_option("--optimizer", to.optimizer, "adam | sgd");
    train->add_option("--weight-decay", to.weight_decay, "L2 strength");
    train->add_option("--val-frac", to.val_frac, "validation fraction carved from train");
    train->add_option("--estimator-lr", to.estimator_lr, "MI estimator learning rate");
    train->add_option("--estimator-hidden", to.estimator_hidden, "MI estimator hidden width");
    train->add_flag("--summed-mi", to.summed_mi, "single summed MI loss instead of alternating updates");
    train->add_flag("--normalize", to.normalize, "z-score features with train statistics");
    train->add_option("--n-tokens", to.n_tokens, "fusion tokens per modality");
    train->add_option("--d-tok", to.d_tok, "fusion token width");
    train->add_option("--d-common", to.d_common, "common branch width");
    train->add_option("--d-specific", to.d_specific, "specific branch width");
    train->add_option("--d-hidden", to.d_hidden, "head hidden width");
    train->add_option("--config", config_path, "flat key = value config file");

    EvalOptions eo;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--data", eo.data, "embedding CSV")->required();
    eval->add_option("--checkpoint", eo.checkpoint, "checkpoint file")->required();
    eval->add_option("--out-dir", eo.out_dir, "output directory");
    eval->add_option("--config", config_path, "flat key = value config file");

    GradcheckOptions go;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss composition");
    gradcheck->add_option("--model", go.model, "baseline | fusion | temporal | vae | all");
    gradcheck->add_option("--eps", go.eps, "finite-difference step");
    gradcheck->add_option("--seed", go.seed, "jitter seed");
    gradcheck->add_option("--out-dir", go.out_dir, "output directory");
    gradcheck->add_option("--config", config_path, "flat key = value config file");

    VaeTrainOptions vto;
    auto* vae_train = app.add_subcommand("vae-train", "train a VAE on one modality's feature block");
    vae_train->add_option("--data", vto.data, "embedding CSV")->required();
    vae_train->add_option("--modalities", vto.modalities, "a | b");
    vae_train->add_option("--d-latent", vto.d_latent, "latent width");
    vae_train->add_option("--d-hidden", vto.d_hidden, "hidden width");
    vae_train->add_option("--epochs", vto.epochs, "epochs");
    vae_train->add_option("--batch-size", vto.batch_size, "minibatch size");
    vae_train->add_option("--lr", vto.lr, "learning rate");
    vae_train->add_option("--seed", vto.seed, "seed");
    vae_train->add_option("--out-dir", vto.out_dir, "output directory");
    vae_train->add_option("--config", config_path, "flat key = value config file");

    VaeEncodeOptions veo;
    auto* vae_encode = app.add_subcommand("vae-encode", "replace a modality block with VAE embeddings");
    vae_encode->add_option("--data", veo.data, "embedding CSV")->required();
    vae_encode->add_option("--checkpoint", veo.checkpoint, "vae-train checkpoint")->required();
    vae_encode->add_option("--out", veo.out, "output CSV path")->required();
    vae_encode->add_option("--out-dir", veo.out_dir, "manifest directory (default: directory of --out)");
    vae_encode->add_option("--config", config_path, "flat key = value config file");

    ReportOptions ro;
    auto* report = app.add_subcommand("report", "merge train metrics into one table keyed by modality/arch");
    report->add_option("--inputs", ro.inputs, "comma-separated metrics.json files")->required();
    report->add_option("--out", ro.out, "report path (default <out-dir>/report.json)");
    report->add_option("--out-dir", ro.out_dir, "output directory");
    report->add_option("--config", config_path, "flat key = value config file");

    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        expand_config_args(args);
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 1;
    }
    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    if (synth->parsed()) return run_synth(so);
    if (train->parsed()) return run_train(to);
    if (eval->parsed()) return run_eval(eo);
    if (gradcheck->parsed()) return run_gradcheck(go);
    if (vae_train->parsed()) return run_vae_train(vto);
    if (vae_encode->parsed()) return run_vae_encode(veo);
    if (report->parsed()) return run_report(ro);
    std::cerr << app.help();
    return 1;
}

}  // namespace ddf::cli
