#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddf/rng.hpp"

namespace ddf {

// One aligned multimodal sample. `group` doubles as the series key for
// temporal data; empty string means "no group / the single series".
struct Record {
    std::string id;
    std::vector<double> mod_a;
    std::vector<double> mod_b;
    double label = 0.0;
    std::string group;
    long long t = 0;
};

struct MultimodalDataset {
    std::vector<Record> records;
    int dim_a = 0;
    int dim_b = 0;
    bool has_group = false;
    bool has_t = false;

    std::size_t size() const { return records.size(); }

    // Uniform dims, unique ids, and (for temporal data) unique t per series.
    void validate() const {
        std::set<std::string> ids;
        std::set<std::pair<std::string, long long>> times;
        for (const Record& r : records) {
            if (static_cast<int>(r.mod_a.size()) != dim_a || static_cast<int>(r.mod_b.size()) != dim_b) {
                throw std::runtime_error("dataset: record " + r.id + " has inconsistent feature dims");
            }
            if (!ids.insert(r.id).second) throw std::runtime_error("dataset: duplicate id " + r.id);
            if (has_t && !times.insert({r.group, r.t}).second) {
                throw std::runtime_error("dataset: duplicate time index in series '" + r.group + "'");
            }
        }
    }
};

namespace detail {

// Series keys in a deterministic (sorted) order, independent of row order.
inline std::vector<std::string> series_keys(const MultimodalDataset& ds) {
    std::set<std::string> keys;
    for (const Record& r : ds.records) keys.insert(r.group);
    return {keys.begin(), keys.end()};
}

inline std::vector<std::size_t> series_indices_by_time(const MultimodalDataset& ds, const std::string& key) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        if (ds.records[i].group == key) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return ds.records[a].t < ds.records[b].t; });
    return idx;
}

inline MultimodalDataset like(const MultimodalDataset& ds) {
    MultimodalDataset out;
    out.dim_a = ds.dim_a;
    out.dim_b = ds.dim_b;
    out.has_group = ds.has_group;
    out.has_t = ds.has_t;
    return out;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.below(i)]);
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_real(const std::string& cell, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("csv: cannot parse " + what + " value '" + cell + "'");
    }
    if (pos != cell.size()) throw std::runtime_error("csv: cannot parse " + what + " value '" + cell + "'");
    return v;
}

}  // namespace detail

// Column layout of the embedding-CSV contract. Feature columns are matched
// by prefix and must form a contiguous 0-based run (a_0..a_{p-1}).
struct CsvSchema {
    std::string id_col = "id";
    std::string prefix_a = "a_";
    std::string prefix_b = "b_";
    std::string label_col = "label";
    std::string group_col = "group";  // picked up when present
    std::string time_col = "t";       // picked up when present
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t dropped_unlabeled = 0;
};

inline MultimodalDataset load_embedding_csv(const std::string& path, const CsvSchema& schema = {},
                                            LoadReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);

    const std::vector<std::string> header = detail::split_csv_line(line);
    auto find_col = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    auto prefix_cols = [&](const std::string& prefix, const char* which) {
        std::map<int, int> by_index;  // feature index -> column
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i].rfind(prefix, 0) != 0) continue;
            const std::string suffix = header[i].substr(prefix.size());
            if (suffix.empty() || suffix.find_first_not_of("0123456789") != std::string::npos) continue;
            by_index[std::stoi(suffix)] = static_cast<int>(i);
        }
        std::vector<int> cols;
        for (const auto& [fi, col] : by_index) {
            if (fi != static_cast<int>(cols.size())) {
                throw std::runtime_error(std::string("csv: ") + which + " feature columns are not a contiguous " +
                                         prefix + "0.. run");
            }
            cols.push_back(col);
        }
        if (cols.empty()) throw std::runtime_error(std::string("csv: no ") + which + " feature columns (prefix '" + prefix + "')");
        return cols;
    };

    const int id_col = find_col(schema.id_col);
    const int label_col = find_col(schema.label_col);
    if (id_col < 0) throw std::runtime_error("csv: missing required column " + schema.id_col);
    if (label_col < 0) throw std::runtime_error("csv: missing required column " + schema.label_col);
    const std::vector<int> a_cols = prefix_cols(schema.prefix_a, "modality-a");
    const std::vector<int> b_cols = prefix_cols(schema.prefix_b, "modality-b");
    const int group_col = find_col(schema.group_col);
    const int time_col = find_col(schema.time_col);

    MultimodalDataset ds;
    ds.dim_a = static_cast<int>(a_cols.size());
    ds.dim_b = static_cast<int>(b_cols.size());
    ds.has_group = group_col >= 0;
    ds.has_t = time_col >= 0;

    LoadReport rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        ++rep.rows_read;
        if (cells.size() != header.size()) {
            throw std::runtime_error("csv: row " + std::to_string(rep.rows_read) + " has " +
                                     std::to_string(cells.size()) + " cells, header has " +
                                     std::to_string(header.size()));
        }
        if (cells[label_col].empty()) {
            ++rep.dropped_unlabeled;
            continue;
        }
        Record r;
        r.id = cells[id_col];
        for (int c : a_cols) r.mod_a.push_back(detail::parse_real(cells[c], "feature"));
        for (int c : b_cols) r.mod_b.push_back(detail::parse_real(cells[c], "feature"));
        r.label = detail::parse_real(cells[label_col], "label");
        if (group_col >= 0) r.group = cells[group_col];
        if (time_col >= 0) r.t = static_cast<long long>(detail::parse_real(cells[time_col], "time"));
        ds.records.push_back(std::move(r));
    }
    ds.validate();
    if (report) *report = rep;
    return ds;
}

// Inverse of load_embedding_csv; %.17g so values round-trip exactly.
inline void write_embedding_csv(const MultimodalDataset& ds, const std::string& path,
                                const CsvSchema& schema = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    auto fmt = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << schema.id_col;
    for (int j = 0; j < ds.dim_a; ++j) out << ',' << schema.prefix_a << j;
    for (int j = 0; j < ds.dim_b; ++j) out << ',' << schema.prefix_b << j;
    out << ',' << schema.label_col;
    if (ds.has_group) out << ',' << schema.group_col;
    if (ds.has_t) out << ',' << schema.time_col;
    out << '\n';
    for (const Record& r : ds.records) {
        out << r.id;
        for (double v : r.mod_a) out << ',' << fmt(v);
        for (double v : r.mod_b) out << ',' << fmt(v);
        out << ',' << fmt(r.label);
        if (ds.has_group) out << ',' << r.group;
        if (ds.has_t) out << ',' << r.t;
        out << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failed for " + path);
}

// Stratified split: per-class proportions preserved within one sample,
// deterministic for a seed, disjoint and exhaustive. Both sides keep at
// least one sample of every class, so classes need >= 2 samples.
inline std::pair<MultimodalDataset, MultimodalDataset> split_random_stratified(const MultimodalDataset& ds,
                                                                               double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw std::runtime_error("split: train_frac must be in (0, 1)");
    std::map<double, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.records.size(); ++i) by_class[ds.records[i].label].push_back(i);

    MultimodalDataset train = detail::like(ds), test = detail::like(ds);
    Rng rng(derive_seed(seed, "stratified-split"));
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 2) {
            throw std::runtime_error("split: class " + std::to_string(label) + " has a single sample");
        }
        detail::shuffle_indices(idx, rng);
        const auto n = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(idx.size())));
        const std::size_t n_train = std::clamp<std::size_t>(n, 1, idx.size() - 1);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            (k < n_train ? train : test).records.push_back(ds.records[idx[k]]);
        }
    }
    return {train, test};
}

// Chronological split: per series, the earliest floor(frac * len) records
// go to train, so every train t precedes every test t within a series.
inline std::pair<MultimodalDataset, MultimodalDataset> split_chronological(const MultimodalDataset& ds,
                                                                           double train_frac = 0.8) {
    if (!ds.has_t) throw std::runtime_error("split: chronological split needs a time column");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw std::runtime_error("split: train_frac must be in (0, 1)");
    ds.validate();
    MultimodalDataset train = detail::like(ds), test = detail::like(ds);
    for (const std::string& key : detail::series_keys(ds)) {
        const std::vector<std::size_t> idx = detail::series_indices_by_time(ds, key);
        const auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(idx.size()) + 1e-9);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            (k < n_train ? train : test).records.push_back(ds.records[idx[k]]);
        }
    }
    return {train, test};
}

// Supervised pairs from sliding windows: features of w consecutive steps
// (step-major) predict the label one step past the window. Windows never
// cross series boundaries; run this after splitting so they never cross the
// train/test boundary either.
inline MultimodalDataset sliding_window(const MultimodalDataset& ds, int w = 3) {
    if (!ds.has_t) throw std::runtime_error("sliding_window: needs a time column");
    if (w < 1) throw std::runtime_error("sliding_window: window must be >= 1");
    ds.validate();
    MultimodalDataset out;
    out.dim_a = ds.dim_a * w;
    out.dim_b = ds.dim_b * w;
    out.has_group = ds.has_group;
    out.has_t = true;
    for (const std::string& key : detail::series_keys(ds)) {
        const std::vector<std::size_t> idx = detail::series_indices_by_time(ds, key);
        if (static_cast<int>(idx.size()) <= w) {
            throw std::runtime_error("sliding_window: series '" + key + "' has " + std::to_string(idx.size()) +
                                     " steps, needs more than " + std::to_string(w));
        }
        for (std::size_t k = 0; k + w < idx.size(); ++k) {
            const Record& target = ds.records[idx[k + w]];
            Record r;
            r.id = target.id;
            r.label = target.label;
            r.group = target.group;
            r.t = target.t;
            for (int s = 0; s < w; ++s) {
                const Record& step = ds.records[idx[k + s]];
                r.mod_a.insert(r.mod_a.end(), step.mod_a.begin(), step.mod_a.end());
                r.mod_b.insert(r.mod_b.end(), step.mod_b.begin(), step.mod_b.end());
            }
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

// Per-feature train statistics and how they were applied. sigma is the
// population standard deviation, so a two-point feature {0, 2} maps to
// exactly {-1, 1}.
struct ZscoreStats {
    std::vector<double> mean_a, std_a, mean_b, std_b;
    std::vector<std::string> warnings;  // one per constant feature passed through
};

namespace detail {
inline void feature_stats(const MultimodalDataset& ds, bool modality_a, std::vector<double>* mean,
                          std::vector<double>* stddev) {
    const int d = modality_a ? ds.dim_a : ds.dim_b;
    mean->assign(d, 0.0);
    stddev->assign(d, 0.0);
    const double n = static_cast<double>(ds.size());
    for (const Record& r : ds.records) {
        const std::vector<double>& f = modality_a ? r.mod_a : r.mod_b;
        for (int j = 0; j < d; ++j) (*mean)[j] += f[j];
    }
    for (int j = 0; j < d; ++j) (*mean)[j] /= n;
    for (const Record& r : ds.records) {
        const std::vector<double>& f = modality_a ? r.mod_a : r.mod_b;
        for (int j = 0; j < d; ++j) (*stddev)[j] += (f[j] - (*mean)[j]) * (f[j] - (*mean)[j]);
    }
    for (int j = 0; j < d; ++j) (*stddev)[j] = std::sqrt((*stddev)[j] / n);
}

inline void apply_zscore(MultimodalDataset& ds, const ZscoreStats& st) {
    for (Record& r : ds.records) {
        for (int j = 0; j < ds.dim_a; ++j) {
            if (st.std_a[j] != 0.0) r.mod_a[j] = (r.mod_a[j] - st.mean_a[j]) / st.std_a[j];
        }
        for (int j = 0; j < ds.dim_b; ++j) {
            if (st.std_b[j] != 0.0) r.mod_b[j] = (r.mod_b[j] - st.mean_b[j]) / st.std_b[j];
        }
    }
}
}  // namespace detail

// Computes per-feature mu/sigma on `train` only and applies them in place to
// train plus every dataset in `also`. Constant features pass through
// untouched, with a warning recorded per feature.
inline ZscoreStats zscore_normalize(MultimodalDataset& train, const std::vector<MultimodalDataset*>& also = {}) {
    if (train.records.empty()) throw std::runtime_error("zscore: empty train set");
    ZscoreStats st;
    detail::feature_stats(train, true, &st.mean_a, &st.std_a);
    detail::feature_stats(train, false, &st.mean_b, &st.std_b);
    for (int j = 0; j < train.dim_a; ++j) {
        if (st.std_a[j] == 0.0) st.warnings.push_back("feature a_" + std::to_string(j) + " is constant in train; passed through");
    }
    for (int j = 0; j < train.dim_b; ++j) {
        if (st.std_b[j] == 0.0) st.warnings.push_back("feature b_" + std::to_string(j) + " is constant in train; passed through");
    }
    detail::apply_zscore(train, st);
    for (MultimodalDataset* ds : also) {
        if (ds->dim_a != train.dim_a || ds->dim_b != train.dim_b) throw std::runtime_error("zscore: dim mismatch");
        detail::apply_zscore(*ds, st);
    }
    return st;
}

// Dense reindex over time: absent t in [min, max] of each series become
// zero-feature records with label 0 (absent counts mean zero events).
inline MultimodalDataset fill_missing_timesteps(const MultimodalDataset& ds) {
    if (!ds.has_t) throw std::runtime_error("fill_missing_timesteps: needs a time column");
    ds.validate();
    MultimodalDataset out = detail::like(ds);
    for (const std::string& key : detail::series_keys(ds)) {
        const std::vector<std::size_t> idx = detail::series_indices_by_time(ds, key);
        std::size_t next = 0;
        for (long long t = ds.records[idx.front()].t; t <= ds.records[idx.back()].t; ++t) {
            if (next < idx.size() && ds.records[idx[next]].t == t) {
                out.records.push_back(ds.records[idx[next]]);
                ++next;
            } else {
                Record r;
                r.id = (key.empty() ? std::string("fill") : key + "_fill") + "_t" + std::to_string(t);
                r.mod_a.assign(ds.dim_a, 0.0);
                r.mod_b.assign(ds.dim_b, 0.0);
                r.label = 0.0;
                r.group = key;
                r.t = t;
                out.records.push_back(std::move(r));
            }
        }
    }
    return out;
}

}  // namespace ddf
