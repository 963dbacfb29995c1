#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddf/rng.hpp"
#include "ddf/tensor.hpp"

namespace ddf {

// Named learnable tensors in registration order. Registration order is part
// of the contract: optimizers key their state by position and checkpoints
// write records in this order.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        bool is_bias = false;  // excluded from l2_penalty
    };

    Tensor add(const std::string& name, Tensor t, bool is_bias = false) {
        if (index_.count(name)) throw std::runtime_error("params: duplicate name " + name);
        if (!t.requires_grad) throw std::runtime_error("params: " + name + " must require grad");
        index_[name] = entries_.size();
        entries_.push_back({name, t, is_bias});
        return t;
    }

    // Glorot-uniform [rows, cols] weight.
    Tensor matrix(const std::string& name, int rows, int cols, Rng& rng) {
        Tensor t = Tensor::zeros({rows, cols}, true);
        const double limit = std::sqrt(6.0 / (rows + cols));
        for (double& v : *t.data) v = rng.uniform(-limit, limit);
        return add(name, t);
    }

    Tensor bias(const std::string& name, int n) {
        return add(name, Tensor::zeros({n}, true), true);
    }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::runtime_error("params: unknown name " + name);
        return entries_[it->second].tensor;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return entries_.size(); }
    const Entry& entry(std::size_t i) const { return entries_[i]; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const Entry& e : entries_) n += e.tensor.numel();
        return n;
    }

    void zero_grad() {
        for (Entry& e : entries_) e.tensor.zero_grad();
    }

    std::vector<std::vector<double>> snapshot() const {
        std::vector<std::vector<double>> s;
        s.reserve(entries_.size());
        for (const Entry& e : entries_) s.push_back(*e.tensor.data);
        return s;
    }

    void restore(const std::vector<std::vector<double>>& s) {
        if (s.size() != entries_.size()) throw std::runtime_error("params: snapshot size mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i].size() != entries_[i].tensor.data->size()) {
                throw std::runtime_error("params: snapshot shape mismatch for " + entries_[i].name);
            }
            *entries_[i].tensor.data = s[i];
        }
    }

    // FNV-1a over raw value bytes; cheap identity check for "this step did
    // not touch those parameters".
    std::uint64_t value_hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const void* p, std::size_t n) {
            const unsigned char* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 1099511628211ull;
            }
        };
        for (const Entry& e : entries_) {
            mix(e.name.data(), e.name.size());
            mix(e.tensor.data->data(), e.tensor.data->size() * sizeof(double));
        }
        return h;
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace ddf
