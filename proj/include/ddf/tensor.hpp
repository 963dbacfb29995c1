#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace ddf {

class Tensor;

// One recorded primitive. `parents` keeps the inputs alive; `backprop` takes
// the op's output and scatters its grad into the parents' grad buffers.
struct Node {
    std::vector<Tensor> parents;
    std::function<void(const Tensor&)> backprop;
    bool consumed = false;
};

// Dense row-major tensor of doubles. Value-semantic handle: copies share the
// underlying buffers. Values are immutable once created except through the
// explicit mutation helpers used by optimizers and gradient checking.
class Tensor {
public:
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    std::shared_ptr<std::vector<double>> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::shared_ptr<Node> node;  // null for leaves

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        Tensor t;
        t.shape = std::move(shape);
        for (int d : t.shape) {
            if (d <= 0) throw std::runtime_error("tensor: non-positive dimension");
        }
        t.data = std::make_shared<std::vector<double>>(t.numel(), 0.0);
        t.requires_grad = requires_grad;
        if (requires_grad) t.grad = std::make_shared<std::vector<double>>(t.numel(), 0.0);
        return t;
    }

    static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        if (values.size() != t.data->size()) throw std::runtime_error("tensor: value count does not match shape");
        *t.data = std::move(values);
        return t;
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    static Tensor row(std::vector<double> values, bool requires_grad = false) {
        const int n = static_cast<int>(values.size());
        return from({n}, std::move(values), requires_grad);
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    int ndim() const { return static_cast<int>(shape.size()); }

    double value() const {
        if (numel() != 1) throw std::runtime_error("tensor: value() on non-scalar");
        return (*data)[0];
    }

    double at(int i) const { return (*data)[static_cast<std::size_t>(i)]; }
    double at(int i, int j) const {
        return (*data)[static_cast<std::size_t>(i) * shape[1] + j];
    }

    void set(int i, double v) { (*data)[static_cast<std::size_t>(i)] = v; }
    void set(int i, int j, double v) { (*data)[static_cast<std::size_t>(i) * shape[1] + j] = v; }

    double grad_at(int i) const {
        if (!grad) throw std::runtime_error("tensor: grad_at without grad buffer");
        return (*grad)[static_cast<std::size_t>(i)];
    }

    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }
};

inline void ensure_finite(const Tensor& t, const char* op) {
    for (double v : *t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string(op) + ": non-finite result");
        }
    }
}

// Reverse pass from a scalar loss. Grads of every requires_grad ancestor are
// accumulated (not reset); a second backward over the same graph throws.
inline void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw std::runtime_error("backward: loss must be scalar");
    if (!loss.requires_grad) return;  // constant w.r.t. every parameter
    if (loss.node && loss.node->consumed) throw std::runtime_error("backward: graph already consumed");

    // Postorder DFS over the recorded graph (iterative; graphs can be deep).
    std::vector<Tensor> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Tensor t;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (loss.node) stack.push_back({loss, 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        Node* n = f.t.node.get();
        if (f.next_parent == 0) {
            if (seen.count(n)) {
                stack.pop_back();
                continue;
            }
            seen.insert(n);
        }
        bool descended = false;
        while (f.next_parent < n->parents.size()) {
            const Tensor& p = n->parents[f.next_parent++];
            if (p.node && !seen.count(p.node.get())) {
                stack.push_back({p, 0});
                descended = true;
                break;
            }
        }
        if (descended) continue;
        order.push_back(f.t);
        stack.pop_back();
    }

    (*loss.grad)[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        it->node->backprop(*it);
        it->node->consumed = true;
    }
}

}  // namespace ddf
