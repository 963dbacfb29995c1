#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ddf/tensor.hpp"

namespace ddf {
namespace ops {

inline bool want_grad(const Tensor& t) { return t.requires_grad; }

inline void attach(Tensor& out, std::vector<Tensor> parents, std::function<void(const Tensor&)> fn) {
    out.node = std::make_shared<Node>();
    out.node->parents = std::move(parents);
    out.node->backprop = std::move(fn);
}

// Adds into a parent's grad buffer; no-op for constants.
inline void acc(const Tensor& p, std::size_t i, double v) {
    if (p.grad) (*p.grad)[i] += v;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::runtime_error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
    ensure_finite(out, "add");
    if (out.requires_grad) {
        attach(out, {a, b}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const Tensor& b = o.node->parents[1];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                acc(a, i, (*o.grad)[i]);
                acc(b, i, (*o.grad)[i]);
            }
        });
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    ensure_finite(out, "sub");
    if (out.requires_grad) {
        attach(out, {a, b}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const Tensor& b = o.node->parents[1];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                acc(a, i, (*o.grad)[i]);
                acc(b, i, -(*o.grad)[i]);
            }
        });
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    ensure_finite(out, "mul");
    if (out.requires_grad) {
        attach(out, {a, b}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const Tensor& b = o.node->parents[1];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                acc(a, i, (*o.grad)[i] * (*b.data)[i]);
                acc(b, i, (*o.grad)[i] * (*a.data)[i]);
            }
        });
    }
    return out;
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = (*a.data)[i] / (*b.data)[i];
    ensure_finite(out, "div");
    if (out.requires_grad) {
        attach(out, {a, b}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const Tensor& b = o.node->parents[1];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                const double bv = (*b.data)[i];
                acc(a, i, (*o.grad)[i] / bv);
                acc(b, i, -(*o.grad)[i] * (*a.data)[i] / (bv * bv));
            }
        });
    }
    return out;
}

// Elementwise sum of n same-shape tensors in one node; keeps large
// accumulation graphs shallow.
inline Tensor add_n(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::runtime_error("add_n: empty input");
    bool grad = false;
    for (const Tensor& x : xs) {
        check_same_shape(xs[0], x, "add_n");
        grad = grad || want_grad(x);
    }
    Tensor out = Tensor::zeros(xs[0].shape, grad);
    for (const Tensor& x : xs) {
        for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] += (*x.data)[i];
    }
    ensure_finite(out, "add_n");
    if (out.requires_grad) {
        attach(out, xs, [](const Tensor& o) {
            for (const Tensor& p : o.node->parents) {
                if (!p.grad) continue;
                for (std::size_t i = 0; i < o.grad->size(); ++i) (*p.grad)[i] += (*o.grad)[i];
            }
        });
    }
    return out;
}

inline Tensor scalar_add(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = (*a.data)[i] + c;
    ensure_finite(out, "scalar_add");
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) acc(a, i, (*o.grad)[i]);
        });
    }
    return out;
}

inline Tensor scalar_mul(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = (*a.data)[i] * c;
    ensure_finite(out, "scalar_mul");
    if (out.requires_grad) {
        attach(out, {a}, [c](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) acc(a, i, (*o.grad)[i] * c);
        });
    }
    return out;
}

inline Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

// [r,c] + [c], the bias add.
inline Tensor add_rowwise(const Tensor& m, const Tensor& v) {
    if (m.ndim() != 2 || v.ndim() != 1 || m.shape[1] != v.shape[0]) {
        throw std::runtime_error("add_rowwise: expected [r,c] and [c], got " + m.shape_str() + " and " + v.shape_str());
    }
    Tensor out = Tensor::zeros(m.shape, want_grad(m) || want_grad(v));
    const int r = m.shape[0], c = m.shape[1];
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.set(i, j, m.at(i, j) + v.at(j));
    ensure_finite(out, "add_rowwise");
    if (out.requires_grad) {
        attach(out, {m, v}, [r, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            const Tensor& v = o.node->parents[1];
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) {
                    const double g = (*o.grad)[static_cast<std::size_t>(i) * c + j];
                    acc(m, static_cast<std::size_t>(i) * c + j, g);
                    acc(v, static_cast<std::size_t>(j), g);
                }
            }
        });
    }
    return out;
}

// [r,c] * [c], each row scaled elementwise.
inline Tensor mul_rowwise(const Tensor& m, const Tensor& v) {
    if (m.ndim() != 2 || v.ndim() != 1 || m.shape[1] != v.shape[0]) {
        throw std::runtime_error("mul_rowwise: expected [r,c] and [c], got " + m.shape_str() + " and " + v.shape_str());
    }
    Tensor out = Tensor::zeros(m.shape, want_grad(m) || want_grad(v));
    const int r = m.shape[0], c = m.shape[1];
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.set(i, j, m.at(i, j) * v.at(j));
    ensure_finite(out, "mul_rowwise");
    if (out.requires_grad) {
        attach(out, {m, v}, [r, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            const Tensor& v = o.node->parents[1];
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) {
                    const double g = (*o.grad)[static_cast<std::size_t>(i) * c + j];
                    acc(m, static_cast<std::size_t>(i) * c + j, g * v.at(j));
                    acc(v, static_cast<std::size_t>(j), g * m.at(i, j));
                }
            }
        });
    }
    return out;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[0]) {
        throw std::runtime_error("matmul: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    }
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n}, want_grad(a) || want_grad(b));
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double av = a.at(i, l);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                (*out.data)[static_cast<std::size_t>(i) * n + j] += av * b.at(l, j);
            }
        }
    }
    ensure_finite(out, "matmul");
    if (out.requires_grad) {
        attach(out, {a, b}, [m, k, n](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const Tensor& b = o.node->parents[1];
            // dA = dOut @ B^T, dB = A^T @ dOut
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double g = (*o.grad)[static_cast<std::size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    for (int l = 0; l < k; ++l) {
                        acc(a, static_cast<std::size_t>(i) * k + l, g * b.at(l, j));
                        acc(b, static_cast<std::size_t>(l) * n + j, g * a.at(i, l));
                    }
                }
            }
        });
    }
    return out;
}

// [k] @ [k,n] -> [n]
inline Tensor vecmat(const Tensor& v, const Tensor& m) {
    if (v.ndim() != 1 || m.ndim() != 2 || v.shape[0] != m.shape[0]) {
        throw std::runtime_error("vecmat: incompatible shapes " + v.shape_str() + " and " + m.shape_str());
    }
    const int k = m.shape[0], n = m.shape[1];
    Tensor out = Tensor::zeros({n}, want_grad(v) || want_grad(m));
    for (int l = 0; l < k; ++l) {
        const double vv = v.at(l);
        for (int j = 0; j < n; ++j) (*out.data)[j] += vv * m.at(l, j);
    }
    ensure_finite(out, "vecmat");
    if (out.requires_grad) {
        attach(out, {v, m}, [k, n](const Tensor& o) {
            const Tensor& v = o.node->parents[0];
            const Tensor& m = o.node->parents[1];
            for (int l = 0; l < k; ++l) {
                for (int j = 0; j < n; ++j) {
                    const double g = (*o.grad)[j];
                    acc(v, static_cast<std::size_t>(l), g * m.at(l, j));
                    acc(m, static_cast<std::size_t>(l) * n + j, g * v.at(l));
                }
            }
        });
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw std::runtime_error("transpose: expected 2-d tensor, got " + a.shape_str());
    const int r = a.shape[0], c = a.shape[1];
    Tensor out = Tensor::zeros({c, r}, want_grad(a));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.set(j, i, a.at(i, j));
    if (out.requires_grad) {
        attach(out, {a}, [r, c](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) acc(a, static_cast<std::size_t>(i) * c + j, (*o.grad)[static_cast<std::size_t>(j) * r + i]);
        });
    }
    return out;
}

// [m] x [n] -> [m,n], out[i][j] = a[i]*b[j]. Flattened row-major this is the
// Kronecker product of the two vectors.
inline Tensor outer(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 1 || b.ndim() != 1) {
        throw std::runtime_error("outer: expected two 1-d tensors, got " + a.shape_str() + " and " + b.shape_str());
    }
    const int m = a.shape[0], n = b.shape[0];
    Tensor out = Tensor::zeros({m, n}, want_grad(a) || want_grad(b));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.set(i, j, a.at(i) * b.at(j));
    ensure_finite(out, "outer");
    if (out.requires_grad) {
        attach(out, {a, b}, [m, n](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const Tensor& b = o.node->parents[1];
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double g = (*o.grad)[static_cast<std::size_t>(i) * n + j];
                    acc(a, static_cast<std::size_t>(i), g * b.at(j));
                    acc(b, static_cast<std::size_t>(j), g * a.at(i));
                }
            }
        });
    }
    return out;
}

inline Tensor concat(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::runtime_error("concat: empty input");
    int total = 0;
    bool grad = false;
    for (const Tensor& x : xs) {
        if (x.ndim() != 1) throw std::runtime_error("concat: expected 1-d tensors, got " + x.shape_str());
        total += x.shape[0];
        grad = grad || want_grad(x);
    }
    Tensor out = Tensor::zeros({total}, grad);
    int off = 0;
    for (const Tensor& x : xs) {
        std::copy(x.data->begin(), x.data->end(), out.data->begin() + off);
        off += x.shape[0];
    }
    if (out.requires_grad) {
        attach(out, xs, [](const Tensor& o) {
            std::size_t off = 0;
            for (const Tensor& p : o.node->parents) {
                if (p.grad) {
                    for (std::size_t i = 0; i < p.data->size(); ++i) (*p.grad)[i] += (*o.grad)[off + i];
                }
                off += p.data->size();
            }
        });
    }
    return out;
}

inline Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

// Column-wise concat of [N, d_i] blocks sharing N.
inline Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::runtime_error("concat_cols: empty input");
    const int n = xs[0].ndim() == 2 ? xs[0].shape[0] : -1;
    int total = 0;
    bool grad = false;
    for (const Tensor& x : xs) {
        if (x.ndim() != 2 || x.shape[0] != n) throw std::runtime_error("concat_cols: expected [N,d] tensors with equal N");
        total += x.shape[1];
        grad = grad || want_grad(x);
    }
    Tensor out = Tensor::zeros({n, total}, grad);
    int off = 0;
    for (const Tensor& x : xs) {
        const int c = x.shape[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) out.set(i, off + j, x.at(i, j));
        off += c;
    }
    if (out.requires_grad) {
        attach(out, xs, [n, total](const Tensor& o) {
            int off = 0;
            for (const Tensor& p : o.node->parents) {
                const int c = p.shape[1];
                if (p.grad) {
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < c; ++j)
                            (*p.grad)[static_cast<std::size_t>(i) * c + j] += (*o.grad)[static_cast<std::size_t>(i) * total + off + j];
                }
                off += c;
            }
        });
    }
    return out;
}

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
    Tensor out = Tensor::zeros(std::move(shape), want_grad(a));
    if (out.numel() != a.numel()) throw std::runtime_error("reshape: element count mismatch");
    *out.data = *a.data;
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) acc(a, i, (*o.grad)[i]);
        });
    }
    return out;
}

inline Tensor slice_row(const Tensor& m, int row) {
    if (m.ndim() != 2 || row < 0 || row >= m.shape[0]) throw std::runtime_error("slice_row: index out of range");
    const int c = m.shape[1];
    Tensor out = Tensor::zeros({c}, want_grad(m));
    for (int j = 0; j < c; ++j) out.set(j, m.at(row, j));
    if (out.requires_grad) {
        attach(out, {m}, [row, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            for (int j = 0; j < c; ++j) acc(m, static_cast<std::size_t>(row) * c + j, (*o.grad)[j]);
        });
    }
    return out;
}

inline Tensor gather_rows(const Tensor& m, std::vector<int> idx) {
    if (m.ndim() != 2) throw std::runtime_error("gather_rows: expected 2-d tensor");
    const int c = m.shape[1];
    Tensor out = Tensor::zeros({static_cast<int>(idx.size()), c}, want_grad(m));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= m.shape[0]) throw std::runtime_error("gather_rows: index out of range");
        for (int j = 0; j < c; ++j) out.set(static_cast<int>(i), j, m.at(idx[i], j));
    }
    if (out.requires_grad) {
        attach(out, {m}, [idx, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (int j = 0; j < c; ++j) acc(m, static_cast<std::size_t>(idx[i]) * c + j, (*o.grad)[i * c + j]);
        });
    }
    return out;
}

inline Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::runtime_error("stack_rows: empty input");
    const int c = rows[0].ndim() == 1 ? rows[0].shape[0] : -1;
    bool grad = false;
    for (const Tensor& r : rows) {
        if (r.ndim() != 1 || r.shape[0] != c) throw std::runtime_error("stack_rows: expected equal-length 1-d tensors");
        grad = grad || want_grad(r);
    }
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), c}, grad);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < c; ++j) out.set(static_cast<int>(i), j, rows[i].at(j));
    if (out.requires_grad) {
        attach(out, rows, [c](const Tensor& o) {
            for (std::size_t i = 0; i < o.node->parents.size(); ++i) {
                const Tensor& p = o.node->parents[i];
                if (!p.grad) continue;
                for (int j = 0; j < c; ++j) (*p.grad)[j] += (*o.grad)[i * c + j];
            }
        });
    }
    return out;
}

// out[i] = m[i, idx[i]]; the label-probability pick.
inline Tensor take_per_row(const Tensor& m, const std::vector<int>& idx) {
    if (m.ndim() != 2 || static_cast<int>(idx.size()) != m.shape[0]) {
        throw std::runtime_error("take_per_row: need one column index per row");
    }
    const int c = m.shape[1];
    Tensor out = Tensor::zeros({m.shape[0]}, want_grad(m));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= c) throw std::runtime_error("take_per_row: index out of range");
        out.set(static_cast<int>(i), m.at(static_cast<int>(i), idx[i]));
    }
    if (out.requires_grad) {
        attach(out, {m}, [idx, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            for (std::size_t i = 0; i < idx.size(); ++i) acc(m, i * c + idx[i], (*o.grad)[i]);
        });
    }
    return out;
}

inline Tensor sum(const Tensor& a) {
    Tensor out = Tensor::zeros({1}, want_grad(a));
    double s = 0.0;
    for (double v : *a.data) s += v;
    (*out.data)[0] = s;
    ensure_finite(out, "sum");
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const double g = (*o.grad)[0];
            for (std::size_t i = 0; i < a.data->size(); ++i) acc(a, i, g);
        });
    }
    return out;
}

inline Tensor mean(const Tensor& a) {
    const double n = static_cast<double>(a.numel());
    Tensor out = Tensor::zeros({1}, want_grad(a));
    double s = 0.0;
    for (double v : *a.data) s += v;
    (*out.data)[0] = s / n;
    ensure_finite(out, "mean");
    if (out.requires_grad) {
        attach(out, {a}, [n](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            const double g = (*o.grad)[0] / n;
            for (std::size_t i = 0; i < a.data->size(); ++i) acc(a, i, g);
        });
    }
    return out;
}

// [r,c] -> [r], per-row sum.
inline Tensor row_sum(const Tensor& m) {
    if (m.ndim() != 2) throw std::runtime_error("row_sum: expected 2-d tensor");
    const int r = m.shape[0], c = m.shape[1];
    Tensor out = Tensor::zeros({r}, want_grad(m));
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += m.at(i, j);
        out.set(i, s);
    }
    ensure_finite(out, "row_sum");
    if (out.requires_grad) {
        attach(out, {m}, [r, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) acc(m, static_cast<std::size_t>(i) * c + j, (*o.grad)[i]);
        });
    }
    return out;
}

// [r,c] -> [c], mean over rows; token and batch pooling.
inline Tensor col_mean(const Tensor& m) {
    if (m.ndim() != 2) throw std::runtime_error("col_mean: expected 2-d tensor");
    const int r = m.shape[0], c = m.shape[1];
    Tensor out = Tensor::zeros({c}, want_grad(m));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) (*out.data)[j] += m.at(i, j) / r;
    ensure_finite(out, "col_mean");
    if (out.requires_grad) {
        attach(out, {m}, [r, c](const Tensor& o) {
            const Tensor& m = o.node->parents[0];
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) acc(m, static_cast<std::size_t>(i) * c + j, (*o.grad)[j] / r);
        });
    }
    return out;
}

// Softmax over the last axis (1-d whole vector, 2-d per row), max-shifted.
inline Tensor softmax(const Tensor& a) {
    if (a.ndim() != 1 && a.ndim() != 2) throw std::runtime_error("softmax: expected 1-d or 2-d tensor");
    const int rows = a.ndim() == 2 ? a.shape[0] : 1;
    const int cols = a.ndim() == 2 ? a.shape[1] : a.shape[0];
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (int i = 0; i < rows; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * cols;
        double mx = (*a.data)[base];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, (*a.data)[base + j]);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double e = std::exp((*a.data)[base + j] - mx);
            (*out.data)[base + j] = e;
            z += e;
        }
        for (int j = 0; j < cols; ++j) (*out.data)[base + j] /= z;
    }
    ensure_finite(out, "softmax");
    if (out.requires_grad) {
        attach(out, {a}, [rows, cols](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (int i = 0; i < rows; ++i) {
                const std::size_t base = static_cast<std::size_t>(i) * cols;
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += (*o.grad)[base + j] * (*o.data)[base + j];
                for (int j = 0; j < cols; ++j) {
                    acc(a, base + j, (*o.data)[base + j] * ((*o.grad)[base + j] - dot));
                }
            }
        });
    }
    return out;
}

inline Tensor relu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = std::max(0.0, (*a.data)[i]);
    ensure_finite(out, "relu");
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                if ((*a.data)[i] > 0.0) acc(a, i, (*o.grad)[i]);
            }
        });
    }
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) {
        const double x = (*a.data)[i];
        (*out.data)[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    ensure_finite(out, "sigmoid");
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                const double y = (*o.data)[i];
                acc(a, i, (*o.grad)[i] * y * (1.0 - y));
            }
        });
    }
    return out;
}

inline Tensor exp(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = std::exp((*a.data)[i]);
    ensure_finite(out, "exp");
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) acc(a, i, (*o.grad)[i] * (*o.data)[i]);
        });
    }
    return out;
}

inline Tensor log(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = std::log((*a.data)[i]);
    ensure_finite(out, "log");
    if (out.requires_grad) {
        attach(out, {a}, [](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) acc(a, i, (*o.grad)[i] / (*a.data)[i]);
        });
    }
    return out;
}

// x^p for fixed p. At x == 0 the derivative uses the one-sided value: 1 for
// p == 1, 0 otherwise (keeps focal terms finite at saturated probabilities).
inline Tensor pow_scalar(const Tensor& a, double p) {
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = std::pow((*a.data)[i], p);
    ensure_finite(out, "pow");
    if (out.requires_grad) {
        attach(out, {a}, [p](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                const double x = (*a.data)[i];
                double d;
                if (x == 0.0) {
                    d = (p == 1.0) ? 1.0 : 0.0;
                } else {
                    d = p * std::pow(x, p - 1.0);
                }
                acc(a, i, (*o.grad)[i] * d);
            }
        });
    }
    return out;
}

// Identity inside [lo, hi], constant outside; gradient passes iff the input
// lies inside the range.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw std::runtime_error("clamp: lo > hi");
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < out.data->size(); ++i) (*out.data)[i] = std::clamp((*a.data)[i], lo, hi);
    ensure_finite(out, "clamp");
    if (out.requires_grad) {
        attach(out, {a}, [lo, hi](const Tensor& o) {
            const Tensor& a = o.node->parents[0];
            for (std::size_t i = 0; i < o.grad->size(); ++i) {
                const double x = (*a.data)[i];
                if (x >= lo && x <= hi) acc(a, i, (*o.grad)[i]);
            }
        });
    }
    return out;
}

// Same values, cut off from the graph.
inline Tensor detach(const Tensor& a) {
    Tensor out;
    out.shape = a.shape;
    out.data = std::make_shared<std::vector<double>>(*a.data);
    out.requires_grad = false;
    return out;
}

}  // namespace ops
}  // namespace ddf
