#pragma once

// Dense 2-D tensors with a reverse-mode tape. Values are row-major Eigen
// matrices; every op appends a node whose backward closure scatters the
// node's gradient into its parents.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmfuse/error.hpp"
#include "mmfuse/types.hpp"

namespace mmfuse::ad {

inline constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
class Graph;

template <typename Scalar>
struct Var {
    Graph<Scalar> *graph = nullptr;
    int id = -1;

    const Mat<Scalar> &value() const { return graph->value(*this); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

template <typename Scalar>
class Graph {
public:
    using Matrix = Mat<Scalar>;
    using BackwardFn = std::function<void(Graph &, const Matrix &out_grad)>;

    Graph() = default;
    Graph(const Graph &) = delete;
    Graph &operator=(const Graph &) = delete;

    /// Leaf without gradient tracking.
    Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }

    /// Leaf that owns its value and receives a gradient.
    Var<Scalar> variable(Matrix value) { return push(std::move(value), true, {}); }

    /// Leaf that views externally owned storage (model parameters). The
    /// referenced matrix must outlive the graph and stay unchanged.
    Var<Scalar> parameter(const Matrix &ref) {
        Node n;
        n.ref = &ref;
        n.requires_grad = true;
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size() - 1)};
    }

    const Matrix &value(Var<Scalar> v) const {
        const Node &n = nodes_.at(static_cast<std::size_t>(v.id));
        return n.ref ? *n.ref : n.owned;
    }

    bool requires_grad(Var<Scalar> v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }

    /// Gradient of the last backward() loss with respect to v. Zero for nodes
    /// the loss does not depend on.
    const Matrix &grad(Var<Scalar> v) const {
        if (!backward_done_) throw Error("Graph::grad: backward() has not run");
        return grads_.at(static_cast<std::size_t>(v.id));
    }

    /// Reverse-topological accumulation from a 1x1 loss. A graph supports a
    /// single backward pass; a second call throws.
    void backward(Var<Scalar> loss) {
        if (loss.graph != this) throw InvalidInput("backward: loss belongs to another graph");
        const Matrix &lv = value(loss);
        if (lv.rows() != 1 || lv.cols() != 1)
            throw InvalidInput("backward: loss must be scalar, got " + shape_str(lv.rows(), lv.cols()));
        if (backward_done_) throw Error("backward: already run on this graph");
        backward_done_ = true;

        grads_.resize(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Matrix &v = value({this, static_cast<int>(i)});
            grads_[i] = Matrix::Zero(v.rows(), v.cols());
        }
        grads_[static_cast<std::size_t>(loss.id)](0, 0) = Scalar(1);
        for (int i = loss.id; i >= 0; --i) {
            Node &n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward) n.backward(*this, grads_[static_cast<std::size_t>(i)]);
        }
    }

    bool backward_done() const { return backward_done_; }
    std::size_t size() const { return nodes_.size(); }

    // Used by op implementations. The closure is dropped when no parent
    // needs a gradient.
    Var<Scalar> push(Matrix value, std::span<const Var<Scalar>> parents, BackwardFn fn) {
        bool rg = false;
        for (auto p : parents) rg = rg || requires_grad(p);
        return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{});
    }

    Var<Scalar> push(Matrix value, std::initializer_list<Var<Scalar>> parents, BackwardFn fn) {
        return push(std::move(value), std::span<const Var<Scalar>>(parents.begin(), parents.size()), std::move(fn));
    }

    template <typename Derived>
    void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived> &g) {
        if (requires_grad(v)) grads_[static_cast<std::size_t>(v.id)] += g;
    }

private:
    struct Node {
        Matrix owned;
        const Matrix *ref = nullptr;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var<Scalar> push(Matrix value, bool rg, BackwardFn fn) {
        Node n;
        n.owned = std::move(value);
        n.requires_grad = rg;
        n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
    std::vector<Matrix> grads_;
    bool backward_done_ = false;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const char *op, Var<Scalar> a, Var<Scalar> b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidInput(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                           shape_str(b.rows(), b.cols()));
}

template <typename Scalar>
Graph<Scalar> &same_graph(const char *op, Var<Scalar> a, Var<Scalar> b) {
    if (a.graph != b.graph || a.graph == nullptr) throw InvalidInput(std::string(op) + ": operands from different graphs");
    return *a.graph;
}

} // namespace detail

// --- primitives ------------------------------------------------------------

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
    auto &g = detail::same_graph("matmul", a, b);
    if (a.cols() != b.rows())
        throw InvalidInput("matmul: inner dimensions differ, " + shape_str(a.rows(), a.cols()) + " x " +
                           shape_str(b.rows(), b.cols()));
    Mat<Scalar> out = a.value() * b.value();
    return g.push(std::move(out), {a, b}, [a, b](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        if (gr.requires_grad(a)) gr.accumulate(a, dy * gr.value(b).transpose());
        if (gr.requires_grad(b)) gr.accumulate(b, gr.value(a).transpose() * dy);
    });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
    auto &g = detail::same_graph("add", a, b);
    detail::require_same_shape("add", a, b);
    return g.push(a.value() + b.value(), {a, b}, [a, b](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        gr.accumulate(a, dy);
        gr.accumulate(b, dy);
    });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
    auto &g = detail::same_graph("sub", a, b);
    detail::require_same_shape("sub", a, b);
    return g.push(a.value() - b.value(), {a, b}, [a, b](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        gr.accumulate(a, dy);
        gr.accumulate(b, -dy);
    });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
    auto &g = detail::same_graph("mul", a, b);
    detail::require_same_shape("mul", a, b);
    Mat<Scalar> out = a.value().cwiseProduct(b.value());
    return g.push(std::move(out), {a, b}, [a, b](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        if (gr.requires_grad(a)) gr.accumulate(a, dy.cwiseProduct(gr.value(b)));
        if (gr.requires_grad(b)) gr.accumulate(b, dy.cwiseProduct(gr.value(a)));
    });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
    return a.graph->push(a.value() * s, {a}, [a, s](Graph<Scalar> &gr, const Mat<Scalar> &dy) { gr.accumulate(a, dy * s); });
}

/// x [n x d] + row [1 x d] broadcast over rows.
template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> x, Var<Scalar> row) {
    auto &g = detail::same_graph("add_bias", x, row);
    if (row.rows() != 1 || row.cols() != x.cols())
        throw InvalidInput("add_bias: expected bias " + shape_str(1, x.cols()) + ", got " + shape_str(row.rows(), row.cols()));
    Mat<Scalar> out = x.value().rowwise() + row.value().row(0);
    return g.push(std::move(out), {x, row}, [x, row](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        gr.accumulate(x, dy);
        if (gr.requires_grad(row)) gr.accumulate(row, dy.colwise().sum());
    });
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
    Mat<Scalar> out = a.value().transpose();
    return a.graph->push(std::move(out), {a}, [a](Graph<Scalar> &gr, const Mat<Scalar> &dy) { gr.accumulate(a, dy.transpose()); });
}

/// Row softmax, stabilised by subtracting the row maximum.
template <typename Scalar>
Mat<Scalar> softmax_rows_value(const Mat<Scalar> &x) {
    Mat<Scalar> y = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
    y.array().colwise() /= y.rowwise().sum().array();
    return y;
}

template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> x) {
    Mat<Scalar> y = softmax_rows_value<Scalar>(x.value());
    const int id = static_cast<int>(x.graph->size());
    return x.graph->push(std::move(y), {x}, [x, id](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        const Mat<Scalar> &yv = gr.value({&gr, id});
        const auto dot = dy.cwiseProduct(yv).rowwise().sum();
        gr.accumulate(x, yv.cwiseProduct(dy - dot.replicate(1, dy.cols())));
    });
}

/// Normalises each row to zero mean / unit variance, then gamma * x_hat + beta.
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta) {
    auto &g = *x.graph;
    const Eigen::Index d = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
        throw InvalidInput("layer_norm: gamma/beta must be " + shape_str(1, d));
    const Mat<Scalar> &xv = x.value();
    Vec<Scalar> inv_std(xv.rows());
    Mat<Scalar> xhat(xv.rows(), d);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const Scalar mu = xv.row(r).mean();
        const Scalar var = (xv.row(r).array() - mu).square().mean();
        inv_std[r] = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
        xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
    }
    Mat<Scalar> y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
    y.rowwise() += beta.value().row(0);
    return g.push(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, xhat, inv_std](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
                      if (gr.requires_grad(gamma)) gr.accumulate(gamma, dy.cwiseProduct(xhat).colwise().sum());
                      if (gr.requires_grad(beta)) gr.accumulate(beta, dy.colwise().sum());
                      if (!gr.requires_grad(x)) return;
                      const Mat<Scalar> dxhat = (dy.array().rowwise() * gr.value(gamma).row(0).array()).matrix();
                      Mat<Scalar> dx(dy.rows(), dy.cols());
                      for (Eigen::Index r = 0; r < dy.rows(); ++r) {
                          const Scalar m1 = dxhat.row(r).mean();
                          const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                          dx.row(r) = inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                      }
                      gr.accumulate(x, dx);
                  });
}

/// GELU, tanh approximation.
template <typename Scalar>
Var<Scalar> gelu(Var<Scalar> x) {
    const Scalar c = static_cast<Scalar>(std::sqrt(2.0 / std::numbers::pi));
    const Scalar k = static_cast<Scalar>(0.044715);
    const auto &xv = x.value().array();
    const Mat<Scalar> t = (c * (xv + k * xv.cube())).tanh().matrix();
    Mat<Scalar> y = (Scalar(0.5) * xv * (Scalar(1) + t.array())).matrix();
    return x.graph->push(std::move(y), {x}, [x, t, c, k](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        const auto xa = gr.value(x).array();
        const auto ta = t.array();
        const auto dgelu = Scalar(0.5) * (Scalar(1) + ta) +
                           Scalar(0.5) * xa * (Scalar(1) - ta.square()) * c * (Scalar(1) + Scalar(3) * k * xa.square());
        gr.accumulate(x, (dy.array() * dgelu).matrix());
    });
}

/// Mean over rows (the temporal axis): [n x d] -> [1 x d].
template <typename Scalar>
Var<Scalar> mean_rows(Var<Scalar> x) {
    const Eigen::Index n = x.rows();
    if (n == 0) throw InvalidInput("mean_rows: empty input");
    Mat<Scalar> y = x.value().colwise().mean();
    return x.graph->push(std::move(y), {x}, [x, n](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        gr.accumulate(x, dy.replicate(n, 1) / static_cast<Scalar>(n));
    });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
    Mat<Scalar> y(1, 1);
    y(0, 0) = x.value().sum();
    return x.graph->push(std::move(y), {x}, [x](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        const Mat<Scalar> &xv = gr.value(x);
        gr.accumulate(x, Mat<Scalar>::Constant(xv.rows(), xv.cols(), dy(0, 0)));
    });
}

/// Concatenation along the last axis.
template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
    if (parts.empty()) throw InvalidInput("concat_cols: nothing to concatenate");
    auto &g = *parts[0].graph;
    const Eigen::Index rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const auto &p : parts) {
        if (p.rows() != rows) throw InvalidInput("concat_cols: row counts differ");
        cols += p.cols();
    }
    Mat<Scalar> y(rows, cols);
    std::vector<Var<Scalar>> ps(parts.begin(), parts.end());
    Eigen::Index off = 0;
    for (const auto &p : ps) {
        y.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    return g.push(std::move(y), std::span<const Var<Scalar>>(ps), [ps](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        Eigen::Index o = 0;
        for (const auto &p : ps) {
            const Eigen::Index c = gr.value(p).cols();
            gr.accumulate(p, dy.middleCols(o, c));
            o += c;
        }
    });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts) {
    return concat_cols<Scalar>(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.cols())
        throw InvalidInput("slice_cols: range out of bounds for " + shape_str(x.rows(), x.cols()));
    Mat<Scalar> y = x.value().middleCols(start, count);
    return x.graph->push(std::move(y), {x}, [x, start, count](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        if (!gr.requires_grad(x)) return;
        const Mat<Scalar> &xv = gr.value(x);
        Mat<Scalar> full = Mat<Scalar>::Zero(xv.rows(), xv.cols());
        full.middleCols(start, count) = dy;
        gr.accumulate(x, full);
    });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.rows())
        throw InvalidInput("slice_rows: range out of bounds for " + shape_str(x.rows(), x.cols()));
    Mat<Scalar> y = x.value().middleRows(start, count);
    return x.graph->push(std::move(y), {x}, [x, start, count](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        if (!gr.requires_grad(x)) return;
        const Mat<Scalar> &xv = gr.value(x);
        Mat<Scalar> full = Mat<Scalar>::Zero(xv.rows(), xv.cols());
        full.middleRows(start, count) = dy;
        gr.accumulate(x, full);
    });
}

/// Mean softmax cross-entropy of logit rows against integer labels.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, std::span<const int> labels) {
    const Eigen::Index n = logits.rows(), c = logits.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n) throw InvalidInput("softmax_cross_entropy: label count != rows");
    for (int l : labels)
        if (l < 0 || l >= c) throw InvalidInput("softmax_cross_entropy: label " + std::to_string(l) + " out of range");
    const Mat<Scalar> &z = logits.value();
    const Mat<Scalar> p = softmax_rows_value<Scalar>(z);
    Scalar loss = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Scalar m = z.row(r).maxCoeff();
        const Scalar lse = m + std::log((z.row(r).array() - m).exp().sum());
        loss += lse - z(r, labels[static_cast<std::size_t>(r)]);
    }
    Mat<Scalar> y(1, 1);
    y(0, 0) = loss / static_cast<Scalar>(n);
    std::vector<int> lab(labels.begin(), labels.end());
    return logits.graph->push(std::move(y), {logits}, [logits, p, lab, n](Graph<Scalar> &gr, const Mat<Scalar> &dy) {
        Mat<Scalar> d = p;
        for (Eigen::Index r = 0; r < n; ++r) d(r, lab[static_cast<std::size_t>(r)]) -= Scalar(1);
        gr.accumulate(logits, d * (dy(0, 0) / static_cast<Scalar>(n)));
    });
}

/// Mean of squared differences over all elements.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b) {
    const Var<Scalar> d = sub(a, b);
    return scale(sum(mul(d, d)), Scalar(1) / static_cast<Scalar>(d.value().size()));
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Scalar s) { return scale(a, s); }

// --- attention -------------------------------------------------------------

template <typename Scalar>
struct AttentionResult {
    Var<Scalar> output;  // [n x d_v]
    Var<Scalar> weights; // [n x m], rows sum to 1
};

/// softmax(Q K^T / sqrt(d_k)) V
template <typename Scalar>
AttentionResult<Scalar> attention(Var<Scalar> q, Var<Scalar> k, Var<Scalar> v) {
    if (q.cols() < 1) throw InvalidInput("attention: d_k must be >= 1");
    if (q.cols() != k.cols())
        throw InvalidInput("attention: Q is " + shape_str(q.rows(), q.cols()) + " but K is " + shape_str(k.rows(), k.cols()) +
                           " (key width must equal query width)");
    if (k.rows() != v.rows())
        throw InvalidInput("attention: K is " + shape_str(k.rows(), k.cols()) + " but V is " + shape_str(v.rows(), v.cols()) +
                           " (row counts must match)");
    const Scalar inv = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
    const Var<Scalar> w = softmax_rows(scale(matmul(q, transpose(k)), inv));
    return {matmul(w, v), w};
}

/// Convenience form on plain matrices.
template <typename Scalar>
Mat<Scalar> attention(const Mat<Scalar> &q, const Mat<Scalar> &k, const Mat<Scalar> &v, Mat<Scalar> *weights = nullptr) {
    Graph<Scalar> g;
    const auto r = attention(g.constant(q), g.constant(k), g.constant(v));
    if (weights) *weights = r.weights.value();
    return r.output.value();
}

// --- parameters ------------------------------------------------------------

template <typename Scalar>
class ParameterSet {
public:
    using Matrix = Mat<Scalar>;

    Matrix &add(const std::string &name, Matrix value) {
        if (index_.count(name)) throw InvalidInput("ParameterSet: duplicate parameter " + name);
        index_[name] = entries_.size();
        entries_.push_back({name, std::move(value)});
        return entries_.back().second;
    }

    Matrix &operator[](const std::string &name) { return entries_.at(find(name)).second; }
    const Matrix &operator[](const std::string &name) const { return entries_.at(find(name)).second; }
    std::size_t index_of(const std::string &name) const { return find(name); }

    std::size_t size() const { return entries_.size(); }
    const std::string &name(std::size_t i) const { return entries_[i].first; }
    Matrix &at(std::size_t i) { return entries_[i].second; }
    const Matrix &at(std::size_t i) const { return entries_[i].second; }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto &e : entries_) n += static_cast<std::size_t>(e.second.size());
        return n;
    }

    template <typename Other>
    ParameterSet<Other> cast() const {
        ParameterSet<Other> out;
        for (const auto &[n, m] : entries_) out.add(n, m.template cast<Other>());
        return out;
    }

    /// Registers every parameter as a leaf of g, in insertion order.
    std::vector<Var<Scalar>> bind(Graph<Scalar> &g) const {
        std::vector<Var<Scalar>> vars;
        vars.reserve(entries_.size());
        for (const auto &e : entries_) vars.push_back(g.parameter(e.second));
        return vars;
    }

private:
    std::size_t find(const std::string &name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw InvalidInput("ParameterSet: no parameter named " + name);
        return it->second;
    }

    std::vector<std::pair<std::string, Matrix>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
Mat<Scalar> init_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64 &rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
    return m;
}

// Binary parameter file: "MMFP", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rank, u64 dims..., f64 values. Little endian.
inline constexpr char kParamMagic[4] = {'M', 'M', 'F', 'P'};
inline constexpr std::uint32_t kParamVersion = 1;

namespace detail {
template <typename T>
void put_le(std::ostream &out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char *>(b), sizeof(T));
}
template <typename T>
T get_le(std::istream &in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(b), sizeof(T))) throw IoError("parameter file truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}
} // namespace detail

template <typename Scalar>
void save_parameters(const std::filesystem::path &path, const ParameterSet<Scalar> &params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kParamMagic, 4);
    detail::put_le<std::uint32_t>(out, kParamVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto &name = params.name(i);
        const auto &m = params.at(i);
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_le<std::uint32_t>(out, 2);
        detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
        detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.size(); ++k) detail::put_le<double>(out, static_cast<double>(m.data()[k]));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

template <typename Scalar>
ParameterSet<Scalar> load_parameters(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kParamMagic, 4) != 0) throw IoError(path.string() + ": bad magic");
    const auto version = detail::get_le<std::uint32_t>(in);
    if (version != kParamVersion) throw IoError(path.string() + ": unsupported version " + std::to_string(version));
    const auto count = detail::get_le<std::uint32_t>(in);
    ParameterSet<Scalar> params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = detail::get_le<std::uint32_t>(in);
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw IoError("parameter file truncated");
        const auto rank = detail::get_le<std::uint32_t>(in);
        if (rank < 1 || rank > 2) throw IoError(path.string() + ": unsupported rank for " + name);
        std::uint64_t dims[2] = {1, 1};
        for (std::uint32_t r = 0; r < rank; ++r) dims[r] = detail::get_le<std::uint64_t>(in);
        const Eigen::Index rows = rank == 2 ? static_cast<Eigen::Index>(dims[0]) : 1;
        const Eigen::Index cols = rank == 2 ? static_cast<Eigen::Index>(dims[1]) : static_cast<Eigen::Index>(dims[0]);
        Mat<Scalar> m(rows, cols);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(detail::get_le<double>(in));
        params.add(name, std::move(m));
    }
    return params;
}

// --- gradient checking -----------------------------------------------------

template <typename Scalar>
using LossBuilder = std::function<Var<Scalar>(Graph<Scalar> &, std::span<const Var<Scalar>>)>;

template <typename Scalar>
struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    Eigen::Index worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates_checked = 0;
};

/// Compares backward() against central differences (f(p+h) - f(p-h)) / 2h.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). With max_coords > 0 only
/// that many randomly chosen coordinates per parameter are perturbed.
template <typename Scalar>
GradCheckResult<Scalar> finite_diff_check(const LossBuilder<Scalar> &f, std::vector<Mat<Scalar>> params, Scalar step,
                                          std::size_t max_coords = 0, std::uint64_t seed = 0) {
    if (!(step > Scalar(0))) throw InvalidInput("finite_diff_check: step must be positive");

    std::vector<Mat<Scalar>> analytic;
    {
        Graph<Scalar> g;
        std::vector<Var<Scalar>> vars;
        for (const auto &p : params) vars.push_back(g.parameter(p));
        const auto loss = f(g, vars);
        g.backward(loss);
        for (const auto &v : vars) analytic.push_back(g.grad(v));
    }
    auto eval = [&]() {
        Graph<Scalar> g;
        std::vector<Var<Scalar>> vars;
        for (const auto &p : params) vars.push_back(g.constant(p));
        return static_cast<double>(f(g, vars).value()(0, 0));
    };

    GradCheckResult<Scalar> res;
    std::mt19937_64 rng(seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Eigen::Index n = params[pi].size();
        std::vector<Eigen::Index> coords;
        if (max_coords == 0 || static_cast<Eigen::Index>(max_coords) >= n) {
            for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
        } else {
            std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
            for (std::size_t i = 0; i < max_coords; ++i) coords.push_back(pick(rng));
        }
        for (Eigen::Index idx : coords) {
            Scalar &slot = params[pi].data()[idx];
            const Scalar orig = slot;
            slot = orig + step;
            const double fp = eval();
            slot = orig - step;
            const double fm = eval();
            slot = orig;
            const double num = (fp - fm) / (2.0 * static_cast<double>(step));
            const double ana = static_cast<double>(analytic[pi].data()[idx]);
            const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
            ++res.coordinates_checked;
            if (rel > res.max_rel_error) res = {rel, pi, idx, ana, num, res.coordinates_checked};
        }
    }
    return res;
}

} // namespace mmfuse::ad
