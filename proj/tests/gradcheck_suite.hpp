#pragma once

// Seeded finite-difference configurations over every tensor primitive and
// both fusion models at reduced width.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mmfuse/fusion.hpp"
#include "mmfuse/tensor.hpp"
#include "oracles.hpp"

namespace testing {

struct GradCase {
    std::string name;
    std::uint64_t seed = 0;
    double max_rel_error = 0;
    std::size_t coordinates = 0;
    double analytic = 0;
    double numeric = 0;
    std::string worst;
    double invariant_grad = 0;
};

using mmfuse::Mat;
namespace ad = mmfuse::ad;
using V = ad::Var<double>;
using G = ad::Graph<double>;

// Projects an arbitrary output onto a fixed random direction so every
// coordinate of it matters to the scalar loss.
inline V project(G &g, V y, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xABCDEF);
    return ad::sum(ad::mul(y, g.constant(oracle::random_matrix(y.rows(), y.cols(), rng))));
}

inline mmfuse::FusionDims tiny_dims(bool advanced) {
    mmfuse::FusionDims d;
    d.visual_features = advanced ? 4 : 3;
    d.audio_features = advanced ? 5 : 4;
    d.hidden = 8;
    d.heads = 2;
    d.layers = 2;
    d.ffn = 12;
    d.motion_classes = 2;
    d.event_classes = advanced ? 5 : 0;
    d.max_len = 6;
    return d;
}

// Key-projection biases have an exactly zero gradient under softmax. They are
// held fixed for the relative check and their analytic gradient is reported.
inline bool softmax_invariant(const std::string &name) {
    return name.size() >= 4 && name.compare(name.size() - 4, 4, ".k.b") == 0;
}

inline GradCase check_model(const std::string &label, std::uint64_t seed, const ad::ParameterSet<double> &set,
                            const ad::LossBuilder<double> &full) {
    std::vector<std::size_t> free;
    std::vector<Mat<double>> params;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (!softmax_invariant(set.name(i))) {
            free.push_back(i);
            params.push_back(set.at(i));
        }
    const ad::LossBuilder<double> loss = [&](G &g, std::span<const V> p) {
        std::vector<V> all;
        for (std::size_t i = 0, k = 0; i < set.size(); ++i)
            all.push_back(k < free.size() && free[k] == i ? p[k++] : g.constant(set.at(i)));
        return full(g, all);
    };
    const auto r = ad::finite_diff_check<double>(loss, params, 1e-5, 0, seed);
    GradCase c{label, seed, r.max_rel_error, r.coordinates_checked, r.analytic, r.numeric, set.name(free[r.worst_param])};

    G g;
    std::vector<V> vars;
    for (std::size_t i = 0; i < set.size(); ++i) vars.push_back(g.parameter(set.at(i)));
    g.backward(full(g, vars));
    for (std::size_t i = 0; i < set.size(); ++i)
        if (softmax_invariant(set.name(i))) c.invariant_grad = std::max(c.invariant_grad, g.grad(vars[i]).cwiseAbs().maxCoeff());
    return c;
}

inline std::vector<GradCase> run_gradcheck_suite(int seeds_per_op = 6) {
    struct Op {
        std::string name;
        std::function<std::vector<Mat<double>>(std::mt19937_64 &)> params;
        ad::LossBuilder<double> loss;
    };
    auto shapes = [](std::vector<std::pair<int, int>> s) {
        return [s](std::mt19937_64 &rng) {
            std::vector<Mat<double>> out;
            for (auto [r, c] : s) out.push_back(oracle::random_matrix(r, c, rng));
            return out;
        };
    };

    std::vector<Op> ops;
    ops.push_back({"matmul", shapes({{3, 4}, {4, 5}}), [](G &g, std::span<const V> p) { return project(g, ad::matmul(p[0], p[1]), 1); }});
    ops.push_back({"add", shapes({{3, 4}, {3, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::add(p[0], p[1]), 2); }});
    ops.push_back({"sub", shapes({{3, 4}, {3, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::sub(p[0], p[1]), 3); }});
    ops.push_back({"mul", shapes({{3, 4}, {3, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::mul(p[0], p[1]), 4); }});
    ops.push_back({"scale", shapes({{3, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::scale(p[0], -1.7), 5); }});
    ops.push_back({"add_bias", shapes({{3, 4}, {1, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::add_bias(p[0], p[1]), 6); }});
    ops.push_back({"transpose", shapes({{3, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::transpose(p[0]), 7); }});
    ops.push_back({"softmax_rows", shapes({{3, 5}}), [](G &g, std::span<const V> p) { return project(g, ad::softmax_rows(p[0]), 8); }});
    ops.push_back({"layer_norm", shapes({{3, 6}, {1, 6}, {1, 6}}),
                   [](G &g, std::span<const V> p) { return project(g, ad::layer_norm(p[0], p[1], p[2]), 9); }});
    ops.push_back({"gelu", shapes({{3, 4}}), [](G &g, std::span<const V> p) { return project(g, ad::gelu(p[0]), 10); }});
    ops.push_back({"mean_rows", shapes({{4, 3}}), [](G &g, std::span<const V> p) { return project(g, ad::mean_rows(p[0]), 11); }});
    ops.push_back({"sum", shapes({{3, 4}}), [](G &, std::span<const V> p) { return ad::sum(ad::mul(p[0], p[0])); }});
    ops.push_back({"concat_cols", shapes({{3, 2}, {3, 3}}),
                   [](G &g, std::span<const V> p) { return project(g, ad::concat_cols<double>({p[0], p[1]}), 12); }});
    ops.push_back({"slice_cols", shapes({{3, 6}}), [](G &g, std::span<const V> p) { return project(g, ad::slice_cols(p[0], 1, 3), 13); }});
    ops.push_back({"slice_rows", shapes({{5, 3}}), [](G &g, std::span<const V> p) { return project(g, ad::slice_rows(p[0], 2, 2), 14); }});
    ops.push_back({"softmax_cross_entropy", shapes({{4, 5}}), [](G &, std::span<const V> p) {
                       static const int labels[4] = {0, 3, 1, 4};
                       return ad::softmax_cross_entropy(p[0], std::span<const int>(labels, 4));
                   }});
    ops.push_back({"mse", shapes({{3, 4}, {3, 4}}), [](G &, std::span<const V> p) { return ad::mse(p[0], p[1]); }});
    ops.push_back({"attention", shapes({{3, 4}, {5, 4}, {5, 3}}),
                   [](G &g, std::span<const V> p) { return project(g, ad::attention(p[0], p[1], p[2]).output, 15); }});

    std::vector<GradCase> out;
    for (const auto &op : ops)
        for (int s = 0; s < seeds_per_op; ++s) {
            const std::uint64_t seed = 1000 + 17 * static_cast<std::uint64_t>(s);
            std::mt19937_64 rng(seed);
            const auto r = ad::finite_diff_check<double>(op.loss, op.params(rng), 1e-5, 0, seed);
            out.push_back({op.name, seed, r.max_rel_error, r.coordinates_checked, r.analytic, r.numeric, {}});
        }

    // Full models at reduced width: gradients with respect to every parameter.
    for (int s = 0; s < seeds_per_op; ++s) {
        const std::uint64_t seed = 2000 + 31 * static_cast<std::uint64_t>(s);
        std::mt19937_64 rng(seed);
        const auto dims = tiny_dims(false);
        const auto model = mmfuse::BasicFusionModel<double>::init(dims, seed);
        const Mat<double> vis = oracle::random_matrix(4, dims.visual_features, rng);
        const Mat<double> aud = oracle::random_matrix(4, dims.audio_features, rng);
        out.push_back(check_model("basic_fusion_model", seed, model.params(), [&](G &g, std::span<const V> p) {
            const mmfuse::BoundParameters<double> bound(model.params(), std::vector<V>(p.begin(), p.end()));
            const int label = 1;
            return ad::softmax_cross_entropy(model.forward(bound, g.constant(vis), g.constant(aud)), std::span<const int>(&label, 1));
        }));
    }
    for (int s = 0; s < seeds_per_op; ++s) {
        const std::uint64_t seed = 3000 + 37 * static_cast<std::uint64_t>(s);
        std::mt19937_64 rng(seed);
        const auto dims = tiny_dims(true);
        const auto model = mmfuse::AdvancedFusionModel<double>::init(dims, seed);
        const Mat<double> vis = oracle::random_matrix(5, dims.visual_features, rng);
        const Mat<double> aud = oracle::random_matrix(5, dims.audio_features, rng);
        const Mat<double> fused = oracle::random_matrix(1, dims.hidden, rng);
        out.push_back(check_model("advanced_fusion_model", seed, model.params(), [&](G &g, std::span<const V> p) {
            const mmfuse::BoundParameters<double> bound(model.params(), std::vector<V>(p.begin(), p.end()));
            const auto o = model.forward(bound, g.constant(vis), g.constant(aud), g.constant(fused));
            const int m = 0, e = 3;
            return ad::add(ad::softmax_cross_entropy(o.motion, std::span<const int>(&m, 1)),
                           ad::softmax_cross_entropy(o.event, std::span<const int>(&e, 1)));
        }));
    }
    return out;
}

} // namespace testing
