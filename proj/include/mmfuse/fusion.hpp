#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/audio_dsp.hpp"
#include "mmfuse/detect_track.hpp"
#include "mmfuse/tensor.hpp"
#include "mmfuse/timebase.hpp"
#include "mmfuse/vision_dsp.hpp"

namespace mmfuse {

// --- tokens ----------------------------------------------------------------

struct VisualToken {
    double bbox_count = 0;
    double mean_confidence = 0;
    double wavelet_energy = 0;
    double flow_mean_magnitude = 0; // advanced tokens only
};

struct AudioToken {
    double zcr = 0;
    double centroid_hz = 0;
    double bandwidth_hz = 0;
    double rolloff_hz = 0;
    double energy = 0; // advanced tokens only
};

inline constexpr int kBasicVisualFeatures = 3;
inline constexpr int kBasicAudioFeatures = 4;
inline constexpr int kAdvancedVisualFeatures = 4;
inline constexpr int kAdvancedAudioFeatures = 5;

/// One token per frame. wavelet_energy is the detail-band energy (total minus
/// LL2). flow may be empty, in which case flow magnitude is 0.
std::vector<VisualToken> build_visual_tokens(const std::vector<std::vector<Detection>> &detections,
                                             std::span<const WaveletEnergy> wavelet,
                                             std::span<const FlowStats> flow = {});

std::vector<AudioToken> build_audio_tokens(std::span<const AlignedWindow> windows, int sample_rate);

/// Token rows as a [T x F] matrix; advanced adds flow / energy columns.
MatrixXdR visual_matrix(std::span<const VisualToken> tokens, bool advanced);
MatrixXdR audio_matrix(std::span<const AudioToken> tokens, bool advanced);

/// Per-column z-normalisation. Columns with (near) zero spread use std 1.
struct FeatureNormalizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd stddev;

    static FeatureNormalizer fit(const MatrixXdR &rows);
    static FeatureNormalizer identity(Eigen::Index features);
    MatrixXdR apply(const MatrixXdR &rows) const;

    nlohmann::json to_json() const;
    static FeatureNormalizer from_json(const nlohmann::json &j);
};

// --- audio ensemble ---------------------------------------------------------

inline constexpr int kEnsembleEmbedDim = 768;
inline constexpr int kEnsembleFusedDim = 256;

enum class EnsembleMember : std::uint8_t { GeneralAudio, Speech, AcousticScene };

/// Deterministic stand-in for a pretrained audio encoder: log-mel band mean
/// and spread (128 values) through a fixed random projection and tanh. Each
/// member uses its own projection seed.
class EnsembleStub {
public:
    explicit EnsembleStub(EnsembleMember member, int dim = kEnsembleEmbedDim);
    Eigen::VectorXd embed(const Eigen::VectorXd &samples, int sample_rate) const;

private:
    Eigen::MatrixXd projection_; // dim x 128
};

/// Linear projection of the three concatenated embeddings.
struct AudioEnsembleFusion {
    Eigen::MatrixXd weight; // out x (3 * in)
    Eigen::VectorXd bias;   // out

    static AudioEnsembleFusion init(std::uint64_t seed, int in_dim = kEnsembleEmbedDim, int out_dim = kEnsembleFusedDim);
    int in_dim() const { return static_cast<int>(weight.cols() / 3); }
    int out_dim() const { return static_cast<int>(weight.rows()); }
};

Eigen::VectorXd fuse_audio_ensemble(const AudioEnsembleFusion &layer, const Eigen::VectorXd &e1, const Eigen::VectorXd &e2,
                                    const Eigen::VectorXd &e3);

// 32-bit variant used on the latency path.
Eigen::VectorXf fuse_audio_ensemble(const Eigen::MatrixXf &weight, const Eigen::VectorXf &bias, const Eigen::VectorXf &e1,
                                    const Eigen::VectorXf &e2, const Eigen::VectorXf &e3);

// --- event labels ----------------------------------------------------------

inline constexpr int kEventClasses = 32;

struct EventLabels {
    std::vector<std::string> names; // exactly kEventClasses
    std::vector<int> anomaly_ids;

    static EventLabels defaults();
    int id_of(const std::string &name) const; // -1 if unknown
};

// --- models ----------------------------------------------------------------

struct FusionDims {
    int visual_features = kBasicVisualFeatures;
    int audio_features = kBasicAudioFeatures;
    int hidden = 128;
    int heads = 4;
    int layers = 2;
    int ffn = 512;
    int motion_classes = 2;
    int event_classes = 0;
    int max_len = 64;

    static FusionDims basic() { return {}; }
    static FusionDims advanced() {
        return {kAdvancedVisualFeatures, kAdvancedAudioFeatures, 256, 8, 4, 1024, 2, kEventClasses, 64};
    }
    void validate() const;
};

/// Per-layer attention weight matrices recorded during a forward pass.
template <typename Scalar>
struct AttentionTrace {
    std::vector<Mat<Scalar>> weights;
};

template <typename Scalar>
class BoundParameters {
public:
    BoundParameters(const ad::ParameterSet<Scalar> &params, ad::Graph<Scalar> &g) : params_(&params), vars_(params.bind(g)) {}
    /// Uses existing leaves, one per parameter in insertion order.
    BoundParameters(const ad::ParameterSet<Scalar> &params, std::vector<ad::Var<Scalar>> vars) : params_(&params), vars_(std::move(vars)) {
        if (vars_.size() != params.size()) throw InvalidInput("BoundParameters: leaf count does not match the parameter set");
    }
    ad::Var<Scalar> operator()(const std::string &name) const { return vars_[params_->index_of(name)]; }
    const std::vector<ad::Var<Scalar>> &vars() const { return vars_; }

private:
    const ad::ParameterSet<Scalar> *params_;
    std::vector<ad::Var<Scalar>> vars_;
};

namespace nn {

template <typename Scalar>
void add_linear(ad::ParameterSet<Scalar> &ps, const std::string &name, int in, int out, std::mt19937_64 &rng) {
    ps.add(name + ".w", ad::init_uniform<Scalar>(in, out, in, rng));
    ps.add(name + ".b", ad::init_uniform<Scalar>(1, out, in, rng));
}

template <typename Scalar>
void add_layer_norm(ad::ParameterSet<Scalar> &ps, const std::string &name, int dim) {
    ps.add(name + ".gamma", Mat<Scalar>::Ones(1, dim));
    ps.add(name + ".beta", Mat<Scalar>::Zero(1, dim));
}

template <typename Scalar>
void add_attention(ad::ParameterSet<Scalar> &ps, const std::string &name, int dim, std::mt19937_64 &rng) {
    for (const char *p : {".q", ".k", ".v", ".o"}) add_linear(ps, name + p, dim, dim, rng);
}

template <typename Scalar>
ad::Var<Scalar> linear(const BoundParameters<Scalar> &p, const std::string &name, ad::Var<Scalar> x) {
    return ad::add_bias(ad::matmul(x, p(name + ".w")), p(name + ".b"));
}

template <typename Scalar>
ad::Var<Scalar> layer_norm(const BoundParameters<Scalar> &p, const std::string &name, ad::Var<Scalar> x) {
    return ad::layer_norm(x, p(name + ".gamma"), p(name + ".beta"));
}

/// Multi-head attention with queries from xq and keys/values from xkv.
template <typename Scalar>
ad::Var<Scalar> multi_head_attention(const BoundParameters<Scalar> &p, const std::string &name, ad::Var<Scalar> xq,
                                     ad::Var<Scalar> xkv, int heads, AttentionTrace<Scalar> *trace) {
    const auto q = linear(p, name + ".q", xq);
    const auto k = linear(p, name + ".k", xkv);
    const auto v = linear(p, name + ".v", xkv);
    const Eigen::Index dh = q.cols() / heads;
    std::vector<ad::Var<Scalar>> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const auto r = ad::attention(ad::slice_cols(q, h * dh, dh), ad::slice_cols(k, h * dh, dh), ad::slice_cols(v, h * dh, dh));
        if (trace) trace->weights.push_back(r.weights.value());
        outs.push_back(r.output);
    }
    return linear(p, name + ".o", ad::concat_cols<Scalar>(std::span<const ad::Var<Scalar>>(outs)));
}

template <typename Scalar>
ad::Var<Scalar> feed_forward(const BoundParameters<Scalar> &p, const std::string &name, ad::Var<Scalar> x) {
    return linear(p, name + ".out", ad::gelu(linear(p, name + ".in", x)));
}

} // namespace nn

inline void check_token_inputs(const char *who, Eigen::Index tv, Eigen::Index ta, Eigen::Index fv, Eigen::Index fa,
                               const FusionDims &d) {
    if (tv == 0 || ta == 0) throw InvalidInput(std::string(who) + ": empty token sequence");
    if (tv != ta)
        throw InvalidInput(std::string(who) + ": visual has " + std::to_string(tv) + " tokens, audio has " + std::to_string(ta));
    if (fv != d.visual_features || fa != d.audio_features)
        throw InvalidInput(std::string(who) + ": expected " + std::to_string(d.visual_features) + "/" +
                           std::to_string(d.audio_features) + " features, got " + std::to_string(fv) + "/" + std::to_string(fa));
}

/// Visual and audio tokens projected to a shared width, summed, passed through
/// post-norm self-attention encoder layers, mean-pooled over time and mapped
/// to motion logits. No positional embedding.
template <typename Scalar>
class BasicFusionModel {
public:
    BasicFusionModel() = default;
    BasicFusionModel(FusionDims dims, ad::ParameterSet<Scalar> params) : dims_(dims), params_(std::move(params)) {}

    static BasicFusionModel init(FusionDims dims, std::uint64_t seed) {
        dims.validate();
        std::mt19937_64 rng(seed);
        ad::ParameterSet<Scalar> ps;
        nn::add_linear(ps, "visual_proj", dims.visual_features, dims.hidden, rng);
        nn::add_linear(ps, "audio_proj", dims.audio_features, dims.hidden, rng);
        for (int l = 0; l < dims.layers; ++l) {
            const std::string pre = "layers." + std::to_string(l);
            nn::add_attention(ps, pre + ".self_attn", dims.hidden, rng);
            nn::add_layer_norm(ps, pre + ".norm1", dims.hidden);
            nn::add_linear(ps, pre + ".ffn.in", dims.hidden, dims.ffn, rng);
            nn::add_linear(ps, pre + ".ffn.out", dims.ffn, dims.hidden, rng);
            nn::add_layer_norm(ps, pre + ".norm2", dims.hidden);
        }
        nn::add_linear(ps, "motion_head", dims.hidden, dims.motion_classes, rng);
        return {dims, std::move(ps)};
    }

    /// [1 x motion_classes] logits.
    ad::Var<Scalar> forward(const BoundParameters<Scalar> &p, ad::Var<Scalar> visual, ad::Var<Scalar> audio,
                            AttentionTrace<Scalar> *trace = nullptr) const {
        check_token_inputs("basic_fusion_forward", visual.rows(), audio.rows(), visual.cols(), audio.cols(), dims_);
        auto x = nn::linear(p, "visual_proj", visual) + nn::linear(p, "audio_proj", audio);
        for (int l = 0; l < dims_.layers; ++l) {
            const std::string pre = "layers." + std::to_string(l);
            x = nn::layer_norm(p, pre + ".norm1", x + nn::multi_head_attention(p, pre + ".self_attn", x, x, dims_.heads, trace));
            x = nn::layer_norm(p, pre + ".norm2", x + nn::feed_forward(p, pre + ".ffn", x));
        }
        return nn::linear(p, "motion_head", ad::mean_rows(x));
    }

    Mat<Scalar> logits(const Mat<Scalar> &visual, const Mat<Scalar> &audio, AttentionTrace<Scalar> *trace = nullptr) const {
        ad::Graph<Scalar> g;
        const BoundParameters<Scalar> p(params_, g);
        return forward(p, g.constant(visual), g.constant(audio), trace).value();
    }

    const FusionDims &dims() const { return dims_; }
    ad::ParameterSet<Scalar> &params() { return params_; }
    const ad::ParameterSet<Scalar> &params() const { return params_; }

private:
    FusionDims dims_;
    ad::ParameterSet<Scalar> params_;
};

template <typename Scalar>
struct AdvancedLogits {
    Mat<Scalar> motion; // [1 x motion_classes]
    Mat<Scalar> event;  // [1 x event_classes]
};

/// Bidirectional cross-modal encoder. Each layer updates both streams from
/// the previous layer's outputs: visual queries attend over audio and audio
/// queries over visual, each followed by residual + layer norm and a
/// per-stream feed-forward block. The fused ensemble embedding is added to
/// every audio token before the first layer. Pooled visual and audio means
/// are concatenated for the motion and event heads.
template <typename Scalar>
class AdvancedFusionModel {
public:
    AdvancedFusionModel() = default;
    AdvancedFusionModel(FusionDims dims, ad::ParameterSet<Scalar> params) : dims_(dims), params_(std::move(params)) {}

    static AdvancedFusionModel init(FusionDims dims, std::uint64_t seed) {
        dims.validate();
        if (dims.event_classes < 1) throw InvalidInput("advanced model needs event classes");
        std::mt19937_64 rng(seed);
        ad::ParameterSet<Scalar> ps;
        nn::add_linear(ps, "visual_proj", dims.visual_features, dims.hidden, rng);
        nn::add_linear(ps, "audio_proj", dims.audio_features, dims.hidden, rng);
        ps.add("visual_pos", ad::init_uniform<Scalar>(dims.max_len, dims.hidden, dims.hidden, rng));
        ps.add("audio_pos", ad::init_uniform<Scalar>(dims.max_len, dims.hidden, dims.hidden, rng));
        for (int l = 0; l < dims.layers; ++l) {
            const std::string pre = "layers." + std::to_string(l);
            nn::add_attention(ps, pre + ".v2a", dims.hidden, rng);
            nn::add_attention(ps, pre + ".a2v", dims.hidden, rng);
            nn::add_layer_norm(ps, pre + ".visual_norm1", dims.hidden);
            nn::add_layer_norm(ps, pre + ".audio_norm1", dims.hidden);
            nn::add_linear(ps, pre + ".visual_ffn.in", dims.hidden, dims.ffn, rng);
            nn::add_linear(ps, pre + ".visual_ffn.out", dims.ffn, dims.hidden, rng);
            nn::add_linear(ps, pre + ".audio_ffn.in", dims.hidden, dims.ffn, rng);
            nn::add_linear(ps, pre + ".audio_ffn.out", dims.ffn, dims.hidden, rng);
            nn::add_layer_norm(ps, pre + ".visual_norm2", dims.hidden);
            nn::add_layer_norm(ps, pre + ".audio_norm2", dims.hidden);
        }
        nn::add_linear(ps, "motion_head", 2 * dims.hidden, dims.motion_classes, rng);
        nn::add_linear(ps, "event_head", 2 * dims.hidden, dims.event_classes, rng);
        return {dims, std::move(ps)};
    }

    struct Outputs {
        ad::Var<Scalar> motion;
        ad::Var<Scalar> event;
    };

    /// fused: [1 x hidden] ensemble embedding.
    Outputs forward(const BoundParameters<Scalar> &p, ad::Var<Scalar> visual, ad::Var<Scalar> audio, ad::Var<Scalar> fused,
                    AttentionTrace<Scalar> *trace = nullptr) const {
        check_token_inputs("advanced_fusion_forward", visual.rows(), audio.rows(), visual.cols(), audio.cols(), dims_);
        const Eigen::Index t = visual.rows();
        if (t > dims_.max_len)
            throw InvalidInput("advanced_fusion_forward: " + std::to_string(t) + " tokens exceeds max_len " +
                               std::to_string(dims_.max_len));
        if (fused.rows() != 1 || fused.cols() != dims_.hidden)
            throw InvalidInput("advanced_fusion_forward: fused embedding must be " + ad::shape_str(1, dims_.hidden) + ", got " +
                               ad::shape_str(fused.rows(), fused.cols()));

        auto v = nn::linear(p, "visual_proj", visual) + ad::slice_rows(p("visual_pos"), 0, t);
        auto a = ad::add_bias(nn::linear(p, "audio_proj", audio) + ad::slice_rows(p("audio_pos"), 0, t), fused);
        for (int l = 0; l < dims_.layers; ++l) {
            const std::string pre = "layers." + std::to_string(l);
            const auto v_att = nn::multi_head_attention(p, pre + ".v2a", v, a, dims_.heads, trace);
            const auto a_att = nn::multi_head_attention(p, pre + ".a2v", a, v, dims_.heads, trace);
            v = nn::layer_norm(p, pre + ".visual_norm1", v + v_att);
            a = nn::layer_norm(p, pre + ".audio_norm1", a + a_att);
            v = nn::layer_norm(p, pre + ".visual_norm2", v + nn::feed_forward(p, pre + ".visual_ffn", v));
            a = nn::layer_norm(p, pre + ".audio_norm2", a + nn::feed_forward(p, pre + ".audio_ffn", a));
        }
        const auto pooled = ad::concat_cols<Scalar>({ad::mean_rows(v), ad::mean_rows(a)});
        return {nn::linear(p, "motion_head", pooled), nn::linear(p, "event_head", pooled)};
    }

    AdvancedLogits<Scalar> logits(const Mat<Scalar> &visual, const Mat<Scalar> &audio, const Mat<Scalar> &fused,
                                  AttentionTrace<Scalar> *trace = nullptr) const {
        ad::Graph<Scalar> g;
        const BoundParameters<Scalar> p(params_, g);
        const auto out = forward(p, g.constant(visual), g.constant(audio), g.constant(fused), trace);
        return {out.motion.value(), out.event.value()};
    }

    const FusionDims &dims() const { return dims_; }
    ad::ParameterSet<Scalar> &params() { return params_; }
    const ad::ParameterSet<Scalar> &params() const { return params_; }

private:
    FusionDims dims_;
    ad::ParameterSet<Scalar> params_;
};

// --- training --------------------------------------------------------------

template <typename Scalar>
struct LabeledSequence {
    Mat<Scalar> visual;
    Mat<Scalar> audio;
    Mat<Scalar> fused; // [1 x hidden]; advanced model only
    int motion = 0;
    int event = 0;
};

/// Gradient descent with optional heavy-ball momentum.
template <typename Scalar>
class GradientDescent {
public:
    explicit GradientDescent(Scalar learning_rate, Scalar momentum = Scalar(0)) : lr_(learning_rate), momentum_(momentum) {}

    void apply(ad::ParameterSet<Scalar> &params, const std::vector<Mat<Scalar>> &grads) {
        if (momentum_ == Scalar(0)) {
            for (std::size_t i = 0; i < params.size(); ++i) params.at(i) -= lr_ * grads[i];
            return;
        }
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            for (std::size_t i = 0; i < params.size(); ++i)
                velocity_.push_back(Mat<Scalar>::Zero(params.at(i).rows(), params.at(i).cols()));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity_[i] = momentum_ * velocity_[i] + grads[i];
            params.at(i) -= lr_ * velocity_[i];
        }
    }

    Scalar learning_rate() const { return lr_; }

private:
    Scalar lr_;
    Scalar momentum_;
    std::vector<Mat<Scalar>> velocity_;
};

namespace detail {

inline void check_labels(int motion, int event, int motion_classes, int event_classes) {
    if (motion < 0 || motion >= motion_classes) throw InvalidInput("train_step: motion label " + std::to_string(motion) + " out of range");
    if (event_classes > 0 && (event < 0 || event >= event_classes))
        throw InvalidInput("train_step: event label " + std::to_string(event) + " out of range");
}

template <typename Scalar>
std::vector<Mat<Scalar>> collect_grads(const ad::Graph<Scalar> &g, const BoundParameters<Scalar> &p) {
    std::vector<Mat<Scalar>> grads;
    grads.reserve(p.vars().size());
    for (const auto &v : p.vars()) grads.push_back(g.grad(v));
    return grads;
}

} // namespace detail

/// Mean motion cross-entropy over the batch.
template <typename Scalar>
ad::Var<Scalar> batch_loss(const BasicFusionModel<Scalar> &model, const BoundParameters<Scalar> &p,
                           std::span<const LabeledSequence<Scalar>> batch) {
    if (batch.empty()) throw InvalidInput("train_step: empty batch");
    ad::Graph<Scalar> &g = *p.vars().front().graph;
    std::optional<ad::Var<Scalar>> total;
    for (const auto &ex : batch) {
        detail::check_labels(ex.motion, 0, model.dims().motion_classes, 0);
        const int label = ex.motion;
        const auto l = ad::softmax_cross_entropy(model.forward(p, g.constant(ex.visual), g.constant(ex.audio)), std::span<const int>(&label, 1));
        total = total ? ad::add(*total, l) : l;
    }
    return ad::scale(*total, Scalar(1) / static_cast<Scalar>(batch.size()));
}

/// Mean of motion plus event cross-entropy over the batch.
template <typename Scalar>
ad::Var<Scalar> batch_loss(const AdvancedFusionModel<Scalar> &model, const BoundParameters<Scalar> &p,
                           std::span<const LabeledSequence<Scalar>> batch) {
    if (batch.empty()) throw InvalidInput("train_step: empty batch");
    ad::Graph<Scalar> &g = *p.vars().front().graph;
    std::optional<ad::Var<Scalar>> total;
    for (const auto &ex : batch) {
        detail::check_labels(ex.motion, ex.event, model.dims().motion_classes, model.dims().event_classes);
        const auto out = model.forward(p, g.constant(ex.visual), g.constant(ex.audio), g.constant(ex.fused));
        const int m = ex.motion, e = ex.event;
        const auto l = ad::add(ad::softmax_cross_entropy(out.motion, std::span<const int>(&m, 1)),
                               ad::softmax_cross_entropy(out.event, std::span<const int>(&e, 1)));
        total = total ? ad::add(*total, l) : l;
    }
    return ad::scale(*total, Scalar(1) / static_cast<Scalar>(batch.size()));
}

/// One optimiser update on the batch; returns the loss before the update.
template <typename Model, typename Scalar>
Scalar train_step(Model &model, std::span<const LabeledSequence<Scalar>> batch, GradientDescent<Scalar> &opt) {
    ad::Graph<Scalar> g;
    const BoundParameters<Scalar> p(model.params(), g);
    const auto loss = batch_loss(model, p, batch);
    g.backward(loss);
    const Scalar value = loss.value()(0, 0);
    if (!std::isfinite(static_cast<double>(value))) throw Error("train_step: loss is not finite");
    opt.apply(model.params(), detail::collect_grads(g, p));
    return value;
}

template <typename Model, typename Scalar>
Scalar train_step(Model &model, std::span<const LabeledSequence<Scalar>> batch, Scalar learning_rate) {
    GradientDescent<Scalar> opt(learning_rate);
    return train_step(model, batch, opt);
}

template <typename Scalar>
int argmax(const Mat<Scalar> &row) {
    Eigen::Index idx = 0;
    row.row(0).maxCoeff(&idx);
    return static_cast<int>(idx);
}

} // namespace mmfuse
