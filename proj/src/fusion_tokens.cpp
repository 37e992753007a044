#include "mmfuse/fusion.hpp"

#include <cmath>
#include <random>

namespace mmfuse {

std::vector<VisualToken> build_visual_tokens(const std::vector<std::vector<Detection>> &detections,
                                             std::span<const WaveletEnergy> wavelet, std::span<const FlowStats> flow) {
    if (detections.size() != wavelet.size())
        throw InvalidInput("build_visual_tokens: " + std::to_string(detections.size()) + " detection lists vs " +
                           std::to_string(wavelet.size()) + " wavelet energies");
    if (!flow.empty() && flow.size() != wavelet.size())
        throw InvalidInput("build_visual_tokens: flow stats length " + std::to_string(flow.size()) + " != " +
                           std::to_string(wavelet.size()));

    std::vector<VisualToken> out(wavelet.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto &tok = out[i];
        tok.bbox_count = static_cast<double>(detections[i].size());
        if (!detections[i].empty()) {
            double s = 0.0;
            for (const auto &d : detections[i]) s += d.confidence;
            tok.mean_confidence = s / static_cast<double>(detections[i].size());
        }
        tok.wavelet_energy = std::max(0.0, wavelet[i].detail());
        if (!flow.empty()) tok.flow_mean_magnitude = flow[i].mean_magnitude;
    }
    return out;
}

std::vector<AudioToken> build_audio_tokens(std::span<const AlignedWindow> windows, int sample_rate) {
    if (windows.empty()) throw InvalidInput("build_audio_tokens: no windows");
    std::vector<AudioToken> out;
    out.reserve(windows.size());
    for (const auto &w : windows) {
        const auto st = spectral_stats(w.samples, sample_rate);
        out.push_back({st.zcr, st.centroid_hz, st.bandwidth_hz, st.rolloff_hz, st.energy});
    }
    return out;
}

MatrixXdR visual_matrix(std::span<const VisualToken> tokens, bool advanced) {
    MatrixXdR m(static_cast<Eigen::Index>(tokens.size()), advanced ? kAdvancedVisualFeatures : kBasicVisualFeatures);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto &t = tokens[static_cast<std::size_t>(i)];
        m(i, 0) = t.bbox_count;
        m(i, 1) = t.mean_confidence;
        m(i, 2) = t.wavelet_energy;
        if (advanced) m(i, 3) = t.flow_mean_magnitude;
    }
    return m;
}

MatrixXdR audio_matrix(std::span<const AudioToken> tokens, bool advanced) {
    MatrixXdR m(static_cast<Eigen::Index>(tokens.size()), advanced ? kAdvancedAudioFeatures : kBasicAudioFeatures);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto &t = tokens[static_cast<std::size_t>(i)];
        m(i, 0) = t.zcr;
        m(i, 1) = t.centroid_hz;
        m(i, 2) = t.bandwidth_hz;
        m(i, 3) = t.rolloff_hz;
        if (advanced) m(i, 4) = t.energy;
    }
    return m;
}

FeatureNormalizer FeatureNormalizer::fit(const MatrixXdR &rows) {
    if (rows.rows() == 0) throw InvalidInput("FeatureNormalizer::fit: no rows");
    FeatureNormalizer n;
    n.mean = rows.colwise().mean();
    n.stddev = ((rows.rowwise() - n.mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index c = 0; c < n.stddev.size(); ++c) {
        const double scale = std::max(1.0, std::abs(n.mean[c]));
        if (!(n.stddev[c] > 1e-9 * scale)) n.stddev[c] = 1.0;
    }
    return n;
}

FeatureNormalizer FeatureNormalizer::identity(Eigen::Index features) {
    return {Eigen::RowVectorXd::Zero(features), Eigen::RowVectorXd::Ones(features)};
}

MatrixXdR FeatureNormalizer::apply(const MatrixXdR &rows) const {
    if (rows.cols() != mean.size()) throw InvalidInput("FeatureNormalizer::apply: feature count mismatch");
    return (rows.rowwise() - mean).array().rowwise() / stddev.array();
}

nlohmann::json FeatureNormalizer::to_json() const {
    return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
            {"stddev", std::vector<double>(stddev.data(), stddev.data() + stddev.size())}};
}

FeatureNormalizer FeatureNormalizer::from_json(const nlohmann::json &j) {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("stddev").get<std::vector<double>>();
    if (m.size() != s.size()) throw InvalidInput("FeatureNormalizer: mean/stddev length mismatch");
    FeatureNormalizer n;
    n.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    n.stddev = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return n;
}

namespace {

constexpr int kStubFeatures = 2 * kMelBands;

std::uint64_t member_seed(EnsembleMember m) {
    switch (m) {
    case EnsembleMember::GeneralAudio: return 0xA57ULL;
    case EnsembleMember::Speech: return 0x3A7E2ULL;
    case EnsembleMember::AcousticScene: return 0x4B3E7ULL;
    }
    return 0;
}

} // namespace

EnsembleStub::EnsembleStub(EnsembleMember member, int dim) {
    std::mt19937_64 rng(member_seed(member));
    projection_ = ad::init_uniform<double>(dim, kStubFeatures, kStubFeatures, rng).eval();
}

Eigen::VectorXd EnsembleStub::embed(const Eigen::VectorXd &samples, int sample_rate) const {
    constexpr int window = 1024, hop = 512;
    Eigen::VectorXd features = Eigen::VectorXd::Zero(kStubFeatures);
    if (samples.size() >= window) {
        const auto mel = mel_spectrogram(stft(samples, window, hop, sample_rate));
        const Eigen::MatrixXd logmel = mel.bands.array().log1p();
        const Eigen::RowVectorXd mean = logmel.colwise().mean();
        const Eigen::RowVectorXd spread = ((logmel.rowwise() - mean).array().square().colwise().mean()).sqrt();
        features.head(kMelBands) = mean.transpose();
        features.tail(kMelBands) = spread.transpose();
    }
    return (projection_ * features).array().tanh();
}

AudioEnsembleFusion AudioEnsembleFusion::init(std::uint64_t seed, int in_dim, int out_dim) {
    std::mt19937_64 rng(seed);
    AudioEnsembleFusion f;
    f.weight = ad::init_uniform<double>(out_dim, 3 * in_dim, 3 * in_dim, rng);
    f.bias = ad::init_uniform<double>(out_dim, 1, 3 * in_dim, rng);
    return f;
}

Eigen::VectorXd fuse_audio_ensemble(const AudioEnsembleFusion &layer, const Eigen::VectorXd &e1, const Eigen::VectorXd &e2,
                                    const Eigen::VectorXd &e3) {
    const int in = layer.in_dim();
    for (const auto *e : {&e1, &e2, &e3})
        if (e->size() != in)
            throw InvalidInput("fuse_audio_ensemble: embedding has " + std::to_string(e->size()) + " values, expected " +
                               std::to_string(in));
    Eigen::VectorXd cat(3 * in);
    cat << e1, e2, e3;
    return layer.weight * cat + layer.bias;
}

Eigen::VectorXf fuse_audio_ensemble(const Eigen::MatrixXf &weight, const Eigen::VectorXf &bias, const Eigen::VectorXf &e1,
                                    const Eigen::VectorXf &e2, const Eigen::VectorXf &e3) {
    const Eigen::Index in = weight.cols() / 3;
    if (e1.size() != in || e2.size() != in || e3.size() != in) throw InvalidInput("fuse_audio_ensemble: embedding length mismatch");
    Eigen::VectorXf cat(3 * in);
    cat << e1, e2, e3;
    return weight * cat + bias;
}

EventLabels EventLabels::defaults() {
    EventLabels l;
    l.names = {"background", "speech",         "footsteps",      "door",      "machine_operation",
               "tool_usage", "alarm",          "smoke",          "fire",      "leak",
               "structural_damage"};
    for (int i = static_cast<int>(l.names.size()); i < kEventClasses; ++i) l.names.push_back("event_" + std::to_string(i));
    l.anomaly_ids = {l.id_of("smoke"), l.id_of("fire"), l.id_of("leak"), l.id_of("structural_damage")};
    return l;
}

int EventLabels::id_of(const std::string &name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

void FusionDims::validate() const {
    std::vector<std::string> problems;
    if (visual_features < 1 || audio_features < 1) problems.push_back("feature counts must be >= 1");
    if (hidden < 1 || heads < 1) problems.push_back("hidden and heads must be >= 1");
    else if (hidden % heads != 0) problems.push_back("hidden (" + std::to_string(hidden) + ") must be divisible by heads (" + std::to_string(heads) + ")");
    if (layers < 0 || ffn < 1) problems.push_back("layers must be >= 0 and ffn >= 1");
    if (motion_classes < 1) problems.push_back("motion_classes must be >= 1");
    if (max_len < 1) problems.push_back("max_len must be >= 1");
    if (!problems.empty()) throw InvalidConfig(problems);
}

} // namespace mmfuse
