#include "mmfuse/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmfuse/error.hpp"
#include "mmfuse/vision_dsp.hpp"

namespace mmfuse {

RollingStats::RollingStats(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 2) throw InvalidConfig("rolling history capacity must be >= 2");
}

void RollingStats::push(double x) {
    values_.push_back(x);
    if (values_.size() > capacity_) values_.pop_front();
}

double RollingStats::mean() const {
    if (values_.empty()) return 0.0;
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double RollingStats::stddev() const {
    if (values_.size() < 2) return 0.0;
    const double m = mean();
    double acc = 0.0;
    for (double v : values_) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values_.size()));
}

double clamped_z_score(double x, const RollingStats &history, double eps, double cap) {
    if (history.size() < 2 || !std::isfinite(x)) return 0.0;
    const double z = std::abs(x - history.mean()) / std::max(history.stddev(), eps);
    return std::min(z / cap, 1.0);
}

double zscore_score(StatWindow &window, double frame_mean, double frame_std) {
    const double score = clamped_z_score(frame_mean, window.means, window.epsilon);
    window.means.push(frame_mean);
    window.stddevs.push(frame_std);
    return score;
}

double zscore_score(StatWindow &window, const Frame &frame) {
    const Image img = to_image(frame);
    const double m = img.mean();
    const double s = std::sqrt((img - m).square().mean());
    return zscore_score(window, m, s);
}

Eigen::RowVectorXd downsample_8x8(const Frame &frame) {
    const int rows = frame.height(), cols = frame.width();
    if (rows < 8 || cols < 8) throw InvalidInput("downsample_8x8: frame must be at least 8x8");
    Eigen::RowVectorXd out(kAeInput);
    for (int by = 0; by < 8; ++by) {
        const int r0 = by * rows / 8, r1 = (by + 1) * rows / 8;
        for (int bx = 0; bx < 8; ++bx) {
            const int c0 = bx * cols / 8, c1 = (bx + 1) * cols / 8;
            out[by * 8 + bx] = frame.pixels.block(r0, c0, r1 - r0, c1 - c0).cast<double>().mean() / 255.0;
        }
    }
    return out;
}

DenseAutoencoder DenseAutoencoder::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DenseAutoencoder ae;
    ae.params.add("enc.w", ad::init_uniform<double>(kAeInput, kAeLatent, kAeInput, rng));
    ae.params.add("enc.b", ad::init_uniform<double>(1, kAeLatent, kAeInput, rng));
    ae.params.add("dec.w", ad::init_uniform<double>(kAeLatent, kAeInput, kAeLatent, rng));
    ae.params.add("dec.b", ad::init_uniform<double>(1, kAeInput, kAeLatent, rng));
    return ae;
}

namespace {

ad::Var<double> ae_forward(const std::vector<ad::Var<double>> &p, ad::Var<double> x) {
    const auto h = ad::gelu(ad::add_bias(ad::matmul(x, p[0]), p[1]));
    return ad::add_bias(ad::matmul(h, p[2]), p[3]);
}

} // namespace

MatrixXdR DenseAutoencoder::reconstruct(const MatrixXdR &x) const {
    if (x.cols() != kAeInput) throw InvalidInput("DenseAutoencoder: expected 64 inputs per row");
    ad::Graph<double> g;
    const auto p = params.bind(g);
    return ae_forward(p, g.constant(x)).value();
}

DenseAutoencoder autoencoder_train(std::span<const Frame> frames, const AutoencoderTraining &cfg) {
    if (frames.size() < 32)
        throw InvalidInput("autoencoder_train: need at least 32 frames, got " + std::to_string(frames.size()));
    MatrixXdR x(static_cast<Eigen::Index>(frames.size()), kAeInput);
    for (std::size_t i = 0; i < frames.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = downsample_8x8(frames[i]);

    DenseAutoencoder ae = DenseAutoencoder::init(cfg.seed);
    for (int step = 0; step < cfg.steps; ++step) {
        ad::Graph<double> g;
        const auto p = ae.params.bind(g);
        const auto input = g.constant(x);
        const auto loss = ad::mse(ae_forward(p, input), input);
        g.backward(loss);
        for (std::size_t i = 0; i < p.size(); ++i) ae.params.at(i) -= cfg.learning_rate * g.grad(p[i]);
    }
    ae.train_mse = (ae.reconstruct(x) - x).array().square().mean();
    return ae;
}

double autoencoder_score(const DenseAutoencoder &model, const Frame &frame) {
    const MatrixXdR x = downsample_8x8(frame);
    const double err = (model.reconstruct(x) - x).array().square().mean();
    if (!std::isfinite(err)) return 1.0;
    return std::min(err / model.mse_cap(), 1.0);
}

double audio_anomaly_score(const SpectralStats &stats, AudioBaseline &baseline) {
    const double e = clamped_z_score(stats.energy, baseline.energy, baseline.energy_eps);
    const double c = clamped_z_score(stats.centroid_hz, baseline.centroid, baseline.centroid_eps);
    baseline.energy.push(stats.energy);
    baseline.centroid.push(stats.centroid_hz);
    return std::max(e, c);
}

EventScore event_anomaly_score(std::span<const double> logits, std::span<const int> anomaly_ids, double probability_threshold) {
    EventScore out;
    if (anomaly_ids.empty() || logits.empty()) return out;
    for (int id : anomaly_ids)
        if (id < 0 || id >= static_cast<int>(logits.size()))
            throw InvalidInput("event_anomaly_score: anomaly label id " + std::to_string(id) + " out of range");

    const Eigen::Map<const Eigen::RowVectorXd> z(logits.data(), static_cast<Eigen::Index>(logits.size()));
    const double m = z.maxCoeff();
    const Eigen::RowVectorXd e = (z.array() - m).exp();
    const Eigen::RowVectorXd p = e / e.sum();
    for (int id : anomaly_ids) {
        out.score = std::max(out.score, p[id]);
        if (p[id] > probability_threshold) out.labels.push_back(id);
    }
    out.score = std::clamp(out.score, 0.0, 1.0);
    return out;
}

const char *method_name(int method) {
    switch (method) {
    case Statistical: return "statistical";
    case Reconstruction: return "reconstruction";
    case Audio: return "audio";
    case Event: return "event";
    }
    return "unknown";
}

std::string AnomalyReport::type() const {
    int best = 0;
    for (int m = 1; m < kMethods; ++m)
        if (weights[m] * scores[m] > weights[best] * scores[best]) best = m;
    switch (best) {
    case Audio: return "audio_burst";
    case Event: return "event_label";
    default: return "visual_burst";
    }
}

AnomalyReport combine_scores(const MethodScores &scores, const std::array<double, kMethods> &weights, double threshold) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidConfig("anomaly weights must be finite and non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidConfig("at least one anomaly weight must be positive");

    AnomalyReport r;
    r.threshold = threshold;
    for (int m = 0; m < kMethods; ++m) {
        r.scores[m] = std::isfinite(scores[m]) ? std::clamp(scores[m], 0.0, 1.0) : 1.0;
        r.weights[m] = weights[m] / total;
        r.combined += r.weights[m] * r.scores[m];
    }
    r.combined = std::clamp(r.combined, 0.0, 1.0);
    r.triggered = r.combined >= threshold;
    return r;
}

} // namespace mmfuse
