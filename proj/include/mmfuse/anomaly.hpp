#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/audio_dsp.hpp"
#include "mmfuse/tensor.hpp"
#include "mmfuse/timebase.hpp"

namespace mmfuse {

inline constexpr double kZCap = 6.0;

/// Bounded FIFO of scalar observations with population mean / std.
class RollingStats {
public:
    explicit RollingStats(std::size_t capacity = 30);

    void push(double x);
    std::size_t size() const { return values_.size(); }
    std::size_t capacity() const { return capacity_; }
    double mean() const;
    double stddev() const;

private:
    std::size_t capacity_;
    std::deque<double> values_;
};

/// min(|x - mean| / max(std, eps) / cap, 1); 0 while fewer than two values are held.
double clamped_z_score(double x, const RollingStats &history, double eps, double cap = kZCap);

/// Rolling history of per-frame intensity statistics.
struct StatWindow {
    RollingStats means;
    RollingStats stddevs;
    double epsilon = 0.5; // gray levels

    explicit StatWindow(std::size_t capacity = 30, double eps = 0.5) : means(capacity), stddevs(capacity), epsilon(eps) {}
};

/// Scores the frame's mean intensity against the history, then appends it.
double zscore_score(StatWindow &window, const Frame &frame);
double zscore_score(StatWindow &window, double frame_mean, double frame_std = 0.0);

// --- reconstruction ---------------------------------------------------------

inline constexpr int kAeInput = 64;
inline constexpr int kAeLatent = 16;

/// 8x8 block means scaled to [0, 1], row-major.
Eigen::RowVectorXd downsample_8x8(const Frame &frame);

struct DenseAutoencoder {
    ad::ParameterSet<double> params; // enc.w [64x16], enc.b, dec.w [16x64], dec.b
    double train_mse = 0.0;

    static DenseAutoencoder init(std::uint64_t seed);
    /// Rows of x are 64-vectors; returns reconstructions of the same shape.
    MatrixXdR reconstruct(const MatrixXdR &x) const;
    double mse_cap() const { return std::max(10.0 * train_mse, 1e-6); }
};

struct AutoencoderTraining {
    int steps = 2000;
    double learning_rate = 0.5;
    std::uint64_t seed = 7;
};

/// Full-batch gradient descent on mean squared reconstruction error.
/// Requires at least 32 frames. train_mse is the error after the last step.
DenseAutoencoder autoencoder_train(std::span<const Frame> frames, const AutoencoderTraining &cfg = {});

double autoencoder_score(const DenseAutoencoder &model, const Frame &frame);

// --- audio -----------------------------------------------------------------

struct AudioBaseline {
    RollingStats energy;
    RollingStats centroid;
    double energy_eps = 1e-5;
    double centroid_eps = 5.0; // Hz

    explicit AudioBaseline(std::size_t capacity = 30) : energy(capacity), centroid(capacity) {}
};

/// Larger of the energy and centroid z-scores (each clamped); appends both.
double audio_anomaly_score(const SpectralStats &stats, AudioBaseline &baseline);

// --- event -----------------------------------------------------------------

struct EventScore {
    double score = 0.0;
    std::vector<int> labels; // anomaly ids whose probability exceeds the threshold
};

EventScore event_anomaly_score(std::span<const double> logits, std::span<const int> anomaly_ids, double probability_threshold);

// --- combination -----------------------------------------------------------

enum Method : int { Statistical = 0, Reconstruction, Audio, Event };
inline constexpr int kMethods = 4;

using MethodScores = std::array<double, kMethods>;

struct AnomalyReport {
    MethodScores scores{};
    std::array<double, kMethods> weights{}; // normalised, sum to 1
    double combined = 0.0;
    double threshold = 0.5;
    bool triggered = false;
    std::vector<std::string> contributing_events;
    double timestamp = 0.0;
    std::size_t window = 0;

    /// Dominant method family: visual_burst, audio_burst or event_label.
    std::string type() const;
};

const char *method_name(int method);

/// Throws InvalidConfig when a weight is negative or all are zero.
AnomalyReport combine_scores(const MethodScores &scores, const std::array<double, kMethods> &weights, double threshold);

} // namespace mmfuse
