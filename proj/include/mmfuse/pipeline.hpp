#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/anomaly.hpp"
#include "mmfuse/config.hpp"
#include "mmfuse/detect_track.hpp"
#include "mmfuse/event_log.hpp"
#include "mmfuse/fusion.hpp"
#include "mmfuse/media_io.hpp"
#include "mmfuse/models.hpp"
#include "mmfuse/scenario.hpp"
#include "mmfuse/timebase.hpp"

namespace mmfuse {

/// Bounded multi-producer / multi-consumer queue. push never blocks: when
/// full, the oldest item is discarded and counted.
template <typename T>
class StageQueue {
public:
    explicit StageQueue(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw InvalidConfig("queue capacity must be >= 1");
    }

    /// Returns true when an older item was dropped to make room.
    bool push(T item) {
        bool dropped = false;
        {
            std::lock_guard lock(mu_);
            ++pushed_;
            if (items_.size() == capacity_) {
                items_.pop_front();
                ++dropped_;
                dropped = true;
            }
            items_.push_back(std::move(item));
            max_depth_ = std::max(max_depth_, items_.size());
        }
        cv_.notify_one();
        return dropped;
    }

    /// Blocks until an item arrives; empty once the queue is closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        ++popped_;
        return item;
    }

    std::optional<T> try_pop() {
        std::lock_guard lock(mu_);
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        ++popped_;
        return item;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t depth() const { std::lock_guard lock(mu_); return items_.size(); }
    std::size_t max_depth() const { std::lock_guard lock(mu_); return max_depth_; }
    std::size_t pushed() const { std::lock_guard lock(mu_); return pushed_; }
    std::size_t popped() const { std::lock_guard lock(mu_); return popped_; }
    std::size_t dropped() const { std::lock_guard lock(mu_); return dropped_; }

private:
    const std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<T> items_;
    bool closed_ = false;
    std::size_t pushed_ = 0, popped_ = 0, dropped_ = 0, max_depth_ = 0;
};

// --- stage payloads (immutable once queued) --------------------------------

struct BurstPayload {
    std::size_t burst_index = 0;
    std::size_t first_window = 0; // global index of frames[0]
    FrameBurst burst;
    AudioClip audio; // covers every aligned window of the burst
};

struct FeaturePayload {
    std::shared_ptr<const BurstPayload> source;
    std::vector<WaveletEnergy> wavelet;
    std::vector<FlowStats> flow;
    std::vector<AlignedWindow> windows;
    std::vector<SpectralStats> spectral;
    Eigen::VectorXd fused_audio; // ensemble embedding, advanced hidden width
};

struct DetectionPayload {
    std::shared_ptr<const FeaturePayload> features;
    std::vector<std::vector<Detection>> detections; // merged, per frame
    std::vector<std::vector<Track>> tracks;         // tracker state after each frame
};

struct FusionPayload {
    std::shared_ptr<const DetectionPayload> detection;
    Eigen::RowVectorXd motion_probs;       // advanced model, per burst
    Eigen::RowVectorXd basic_motion_probs; // basic model, per burst
    std::vector<Eigen::RowVectorXd> event_logits; // per window
};

struct AnomalyPayload {
    std::shared_ptr<const FusionPayload> fusion;
    std::vector<AnomalyReport> reports; // per window
};

template <typename T>
using Shared = std::shared_ptr<const T>;

// --- inputs ----------------------------------------------------------------

struct PipelineInput {
    std::filesystem::path dir;
    Manifest manifest;
    AudioClip audio;
    std::optional<Scenario> scenario; // from scenario.json when present
    DetectionScript script;           // empty without a scenario
};

/// Reads manifest.json, the WAV and scenario.json (optional) and checks that
/// every frame file exists. Throws IoError naming the first missing file.
PipelineInput open_input(const std::filesystem::path &dir);

std::size_t burst_count(const PipelineInput &input, int burst_frames);
/// Loads the frame images of one burst from disk.
BurstPayload load_burst(const PipelineInput &input, std::size_t burst_index, int burst_frames);

// --- stages ----------------------------------------------------------------

/// Per-stage state and processing functions. Each stage is owned by exactly
/// one worker; the run loop only moves payloads between them.
class Stages {
public:
    Stages(const Config &config, ModelBundle models, DetectionScript script);

    Shared<FeaturePayload> features(Shared<BurstPayload> in);
    Shared<DetectionPayload> detect_track(Shared<FeaturePayload> in);
    Shared<FusionPayload> fusion(Shared<DetectionPayload> in);
    Shared<AnomalyPayload> anomaly(Shared<FusionPayload> in);

    const ModelBundle &models() const { return models_; }
    const EventLabels &labels() const { return labels_; }

    /// Token matrices for one burst, normalised as the fusion stage sees them.
    std::pair<MatrixXdR, MatrixXdR> tokens(const DetectionPayload &d, bool advanced);

private:
    void ensure_normalizers(const DetectionPayload &d);

    Config config_;
    ModelBundle models_;
    DetectionScript script_;
    EventLabels labels_;
    std::array<EnsembleStub, 3> ensemble_;
    DenseFlow flow_;
    std::optional<Frame> previous_frame_; // features
    Tracker tracker_;                     // detect_track
    StatWindow stat_window_;              // anomaly
    AudioBaseline audio_baseline_;        // anomaly
    std::vector<Frame> ae_warmup_;        // anomaly
};

// --- run -------------------------------------------------------------------

struct LatencyStats {
    double p50_ms = 0, p95_ms = 0, max_ms = 0;
    std::size_t samples = 0;
};

/// Nearest-rank percentiles.
LatencyStats latency_stats(std::vector<double> samples_ms);

struct StageCounters {
    std::string name;
    std::size_t received = 0;
    std::size_t processed = 0;
    std::size_t dropped = 0;
    std::size_t max_depth = 0;
    LatencyStats latency;
};

struct RunResult {
    std::vector<EventRecord> records;
    std::vector<AnomalyReport> reports; // one per processed window
    std::vector<std::filesystem::path> artifacts;
    std::vector<StageCounters> stages;
    std::size_t bursts_ingested = 0;
    std::size_t windows_processed = 0;
    std::size_t anomalies_triggered = 0;

    nlohmann::json summary() const;
};

/// Runs the staged pipeline. When out_dir is non-empty, writes events.jsonl,
/// summary.json and artifacts/ there.
RunResult run_pipeline(const PipelineInput &input, const Config &config, const ModelBundle &models,
                       const std::filesystem::path &out_dir = {});

/// Loads models from config.runtime.model_dir when set, otherwise seeds them.
ModelBundle models_for(const Config &config);

// --- training ----------------------------------------------------------------

struct TrainOptions {
    int basic_steps = 200;
    int advanced_steps = 20;
    double learning_rate = 0.02;
    double momentum = 0.9;
};

struct TrainReport {
    double basic_loss_first = 0, basic_loss_last = 0;
    double advanced_loss_first = 0, advanced_loss_last = 0;
    double autoencoder_mse = 0;
    std::size_t sequences = 0;
};

/// Fits normalizers, both fusion models and the autoencoder on a scenario
/// directory with scenario.json ground truth.
TrainReport train_models(const PipelineInput &input, const Config &config, const TrainOptions &options, ModelBundle &models);

} // namespace mmfuse
