#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/anomaly.hpp"
#include "mmfuse/detect_track.hpp"
#include "mmfuse/fusion.hpp"
#include "mmfuse/vision_dsp.hpp"

namespace mmfuse {

struct DetectionConfig {
    double confidence_floor = kDefaultConfidenceFloor; // for visual tokens
    double nms_iou = kDefaultNmsIou;
    double cross_detector_iou = kDefaultNmsIou;
    DetectorNoise fast{1.0, 0.05, 0.05, 0.1, 0, 101, DetectorSource::Fast};
    DetectorNoise accurate{0.5, 0.02, 0.02, 0.0, 0, 202, DetectorSource::Accurate};
};

struct EventConfig {
    std::vector<std::string> labels = EventLabels::defaults().names;
    std::vector<std::string> anomaly_labels = {"smoke", "fire", "leak", "structural_damage"};
    double probability_threshold = 0.5;
    int class_offset = 100;    // detector classes >= offset name event labels
    double evidence_gain = 10; // logit boost per unit detection confidence

    EventLabels resolve() const;
};

struct AnomalyConfig {
    std::array<double, kMethods> weights{0.25, 0.25, 0.25, 0.25};
    double threshold = 0.5;
    double intensity_epsilon = 0.5;
    double energy_epsilon = 1e-5;
    double centroid_epsilon = 5.0;
    int history = 30;
    AutoencoderTraining autoencoder;
    int warmup_frames = 32;
};

struct RuntimeConfig {
    int burst_frames = 10;
    int queue_capacity = 16;
    bool deterministic = false; // capacities raised so nothing is dropped
    bool threaded = true;
    int analysis_delay_ms = 0; // artificial slowdown of the feature stage
    std::string model_dir;     // empty: seeded untrained models
};

struct Config {
    std::uint64_t seed = 1;
    NlmParams nlm;
    FlowParams flow;
    DetectionConfig detection;
    TrackerConfig tracker;
    FusionDims basic = FusionDims::basic();
    FusionDims advanced = FusionDims::advanced();
    std::uint64_t model_seed = 17;
    EventConfig events;
    AnomalyConfig anomaly;
    RuntimeConfig runtime;

    /// Throws InvalidConfig listing every problem found.
    void validate() const;
};

nlohmann::json to_json(const Config &c);
/// Missing keys keep their defaults; unknown keys and type errors are reported.
Config config_from_json(const nlohmann::json &j);
Config load_config(const std::filesystem::path &path);

} // namespace mmfuse
