#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mmfuse {

struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    bool valid() const { return x1 < x2 && y1 < y2; }
    BBox clamped(double frame_width, double frame_height) const;

    friend bool operator==(const BBox &, const BBox &) = default;
};

enum class DetectorSource : std::uint8_t { Fast, Accurate };

struct Detection {
    BBox bbox;
    double confidence = 0.0;
    int class_id = 0;
    DetectorSource source = DetectorSource::Fast;

    friend bool operator==(const Detection &, const Detection &) = default;
};

double iou(const BBox &a, const BBox &b);

inline constexpr double kDefaultConfidenceFloor = 0.3;
inline constexpr double kDefaultNmsIou = 0.5;

std::vector<Detection> filter_confidence(std::span<const Detection> dets, double floor);

/// Greedy class-aware suppression in descending confidence order. Ties keep
/// input order. Survivors keep their relative confidence order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold = kDefaultNmsIou);

/// Union of two NMS-clean lists where same-class pairs with IoU >= threshold
/// keep only the higher-confidence box; on equal confidence the accurate
/// detector wins.
std::vector<Detection> cross_detector_merge(std::span<const Detection> fast, std::span<const Detection> accurate,
                                            double iou_threshold = kDefaultNmsIou);

// --- scripted detector -----------------------------------------------------

struct ScriptedObject {
    int object_id = 0;
    int class_id = 0;
    BBox bbox;
    double confidence = 0.9;
};

struct DetectionScript {
    std::vector<std::vector<ScriptedObject>> frames; // ground truth per frame
    double frame_width = 0;  // 0 disables clamping and false positives
    double frame_height = 0;
};

struct DetectorNoise {
    double jitter_px = 0.0;      // gaussian sigma on each box edge
    double confidence_sigma = 0.0;
    double drop_probability = 0.0;
    double false_positive_rate = 0.0; // probability of one spurious box per frame
    int false_positive_class = 0;
    std::uint64_t seed = 0;
    DetectorSource source = DetectorSource::Fast;
};

/// Deterministic for a given (seed, frame_index, source): each call reseeds.
std::vector<Detection> scripted_detector(std::size_t frame_index, const DetectionScript &script,
                                         const DetectorNoise &noise);

// --- tracking --------------------------------------------------------------

enum class TrackState : std::uint8_t { Tentative, Active, Lost };

struct Track {
    int track_id = 0;
    BBox bbox;
    int class_id = 0;
    int age = 0;    // frames since creation
    int misses = 0; // consecutive unmatched frames
    int hits = 0;   // consecutive matched frames
    TrackState state = TrackState::Tentative;
    double confidence = 0.0;
};

struct TrackerConfig {
    double high_threshold = 0.5;
    double low_threshold = 0.1;
    double match_iou = 0.2;
    int max_misses = 3;
    int confirm_hits = 2;
};

/// Two-stage association: high-confidence detections first against every
/// live track, then low-confidence ones against the remaining non-lost
/// tracks. Matching is greedy on IoU and class-aware.
class Tracker {
public:
    explicit Tracker(TrackerConfig config = {}) : config_(config) {}

    const std::vector<Track> &step(std::span<const Detection> dets);

    const std::vector<Track> &tracks() const { return tracks_; }
    const TrackerConfig &config() const { return config_; }
    int next_id() const { return next_id_; }

private:
    TrackerConfig config_;
    std::vector<Track> tracks_;
    int next_id_ = 1;
};

/// Functional form over explicit state; next_id is advanced for spawned tracks.
std::vector<Track> tracker_step(std::vector<Track> tracks, std::span<const Detection> dets,
                                const TrackerConfig &config, int &next_id);

} // namespace mmfuse
