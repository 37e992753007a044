#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/detect_track.hpp"
#include "mmfuse/media_io.hpp"
#include "mmfuse/timebase.hpp"

namespace mmfuse {

/// Filled rectangle moving linearly, or along an explicit per-frame path.
struct ObjectScript {
    int id = 0;
    int class_id = 0;
    double x = 0, y = 0, w = 16, h = 16; // position at frame 0 (top-left)
    double vx = 0, vy = 0;               // px / frame
    std::vector<std::array<double, 2>> path; // overrides x/y/vx/vy when non-empty
    double intensity = 200;
    double confidence = 0.9;
    int first_frame = 0;
    int last_frame = -1; // -1: until the end

    bool visible(int frame) const { return frame >= first_frame && (last_frame < 0 || frame <= last_frame); }
    BBox box_at(int frame) const;
};

struct AudioSegment {
    double start_s = 0;
    double duration_s = 0;
    std::string kind = "tone"; // tone | noise
    double frequency_hz = 440;
    double amplitude = 0.2;
};

enum class InjectionType { VisualBurst, AudioBurst, EventLabel };

const char *injection_name(InjectionType t);

/// Anomaly injected over an inclusive range of window (frame) indices.
struct Injection {
    InjectionType type = InjectionType::VisualBurst;
    int first_window = 0;
    int last_window = 0;
    std::string label = "fire"; // event_label only
    double magnitude = 0;       // 0 selects the per-type default
};

inline constexpr int kEventClassOffset = 100;

struct Scenario {
    double duration_s = 2.0;
    double fps = 5.0;
    int sample_rate = 16000;
    int width = 160;
    int height = 120;
    int burst_frames = 10;
    std::uint64_t seed = 1;
    double background = 80;
    double texture_amplitude = 0;
    double pixel_noise = 0;
    double audio_noise = 0;
    std::vector<ObjectScript> objects;
    std::vector<AudioSegment> audio;
    std::vector<Injection> anomalies;

    int frame_count() const;
    std::size_t sample_count() const;
    /// Throws InvalidConfig listing every problem.
    void validate() const;
    /// True when window w lies inside any injection range.
    bool injected(int window) const;
    /// Ground-truth boxes per frame, with event-label injections as objects
    /// of class kEventClassOffset + label id.
    DetectionScript detection_script() const;
    /// 1 when any object moves between this frame and the previous one.
    int motion_label(int frame) const;
    /// Event label id active at a frame (0 = background).
    int event_label(int frame) const;
};

nlohmann::json to_json(const Scenario &s);
Scenario scenario_from_json(const nlohmann::json &j);
Scenario load_scenario(const std::filesystem::path &path);

/// 2 s, 5 fps (10 frames), one moving object over a steady tone.
Scenario canonical_scenario(std::uint64_t seed = 7);
/// Longer scenario with three moving objects and all three injection types.
Scenario injection_scenario(std::uint64_t seed = 11);

struct RenderedScenario {
    std::vector<Frame> frames;
    Eigen::VectorXd audio; // quantised to the 16-bit grid
    Manifest manifest;
};

RenderedScenario render_scenario(const Scenario &s);

/// Writes frames/frame_NNNN.pgm, audio.wav, manifest.json and scenario.json.
void write_scenario_dir(const std::filesystem::path &dir, const Scenario &s);

} // namespace mmfuse
