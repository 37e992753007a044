#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mmfuse/types.hpp"

namespace mmfuse {

/// A single grayscale frame with its capture time in seconds since capture start.
struct Frame {
    PixelGrid pixels; // rows = height, cols = width
    double timestamp = 0.0;

    int width() const { return static_cast<int>(pixels.cols()); }
    int height() const { return static_cast<int>(pixels.rows()); }
};

struct FrameBurst {
    std::vector<Frame> frames;
    double nominal_fps = 20.0;
};

struct AudioClip {
    Eigen::VectorXd samples; // in [-1, 1]
    int sample_rate = 16000;
    double start_time = 0.0;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Audio slice centered on one frame's timestamp. Every window produced by a
/// single alignment has the same length.
struct AlignedWindow {
    std::size_t frame_index = 0;
    Eigen::VectorXd samples;
    std::size_t pad_left = 0;
    std::size_t pad_right = 0;
};

enum class ViolationKind { Empty, NonPositiveFps, NonFiniteTimestamp, NonMonotoneTimestamp, DimensionMismatch };

struct Violation {
    ViolationKind kind;
    std::size_t frame_index;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::size_t count(ViolationKind kind) const;
};

ValidationReport validate_burst(const FrameBurst &burst);

/// Cuts one window of floor(clip / frames) samples per frame, centered at the
/// sample nearest to the frame timestamp; samples outside the clip read as 0.
/// Throws InvalidInput on empty inputs and AlignmentFailure when a frame lies
/// more than one window length outside the clip.
std::vector<AlignedWindow> align_audio_to_frames(const FrameBurst &burst, const AudioClip &clip);

} // namespace mmfuse
