#include "mmfuse/timebase.hpp"

#include <algorithm>
#include <cmath>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::size_t ValidationReport::count(ViolationKind kind) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [kind](const Violation &v) { return v.kind == kind; }));
}

ValidationReport validate_burst(const FrameBurst &burst) {
    ValidationReport report;
    auto add = [&](ViolationKind kind, std::size_t index, std::string msg) {
        report.violations.push_back({kind, index, std::move(msg)});
    };

    if (!(burst.nominal_fps > 0.0) || !std::isfinite(burst.nominal_fps))
        add(ViolationKind::NonPositiveFps, 0, "nominal_fps must be positive and finite");
    if (burst.frames.empty()) {
        add(ViolationKind::Empty, 0, "burst has no frames");
        return report;
    }

    const auto &first = burst.frames.front();
    for (std::size_t i = 0; i < burst.frames.size(); ++i) {
        const auto &f = burst.frames[i];
        if (!std::isfinite(f.timestamp) || f.timestamp < 0.0)
            add(ViolationKind::NonFiniteTimestamp, i, "frame " + std::to_string(i) + " has an invalid timestamp");
        if (i > 0 && !(f.timestamp > burst.frames[i - 1].timestamp))
            add(ViolationKind::NonMonotoneTimestamp, i,
                "frame " + std::to_string(i) + " timestamp does not increase");
        if (i > 0 && (f.width() != first.width() || f.height() != first.height()))
            add(ViolationKind::DimensionMismatch, i,
                "frame " + std::to_string(i) + " is " + std::to_string(f.width()) + "x" +
                    std::to_string(f.height()) + ", expected " + std::to_string(first.width()) + "x" +
                    std::to_string(first.height()));
    }
    return report;
}

std::vector<AlignedWindow> align_audio_to_frames(const FrameBurst &burst, const AudioClip &clip) {
    if (burst.frames.empty()) throw InvalidInput("align_audio_to_frames: burst has no frames");
    if (clip.samples.size() == 0) throw InvalidInput("align_audio_to_frames: audio clip is empty");
    if (clip.sample_rate <= 0) throw InvalidInput("align_audio_to_frames: sample_rate must be positive");

    const auto n_samples = static_cast<long long>(clip.samples.size());
    const auto n_frames = static_cast<long long>(burst.frames.size());
    const long long window = n_samples / n_frames;
    if (window == 0)
        throw InvalidInput("align_audio_to_frames: clip of " + std::to_string(n_samples) +
                           " samples is shorter than the frame count");

    std::vector<AlignedWindow> out;
    out.reserve(burst.frames.size());
    for (long long i = 0; i < n_frames; ++i) {
        const double offset = (burst.frames[i].timestamp - clip.start_time) * clip.sample_rate;
        if (!std::isfinite(offset))
            throw AlignmentFailure(static_cast<std::size_t>(i), "frame " + std::to_string(i) + ": timestamp not finite");
        const long long center = std::llround(offset);
        if (center < -window || center - n_samples > window)
            throw AlignmentFailure(static_cast<std::size_t>(i),
                                   "frame " + std::to_string(i) + " lies more than one window (" +
                                       std::to_string(window) + " samples) outside the audio clip");

        const long long begin = center - window / 2;
        const long long end = begin + window;
        const long long src_begin = std::clamp(begin, 0LL, n_samples);
        const long long src_end = std::clamp(end, 0LL, n_samples);

        AlignedWindow w;
        w.frame_index = static_cast<std::size_t>(i);
        w.samples = Eigen::VectorXd::Zero(window);
        if (src_end > src_begin)
            w.samples.segment(src_begin - begin, src_end - src_begin) = clip.samples.segment(src_begin, src_end - src_begin);
        w.pad_left = static_cast<std::size_t>(std::min(window, std::max(0LL, -begin)));
        w.pad_right = static_cast<std::size_t>(std::min(window, std::max(0LL, end - n_samples)));
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace mmfuse
