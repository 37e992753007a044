#pragma once

#include <array>
#include <string>

#include "mmfuse/timebase.hpp"
#include "mmfuse/types.hpp"

namespace mmfuse {

struct NlmParams {
    int patch_radius = 1;  // 3x3 patch
    int search_radius = 3; // 7x7 search window
    double h = 10.0;       // gray levels
};

/// Non-local means. Patch distance is the mean squared difference over the
/// patch; weight exp(-d2 / h^2). The center pixel takes the largest weight of
/// its neighbours rather than 1, so isolated impulses are not self-reinforced.
/// Borders are reflected.
Frame preprocess_frame(const Frame &frame, const NlmParams &params = {});

enum Subband : int { LL2 = 0, LH2, HL2, HH2, LH1, HL1, HH1 };

struct WaveletEnergy {
    std::array<double, 7> subband{}; // indexed by Subband
    double total = 0.0;

    double detail() const { return total - subband[LL2]; }
};

/// Two-level separable db2 decomposition with periodic extension. Sides that
/// are not multiples of 4 are zero-padded, which adds no energy.
/// First letter of a band is the horizontal filter, second the vertical one.
WaveletEnergy dwt2_energy(const Image &image);
WaveletEnergy dwt2_energy(const Frame &frame);

struct FlowField {
    Image u; // px / frame, horizontal
    Image v; // px / frame, vertical
};

struct FlowParams {
    double alpha = 10.0;
    int iterations = 100;
};

/// Dense optical flow. Current implementation: Horn-Schunck.
class DenseFlow {
public:
    explicit DenseFlow(FlowParams params = {}) : params_(params) {}

    FlowField operator()(const Image &prev, const Image &next) const;
    FlowField operator()(const Frame &prev, const Frame &next) const;

    const FlowParams &params() const { return params_; }

private:
    FlowParams params_;
};

inline FlowField dense_flow(const Frame &prev, const Frame &next, const FlowParams &params = {}) {
    return DenseFlow(params)(prev, next);
}

struct FlowStats {
    double mean_magnitude = 0.0;
    double max_magnitude = 0.0;
    double mean_angle = 0.0; // radians, magnitude-weighted circular mean
};

FlowStats flow_stats(const FlowField &flow);

// Two-plane CSV: u rows, a blank line, then v rows.
void write_flow_csv(const std::string &path, const FlowField &flow);

inline Image to_image(const Frame &f) { return f.pixels.cast<double>().array(); }

} // namespace mmfuse
