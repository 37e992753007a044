#pragma once

#include <random>
#include <vector>

#include "mmfuse/fusion.hpp"
#include "oracles.hpp"

namespace testing {

using Seq = mmfuse::LabeledSequence<double>;

/// Linearly separable token sequences: moving examples carry detections and
/// detail energy, static ones are zero apart from small noise. Audio tokens
/// are uninformative noise.
inline std::vector<Seq> separable_set(int count, int tokens, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<Seq> out;
    for (int i = 0; i < count; ++i) {
        Seq s;
        s.motion = i % 2;
        s.visual = mmfuse::Mat<double>::Zero(tokens, mmfuse::kBasicVisualFeatures);
        for (Eigen::Index r = 0; r < s.visual.rows(); ++r)
            for (Eigen::Index c = 0; c < s.visual.cols(); ++c) s.visual(r, c) = (s.motion ? 1.5 : 0.0) + noise(rng);
        s.audio = oracle::random_matrix(tokens, mmfuse::kBasicAudioFeatures, rng);
        out.push_back(std::move(s));
    }
    return out;
}

inline double accuracy(const mmfuse::BasicFusionModel<double> &m, const std::vector<Seq> &set) {
    int correct = 0;
    for (const auto &s : set) correct += mmfuse::argmax(m.logits(s.visual, s.audio)) == s.motion;
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

struct SeparableRun {
    double accuracy = 0;
    int steps = 0;
    double initial_accuracy = 0;
};

/// Full-batch training until 95% accuracy or the step budget is spent.
inline SeparableRun train_separable(std::uint64_t seed, int max_steps = 500) {
    auto model = mmfuse::BasicFusionModel<double>::init(mmfuse::FusionDims::basic(), seed);
    const auto set = separable_set(32, 5, seed + 1);
    mmfuse::GradientDescent<double> opt(0.05);
    SeparableRun r;
    r.initial_accuracy = accuracy(model, set);
    for (r.steps = 0; r.steps < max_steps; ++r.steps) {
        if ((r.accuracy = accuracy(model, set)) >= 0.95) return r;
        mmfuse::train_step(model, std::span<const Seq>(set), opt);
    }
    r.accuracy = accuracy(model, set);
    return r;
}

/// Loss after each of `steps` updates on one repeated example.
inline std::vector<double> repeated_example_losses(std::uint64_t seed, int steps = 200, double lr = 0.05) {
    auto model = mmfuse::BasicFusionModel<double>::init(mmfuse::FusionDims::basic(), seed);
    const auto set = separable_set(2, 5, seed + 7);
    const std::vector<Seq> batch{set[1]};
    std::vector<double> losses;
    for (int i = 0; i < steps; ++i) losses.push_back(mmfuse::train_step(model, std::span<const Seq>(batch), lr));
    return losses;
}

inline bool decreases_over_every_span(const std::vector<double> &losses, std::size_t span = 50) {
    for (std::size_t i = 0; i + span < losses.size(); ++i)
        if (!(losses[i + span] < losses[i])) return false;
    return true;
}

} // namespace testing
