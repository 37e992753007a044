#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmfuse/timebase.hpp"

namespace mmfuse {

// Binary PGM (P5), maxval 255.
PixelGrid read_pgm(const std::filesystem::path &path);
void write_pgm(const std::filesystem::path &path, const PixelGrid &pixels);

// 16-bit PCM mono WAV. Samples map to integers by round(x * 32767) and back by
// k / 32767, so values already on that grid round-trip exactly.
AudioClip read_wav(const std::filesystem::path &path);
void write_wav(const std::filesystem::path &path, const Eigen::VectorXd &samples, int sample_rate);
Eigen::VectorXd quantize_pcm16(const Eigen::VectorXd &samples);

struct ManifestEntry {
    std::string file;
    double timestamp_s = 0.0;
};

struct Manifest {
    std::vector<ManifestEntry> frames;
    std::string audio = "audio.wav";
    double fps = 20.0;
};

Manifest read_manifest(const std::filesystem::path &path);
void write_manifest(const std::filesystem::path &path, const Manifest &manifest);

// Grayscale from RGB planes using ITU-R BT.601 luma weights.
PixelGrid rgb_to_gray(const PixelGrid &r, const PixelGrid &g, const PixelGrid &b);

} // namespace mmfuse
