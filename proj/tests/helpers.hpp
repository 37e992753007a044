#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mmfuse/timebase.hpp"

namespace testing {

inline mmfuse::Frame constant_frame(int w, int h, std::uint8_t value, double t = 0.0) {
    mmfuse::Frame f;
    f.pixels = mmfuse::PixelGrid::Constant(h, w, value);
    f.timestamp = t;
    return f;
}

inline mmfuse::FrameBurst uniform_burst(int frames, double fps, int w = 8, int h = 8) {
    mmfuse::FrameBurst b;
    b.nominal_fps = fps;
    for (int i = 0; i < frames; ++i) b.frames.push_back(constant_frame(w, h, 100, i / fps));
    return b;
}

inline Eigen::VectorXd tone(double hz, int n, int sr, double amp = 1.0) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * 3.14159265358979323846 * hz * i / sr);
    return x;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("mmfuse_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
};

} // namespace testing
