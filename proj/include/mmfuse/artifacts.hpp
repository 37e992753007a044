#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "mmfuse/anomaly.hpp"
#include "mmfuse/timebase.hpp"

namespace mmfuse {

struct ArtifactPaths {
    std::filesystem::path directory;
    std::filesystem::path frame;
    std::filesystem::path snippet;
    std::filesystem::path report;
};

/// "<milliseconds, 9 digits>_<type>", e.g. 000001250_audio_burst.
std::string artifact_dir_name(double timestamp, const std::string &type);

nlohmann::json to_json(const AnomalyReport &r);

/// Writes frame.pgm, snippet.wav and report.json under
/// <root>/<artifact_dir_name>/, adding a numeric suffix if that directory
/// already exists. Throws IoError.
ArtifactPaths persist_anomaly_artifact(const AnomalyReport &report, const Frame &frame, const Eigen::VectorXd &audio,
                                       int sample_rate, const std::filesystem::path &root);

} // namespace mmfuse
