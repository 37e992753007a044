#include "mmfuse/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mmfuse/error.hpp"
#include "mmfuse/media_io.hpp"

namespace mmfuse {

namespace fs = std::filesystem;

std::string artifact_dir_name(double timestamp, const std::string &type) {
    const long long ms = std::llround(std::max(0.0, timestamp) * 1000.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%09lld", ms);
    return std::string(buf) + "_" + type;
}

nlohmann::json to_json(const AnomalyReport &r) {
    nlohmann::json scores, weights;
    for (int m = 0; m < kMethods; ++m) {
        scores[method_name(m)] = r.scores[m];
        weights[method_name(m)] = r.weights[m];
    }
    return {{"timestamp", r.timestamp}, {"window", r.window},   {"type", r.type()},
            {"scores", scores},         {"weights", weights},   {"combined", r.combined},
            {"threshold", r.threshold}, {"triggered", r.triggered}, {"contributing_events", r.contributing_events}};
}

ArtifactPaths persist_anomaly_artifact(const AnomalyReport &report, const Frame &frame, const Eigen::VectorXd &audio,
                                       int sample_rate, const fs::path &root) {
    const std::string base = artifact_dir_name(report.timestamp, report.type());
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create artifact root " + root.string() + ": " + ec.message());

    fs::path dir = root / base;
    for (int k = 1; fs::exists(dir); ++k) dir = root / (base + "_" + std::to_string(k));
    if (!fs::create_directory(dir, ec) || ec) throw IoError("cannot create " + dir.string() + (ec ? ": " + ec.message() : ""));

    ArtifactPaths p{dir, dir / "frame.pgm", dir / "snippet.wav", dir / "report.json"};
    write_pgm(p.frame, frame.pixels);
    write_wav(p.snippet, audio, sample_rate);
    std::ofstream out(p.report);
    if (!out) throw IoError("cannot write " + p.report.string());
    out << to_json(report).dump(2) << '\n';
    if (!out) throw IoError("failed writing " + p.report.string());
    return p;
}

} // namespace mmfuse
