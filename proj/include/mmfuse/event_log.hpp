#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmfuse {

enum class EventKind { Detection, Track, Classification, Anomaly, Metric };

const char *event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string &s);

struct EventRecord {
    double t = 0.0;
    std::size_t window = 0;
    EventKind kind = EventKind::Metric;
    nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json to_json(const EventRecord &r);
EventRecord event_from_json(const nlohmann::json &j);

/// One record per line, stable-sorted by timestamp. Throws IoError.
void write_event_log(const std::filesystem::path &path, std::vector<EventRecord> records);
std::string format_event_log(std::vector<EventRecord> records);
std::vector<EventRecord> read_event_log(const std::filesystem::path &path);

} // namespace mmfuse
