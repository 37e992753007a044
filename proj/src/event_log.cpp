#include "mmfuse/event_log.hpp"

#include <algorithm>
#include <fstream>

#include "mmfuse/error.hpp"

namespace mmfuse {

using nlohmann::json;

const char *event_kind_name(EventKind k) {
    switch (k) {
    case EventKind::Detection: return "detection";
    case EventKind::Track: return "track";
    case EventKind::Classification: return "classification";
    case EventKind::Anomaly: return "anomaly";
    case EventKind::Metric: return "metric";
    }
    return "metric";
}

EventKind event_kind_from_name(const std::string &s) {
    for (auto k : {EventKind::Detection, EventKind::Track, EventKind::Classification, EventKind::Anomaly, EventKind::Metric})
        if (s == event_kind_name(k)) return k;
    throw InvalidInput("unknown event kind '" + s + "'");
}

json to_json(const EventRecord &r) {
    return {{"t", r.t}, {"window", r.window}, {"kind", event_kind_name(r.kind)}, {"payload", r.payload}};
}

EventRecord event_from_json(const json &j) {
    EventRecord r;
    r.t = j.at("t").get<double>();
    r.window = j.at("window").get<std::size_t>();
    r.kind = event_kind_from_name(j.at("kind").get<std::string>());
    r.payload = j.at("payload");
    return r;
}

std::string format_event_log(std::vector<EventRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const EventRecord &a, const EventRecord &b) { return a.t < b.t; });
    std::string out;
    for (const auto &r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_event_log(const std::filesystem::path &path, std::vector<EventRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write event log " + path.string());
    out << format_event_log(std::move(records));
    if (!out) throw IoError("failed writing event log " + path.string());
}

std::vector<EventRecord> read_event_log(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open event log " + path.string());
    std::vector<EventRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(event_from_json(json::parse(line)));
        } catch (const json::exception &e) {
            throw InvalidInput(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

} // namespace mmfuse
