#include "mmfuse/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "mmfuse/error.hpp"

namespace mmfuse {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, recording problems instead of throwing.
class Section {
public:
    Section(const json &j, std::string path, std::vector<std::string> &problems) : j_(j), path_(std::move(path)), problems_(problems) {
        if (!j_.is_object()) problems_.push_back(path_ + ": expected an object");
    }

    ~Section() {
        if (!j_.is_object()) return;
        for (const auto &[key, _] : j_.items())
            if (!seen_.count(key)) problems_.push_back(path_ + "." + key + ": unknown key");
    }

    template <typename T>
    void get(const char *key, T &out) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception &) {
            problems_.push_back(path_ + "." + key + ": wrong type");
        }
    }

    // Nested object; returns a null json when absent so callers can skip.
    const json *child(const char *key) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    std::string path(const char *key) const { return path_ + "." + key; }

private:
    const json &j_;
    std::string path_;
    std::vector<std::string> &problems_;
    std::set<std::string> seen_;
};

void read_noise(const json *j, const std::string &path, DetectorNoise &n, std::vector<std::string> &problems) {
    if (!j) return;
    Section s(*j, path, problems);
    s.get("jitter_px", n.jitter_px);
    s.get("confidence_sigma", n.confidence_sigma);
    s.get("drop_probability", n.drop_probability);
    s.get("false_positive_rate", n.false_positive_rate);
    s.get("false_positive_class", n.false_positive_class);
    s.get("seed", n.seed);
}

void read_dims(const json *j, const std::string &path, FusionDims &d, std::vector<std::string> &problems) {
    if (!j) return;
    Section s(*j, path, problems);
    s.get("hidden", d.hidden);
    s.get("heads", d.heads);
    s.get("layers", d.layers);
    s.get("ffn", d.ffn);
    s.get("max_len", d.max_len);
}

json noise_json(const DetectorNoise &n) {
    return {{"jitter_px", n.jitter_px},
            {"confidence_sigma", n.confidence_sigma},
            {"drop_probability", n.drop_probability},
            {"false_positive_rate", n.false_positive_rate},
            {"false_positive_class", n.false_positive_class},
            {"seed", n.seed}};
}

json dims_json(const FusionDims &d) {
    return {{"hidden", d.hidden}, {"heads", d.heads}, {"layers", d.layers}, {"ffn", d.ffn}, {"max_len", d.max_len}};
}

void check_unit(std::vector<std::string> &problems, const std::string &name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) problems.push_back(name + " must lie in [0, 1]");
}

void check_positive(std::vector<std::string> &problems, const std::string &name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) problems.push_back(name + " must be positive");
}

void check_dims(std::vector<std::string> &problems, const std::string &name, const FusionDims &d) {
    try {
        d.validate();
    } catch (const InvalidConfig &e) {
        for (const auto &p : e.problems()) problems.push_back(name + ": " + p);
    }
}

void check_noise(std::vector<std::string> &problems, const std::string &name, const DetectorNoise &n) {
    if (n.jitter_px < 0 || n.confidence_sigma < 0) problems.push_back(name + ": noise scales must be non-negative");
    check_unit(problems, name + ".drop_probability", n.drop_probability);
    check_unit(problems, name + ".false_positive_rate", n.false_positive_rate);
}

} // namespace

EventLabels EventConfig::resolve() const {
    EventLabels l;
    l.names = labels;
    for (const auto &name : anomaly_labels) l.anomaly_ids.push_back(l.id_of(name));
    return l;
}

void Config::validate() const {
    std::vector<std::string> p;
    if (nlm.patch_radius < 0 || nlm.search_radius < 1) p.push_back("preprocess.nlm: radii must be >= 0 (patch) and >= 1 (search)");
    check_positive(p, "preprocess.nlm.h", nlm.h);
    check_positive(p, "preprocess.flow.alpha", flow.alpha);
    if (flow.iterations < 1) p.push_back("preprocess.flow.iterations must be >= 1");

    check_unit(p, "detection.confidence_floor", detection.confidence_floor);
    check_unit(p, "detection.nms_iou", detection.nms_iou);
    check_unit(p, "detection.cross_detector_iou", detection.cross_detector_iou);
    check_noise(p, "detection.fast", detection.fast);
    check_noise(p, "detection.accurate", detection.accurate);

    check_unit(p, "tracker.high_threshold", tracker.high_threshold);
    check_unit(p, "tracker.low_threshold", tracker.low_threshold);
    if (tracker.low_threshold > tracker.high_threshold) p.push_back("tracker.low_threshold must not exceed tracker.high_threshold");
    check_unit(p, "tracker.match_iou", tracker.match_iou);
    if (tracker.max_misses < 0) p.push_back("tracker.max_misses must be >= 0");
    if (tracker.confirm_hits < 1) p.push_back("tracker.confirm_hits must be >= 1");

    check_dims(p, "fusion.basic", basic);
    check_dims(p, "fusion.advanced", advanced);
    if (advanced.hidden != kEnsembleFusedDim)
        p.push_back("fusion.advanced.hidden must equal the fused audio embedding width " + std::to_string(kEnsembleFusedDim));
    if (advanced.max_len < runtime.burst_frames) p.push_back("fusion.advanced.max_len must be >= runtime.burst_frames");

    if (static_cast<int>(events.labels.size()) != kEventClasses)
        p.push_back("events.labels must list exactly " + std::to_string(kEventClasses) + " names, got " +
                    std::to_string(events.labels.size()));
    const auto resolved = events.resolve();
    for (std::size_t i = 0; i < events.anomaly_labels.size(); ++i)
        if (resolved.anomaly_ids[i] < 0) p.push_back("events.anomaly_labels: '" + events.anomaly_labels[i] + "' is not a label");
    check_unit(p, "events.probability_threshold", events.probability_threshold);
    if (events.class_offset < 1) p.push_back("events.class_offset must be >= 1");
    if (!(events.evidence_gain >= 0)) p.push_back("events.evidence_gain must be non-negative");

    double wsum = 0.0;
    for (int m = 0; m < kMethods; ++m) {
        if (!(anomaly.weights[m] >= 0) || !std::isfinite(anomaly.weights[m]))
            p.push_back(std::string("anomaly.weights.") + method_name(m) + " must be finite and non-negative");
        else
            wsum += anomaly.weights[m];
    }
    if (!(wsum > 0)) p.push_back("anomaly.weights: at least one weight must be positive");
    check_unit(p, "anomaly.threshold", anomaly.threshold);
    check_positive(p, "anomaly.intensity_epsilon", anomaly.intensity_epsilon);
    check_positive(p, "anomaly.energy_epsilon", anomaly.energy_epsilon);
    check_positive(p, "anomaly.centroid_epsilon", anomaly.centroid_epsilon);
    if (anomaly.history < 2) p.push_back("anomaly.history must be >= 2");
    if (anomaly.autoencoder.steps < 0) p.push_back("anomaly.autoencoder.steps must be >= 0");
    if (!(anomaly.autoencoder.learning_rate >= 0)) p.push_back("anomaly.autoencoder.learning_rate must be non-negative");
    if (anomaly.warmup_frames < 32) p.push_back("anomaly.autoencoder.warmup_frames must be >= 32");

    if (runtime.burst_frames < 1) p.push_back("runtime.burst_frames must be >= 1");
    if (runtime.queue_capacity < 1) p.push_back("runtime.queue_capacity must be >= 1");
    if (runtime.analysis_delay_ms < 0) p.push_back("runtime.analysis_delay_ms must be >= 0");

    if (!p.empty()) throw InvalidConfig(p);
}

json to_json(const Config &c) {
    json weights;
    for (int m = 0; m < kMethods; ++m) weights[method_name(m)] = c.anomaly.weights[m];
    return {
        {"seed", c.seed},
        {"preprocess",
         {{"nlm", {{"patch_radius", c.nlm.patch_radius}, {"search_radius", c.nlm.search_radius}, {"h", c.nlm.h}}},
          {"flow", {{"alpha", c.flow.alpha}, {"iterations", c.flow.iterations}}}}},
        {"detection",
         {{"confidence_floor", c.detection.confidence_floor},
          {"nms_iou", c.detection.nms_iou},
          {"cross_detector_iou", c.detection.cross_detector_iou},
          {"fast", noise_json(c.detection.fast)},
          {"accurate", noise_json(c.detection.accurate)}}},
        {"tracker",
         {{"high_threshold", c.tracker.high_threshold},
          {"low_threshold", c.tracker.low_threshold},
          {"match_iou", c.tracker.match_iou},
          {"max_misses", c.tracker.max_misses},
          {"confirm_hits", c.tracker.confirm_hits}}},
        {"fusion", {{"basic", dims_json(c.basic)}, {"advanced", dims_json(c.advanced)}, {"model_seed", c.model_seed}}},
        {"events",
         {{"labels", c.events.labels},
          {"anomaly_labels", c.events.anomaly_labels},
          {"probability_threshold", c.events.probability_threshold},
          {"class_offset", c.events.class_offset},
          {"evidence_gain", c.events.evidence_gain}}},
        {"anomaly",
         {{"weights", weights},
          {"threshold", c.anomaly.threshold},
          {"intensity_epsilon", c.anomaly.intensity_epsilon},
          {"energy_epsilon", c.anomaly.energy_epsilon},
          {"centroid_epsilon", c.anomaly.centroid_epsilon},
          {"history", c.anomaly.history},
          {"autoencoder",
           {{"steps", c.anomaly.autoencoder.steps},
            {"learning_rate", c.anomaly.autoencoder.learning_rate},
            {"seed", c.anomaly.autoencoder.seed},
            {"warmup_frames", c.anomaly.warmup_frames}}}}},
        {"runtime",
         {{"burst_frames", c.runtime.burst_frames},
          {"queue_capacity", c.runtime.queue_capacity},
          {"deterministic", c.runtime.deterministic},
          {"threaded", c.runtime.threaded},
          {"analysis_delay_ms", c.runtime.analysis_delay_ms},
          {"model_dir", c.runtime.model_dir}}},
    };
}

Config config_from_json(const json &j) {
    Config c;
    std::vector<std::string> problems;
    {
        Section root(j, "config", problems);
        root.get("seed", c.seed);
        if (const json *pre = root.child("preprocess")) {
            Section s(*pre, "preprocess", problems);
            if (const json *n = s.child("nlm")) {
                Section ns(*n, "preprocess.nlm", problems);
                ns.get("patch_radius", c.nlm.patch_radius);
                ns.get("search_radius", c.nlm.search_radius);
                ns.get("h", c.nlm.h);
            }
            if (const json *f = s.child("flow")) {
                Section fs(*f, "preprocess.flow", problems);
                fs.get("alpha", c.flow.alpha);
                fs.get("iterations", c.flow.iterations);
            }
        }
        if (const json *d = root.child("detection")) {
            Section s(*d, "detection", problems);
            s.get("confidence_floor", c.detection.confidence_floor);
            s.get("nms_iou", c.detection.nms_iou);
            s.get("cross_detector_iou", c.detection.cross_detector_iou);
            read_noise(s.child("fast"), "detection.fast", c.detection.fast, problems);
            read_noise(s.child("accurate"), "detection.accurate", c.detection.accurate, problems);
        }
        if (const json *t = root.child("tracker")) {
            Section s(*t, "tracker", problems);
            s.get("high_threshold", c.tracker.high_threshold);
            s.get("low_threshold", c.tracker.low_threshold);
            s.get("match_iou", c.tracker.match_iou);
            s.get("max_misses", c.tracker.max_misses);
            s.get("confirm_hits", c.tracker.confirm_hits);
        }
        if (const json *f = root.child("fusion")) {
            Section s(*f, "fusion", problems);
            read_dims(s.child("basic"), "fusion.basic", c.basic, problems);
            read_dims(s.child("advanced"), "fusion.advanced", c.advanced, problems);
            s.get("model_seed", c.model_seed);
        }
        if (const json *e = root.child("events")) {
            Section s(*e, "events", problems);
            s.get("labels", c.events.labels);
            s.get("anomaly_labels", c.events.anomaly_labels);
            s.get("probability_threshold", c.events.probability_threshold);
            s.get("class_offset", c.events.class_offset);
            s.get("evidence_gain", c.events.evidence_gain);
        }
        if (const json *a = root.child("anomaly")) {
            Section s(*a, "anomaly", problems);
            if (const json *w = s.child("weights")) {
                Section ws(*w, "anomaly.weights", problems);
                for (int m = 0; m < kMethods; ++m) ws.get(method_name(m), c.anomaly.weights[m]);
            }
            s.get("threshold", c.anomaly.threshold);
            s.get("intensity_epsilon", c.anomaly.intensity_epsilon);
            s.get("energy_epsilon", c.anomaly.energy_epsilon);
            s.get("centroid_epsilon", c.anomaly.centroid_epsilon);
            s.get("history", c.anomaly.history);
            if (const json *ae = s.child("autoencoder")) {
                Section as(*ae, "anomaly.autoencoder", problems);
                as.get("steps", c.anomaly.autoencoder.steps);
                as.get("learning_rate", c.anomaly.autoencoder.learning_rate);
                as.get("seed", c.anomaly.autoencoder.seed);
                as.get("warmup_frames", c.anomaly.warmup_frames);
            }
        }
        if (const json *r = root.child("runtime")) {
            Section s(*r, "runtime", problems);
            s.get("burst_frames", c.runtime.burst_frames);
            s.get("queue_capacity", c.runtime.queue_capacity);
            s.get("deterministic", c.runtime.deterministic);
            s.get("threaded", c.runtime.threaded);
            s.get("analysis_delay_ms", c.runtime.analysis_delay_ms);
            s.get("model_dir", c.runtime.model_dir);
        }
    }
    try {
        c.validate();
    } catch (const InvalidConfig &e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw InvalidConfig(problems);
    return c;
}

Config load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw InvalidConfig("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace mmfuse
