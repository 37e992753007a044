#include "mmfuse/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "mmfuse/error.hpp"
#include "mmfuse/fusion.hpp"

namespace mmfuse {

using nlohmann::json;

namespace {

constexpr double kVisualBurstDefault = 60.0;
constexpr double kAudioBurstDefault = 0.5;
constexpr double kEventObjectIntensity = 255.0;
constexpr double kEventObjectSize = 16.0;

InjectionType injection_from_name(const std::string &s) {
    if (s == "visual_burst") return InjectionType::VisualBurst;
    if (s == "audio_burst") return InjectionType::AudioBurst;
    if (s == "event_label") return InjectionType::EventLabel;
    throw InvalidConfig("unknown injection type '" + s + "'");
}

// Event-label injections render as a bright square in the lower right corner.
ObjectScript event_object(const Scenario &s, const Injection &inj, int index, int label_id) {
    ObjectScript o;
    o.id = 1000 + index;
    o.class_id = kEventClassOffset + label_id;
    o.w = o.h = kEventObjectSize;
    o.x = s.width - kEventObjectSize - 4;
    o.y = s.height - kEventObjectSize - 4;
    o.intensity = inj.magnitude > 0 ? inj.magnitude : kEventObjectIntensity;
    o.first_frame = inj.first_window;
    o.last_frame = inj.last_window;
    return o;
}

std::vector<ObjectScript> all_objects(const Scenario &s) {
    std::vector<ObjectScript> out = s.objects;
    const auto labels = EventLabels::defaults();
    for (std::size_t i = 0; i < s.anomalies.size(); ++i) {
        const auto &inj = s.anomalies[i];
        if (inj.type == InjectionType::EventLabel)
            out.push_back(event_object(s, inj, static_cast<int>(i), std::max(0, labels.id_of(inj.label))));
    }
    return out;
}

} // namespace

const char *injection_name(InjectionType t) {
    switch (t) {
    case InjectionType::VisualBurst: return "visual_burst";
    case InjectionType::AudioBurst: return "audio_burst";
    case InjectionType::EventLabel: return "event_label";
    }
    return "unknown";
}

BBox ObjectScript::box_at(int frame) const {
    double px = x + vx * frame, py = y + vy * frame;
    if (!path.empty()) {
        const auto &p = path[static_cast<std::size_t>(std::clamp<int>(frame, 0, static_cast<int>(path.size()) - 1))];
        px = p[0];
        py = p[1];
    }
    return {px, py, px + w, py + h};
}

int Scenario::frame_count() const { return static_cast<int>(std::llround(duration_s * fps)); }

std::size_t Scenario::sample_count() const { return static_cast<std::size_t>(std::llround(duration_s * sample_rate)); }

void Scenario::validate() const {
    std::vector<std::string> problems;
    if (!(duration_s > 0) || !std::isfinite(duration_s)) problems.push_back("duration_s must be positive");
    if (!(fps > 0) || !std::isfinite(fps)) problems.push_back("fps must be positive");
    if (sample_rate <= 0) problems.push_back("sample_rate must be positive");
    if (width < 8 || height < 8) problems.push_back("frames must be at least 8x8");
    if (burst_frames < 1) problems.push_back("burst_frames must be >= 1");
    if (!problems.empty()) throw InvalidConfig(problems);

    const int n = frame_count();
    if (n < 1) problems.push_back("duration_s * fps yields no frames");
    for (const auto &o : objects) {
        const std::string who = "object " + std::to_string(o.id);
        if (o.first_frame < 0 || o.first_frame >= n) problems.push_back(who + ": first_frame outside [0, " + std::to_string(n) + ")");
        if (o.last_frame >= n) problems.push_back(who + ": last_frame " + std::to_string(o.last_frame) + " beyond the last frame");
        if (o.last_frame >= 0 && o.last_frame < o.first_frame) problems.push_back(who + ": last_frame before first_frame");
        if (static_cast<int>(o.path.size()) > n) problems.push_back(who + ": path longer than the scenario");
        if (!(o.w > 0 && o.h > 0)) problems.push_back(who + ": size must be positive");
        if (o.class_id < 0 || o.class_id >= kEventClassOffset) problems.push_back(who + ": class_id must lie in [0, 100)");
    }
    for (std::size_t i = 0; i < audio.size(); ++i) {
        const auto &a = audio[i];
        const std::string who = "audio segment " + std::to_string(i);
        if (a.start_s < 0 || a.duration_s < 0 || a.start_s + a.duration_s > duration_s + 1e-9)
            problems.push_back(who + ": outside [0, " + std::to_string(duration_s) + "] s");
        if (a.kind != "tone" && a.kind != "noise") problems.push_back(who + ": kind must be tone or noise");
        if (a.kind == "tone" && !(a.frequency_hz > 0 && a.frequency_hz < sample_rate / 2.0))
            problems.push_back(who + ": tone frequency must lie in (0, Nyquist)");
    }
    const auto labels = EventLabels::defaults();
    for (std::size_t i = 0; i < anomalies.size(); ++i) {
        const auto &inj = anomalies[i];
        const std::string who = "injection " + std::to_string(i);
        if (inj.first_window < 0 || inj.last_window >= n || inj.first_window > inj.last_window)
            problems.push_back(who + ": window range [" + std::to_string(inj.first_window) + ", " + std::to_string(inj.last_window) +
                               "] outside [0, " + std::to_string(n) + ")");
        if (inj.type == InjectionType::EventLabel && labels.id_of(inj.label) < 0)
            problems.push_back(who + ": unknown event label '" + inj.label + "'");
    }
    if (!problems.empty()) throw InvalidConfig(problems);
}

bool Scenario::injected(int window) const {
    return std::any_of(anomalies.begin(), anomalies.end(),
                       [&](const Injection &i) { return window >= i.first_window && window <= i.last_window; });
}

DetectionScript Scenario::detection_script() const {
    DetectionScript script;
    script.frame_width = width;
    script.frame_height = height;
    const auto objs = all_objects(*this);
    for (int f = 0; f < frame_count(); ++f) {
        auto &frame = script.frames.emplace_back();
        for (const auto &o : objs) {
            if (!o.visible(f)) continue;
            const BBox b = o.box_at(f).clamped(width, height);
            if (b.valid()) frame.push_back({o.id, o.class_id, b, o.confidence});
        }
    }
    return script;
}

int Scenario::motion_label(int frame) const {
    const int other = frame > 0 ? frame - 1 : frame + 1;
    for (const auto &o : objects)
        if (o.visible(frame) && o.visible(other) && !(o.box_at(frame) == o.box_at(other))) return 1;
    return 0;
}

int Scenario::event_label(int frame) const {
    const auto labels = EventLabels::defaults();
    for (const auto &inj : anomalies)
        if (inj.type == InjectionType::EventLabel && frame >= inj.first_window && frame <= inj.last_window)
            return std::max(0, labels.id_of(inj.label));
    return 0;
}

json to_json(const Scenario &s) {
    json objs = json::array();
    for (const auto &o : s.objects) {
        json j = {{"id", o.id},       {"class_id", o.class_id}, {"x", o.x},
                  {"y", o.y},         {"w", o.w},               {"h", o.h},
                  {"vx", o.vx},       {"vy", o.vy},             {"intensity", o.intensity},
                  {"confidence", o.confidence}, {"first_frame", o.first_frame}, {"last_frame", o.last_frame}};
        if (!o.path.empty()) j["path"] = o.path;
        objs.push_back(std::move(j));
    }
    json audio = json::array();
    for (const auto &a : s.audio)
        audio.push_back({{"start_s", a.start_s}, {"duration_s", a.duration_s}, {"kind", a.kind},
                         {"frequency_hz", a.frequency_hz}, {"amplitude", a.amplitude}});
    json inj = json::array();
    for (const auto &i : s.anomalies)
        inj.push_back({{"type", injection_name(i.type)}, {"first_window", i.first_window}, {"last_window", i.last_window},
                       {"label", i.label}, {"magnitude", i.magnitude}});
    return {{"duration_s", s.duration_s},
            {"fps", s.fps},
            {"sample_rate", s.sample_rate},
            {"width", s.width},
            {"height", s.height},
            {"burst_frames", s.burst_frames},
            {"seed", s.seed},
            {"background", s.background},
            {"texture_amplitude", s.texture_amplitude},
            {"pixel_noise", s.pixel_noise},
            {"audio_noise", s.audio_noise},
            {"objects", objs},
            {"audio", audio},
            {"anomalies", inj}};
}

Scenario scenario_from_json(const json &j) {
    Scenario s;
    try {
        s.duration_s = j.value("duration_s", s.duration_s);
        s.fps = j.value("fps", s.fps);
        s.sample_rate = j.value("sample_rate", s.sample_rate);
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.burst_frames = j.value("burst_frames", s.burst_frames);
        s.seed = j.value("seed", s.seed);
        s.background = j.value("background", s.background);
        s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
        s.pixel_noise = j.value("pixel_noise", s.pixel_noise);
        s.audio_noise = j.value("audio_noise", s.audio_noise);
        for (const auto &jo : j.value("objects", json::array())) {
            ObjectScript o;
            o.id = jo.value("id", o.id);
            o.class_id = jo.value("class_id", o.class_id);
            o.x = jo.value("x", o.x);
            o.y = jo.value("y", o.y);
            o.w = jo.value("w", o.w);
            o.h = jo.value("h", o.h);
            o.vx = jo.value("vx", o.vx);
            o.vy = jo.value("vy", o.vy);
            o.intensity = jo.value("intensity", o.intensity);
            o.confidence = jo.value("confidence", o.confidence);
            o.first_frame = jo.value("first_frame", o.first_frame);
            o.last_frame = jo.value("last_frame", o.last_frame);
            if (jo.contains("path")) o.path = jo.at("path").get<std::vector<std::array<double, 2>>>();
            s.objects.push_back(std::move(o));
        }
        for (const auto &ja : j.value("audio", json::array())) {
            AudioSegment a;
            a.start_s = ja.value("start_s", a.start_s);
            a.duration_s = ja.value("duration_s", a.duration_s);
            a.kind = ja.value("kind", a.kind);
            a.frequency_hz = ja.value("frequency_hz", a.frequency_hz);
            a.amplitude = ja.value("amplitude", a.amplitude);
            s.audio.push_back(std::move(a));
        }
        for (const auto &ji : j.value("anomalies", json::array())) {
            Injection i;
            i.type = injection_from_name(ji.value("type", std::string("visual_burst")));
            i.first_window = ji.value("first_window", i.first_window);
            i.last_window = ji.value("last_window", i.first_window);
            i.label = ji.value("label", i.label);
            i.magnitude = ji.value("magnitude", i.magnitude);
            s.anomalies.push_back(std::move(i));
        }
    } catch (const json::exception &e) {
        throw InvalidConfig(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw InvalidConfig("scenario " + path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

Scenario canonical_scenario(std::uint64_t seed) {
    Scenario s;
    s.seed = seed;
    s.texture_amplitude = 12;
    s.pixel_noise = 2;
    s.audio_noise = 0.01;
    ObjectScript o;
    o.id = 1;
    o.class_id = 0;
    o.x = 30;
    o.y = 50;
    o.w = 20;
    o.h = 20;
    o.vx = 4;
    s.objects.push_back(o);
    s.audio.push_back({0.0, s.duration_s, "tone", 1000.0, 0.3});
    return s;
}

Scenario injection_scenario(std::uint64_t seed) {
    Scenario s;
    s.duration_s = 24.0;
    s.seed = seed;
    s.texture_amplitude = 12;
    s.pixel_noise = 2;
    s.audio_noise = 0.01;
    const int n = s.frame_count();
    // Periodic motion so the warm-up frames cover every pose seen later.
    constexpr int kPeriod = 16;
    const std::array<std::array<double, 4>, 3> tracks = {{{20, 20, 30, 0}, {90, 30, 0, 25}, {40, 80, 40, 10}}};
    for (int k = 0; k < 3; ++k) {
        ObjectScript o;
        o.id = k + 1;
        o.class_id = k;
        o.w = 18;
        o.h = 18;
        o.intensity = 170 + 20 * k;
        for (int f = 0; f < n; ++f) {
            const double ph = 2 * std::numbers::pi * f / kPeriod;
            o.path.push_back({tracks[k][0] + tracks[k][2] * 0.5 * (1 - std::cos(ph)), tracks[k][1] + tracks[k][3] * 0.5 * (1 - std::cos(ph))});
        }
        o.x = o.path[0][0];
        o.y = o.path[0][1];
        s.objects.push_back(std::move(o));
    }
    s.audio.push_back({0.0, s.duration_s, "tone", 800.0, 0.25});
    s.audio.push_back({0.0, s.duration_s, "tone", 2400.0, 0.05});
    s.anomalies = {{InjectionType::VisualBurst, 48, 49, "", 0},  {InjectionType::AudioBurst, 63, 64, "", 0},
                   {InjectionType::EventLabel, 78, 80, "fire", 0}, {InjectionType::VisualBurst, 95, 95, "", 0},
                   {InjectionType::AudioBurst, 106, 106, "", 0},  {InjectionType::EventLabel, 113, 114, "smoke", 0}};
    s.validate();
    return s;
}

RenderedScenario render_scenario(const Scenario &s) {
    s.validate();
    const int n = s.frame_count();
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Static texture shared by every frame.
    Image base(s.height, s.width);
    for (int r = 0; r < s.height; ++r)
        for (int c = 0; c < s.width; ++c)
            base(r, c) = s.background + s.texture_amplitude * std::sin(0.37 * c + 0.11 * r) * std::cos(0.23 * r - 0.05 * c);

    const auto objs = all_objects(s);
    RenderedScenario out;
    out.manifest.fps = s.fps;
    for (int f = 0; f < n; ++f) {
        Image img = base;
        for (const auto &o : objs) {
            if (!o.visible(f)) continue;
            const BBox b = o.box_at(f).clamped(s.width, s.height);
            if (!b.valid()) continue;
            const int c0 = static_cast<int>(std::lround(b.x1)), c1 = static_cast<int>(std::lround(b.x2));
            const int r0 = static_cast<int>(std::lround(b.y1)), r1 = static_cast<int>(std::lround(b.y2));
            if (c1 > c0 && r1 > r0) img.block(r0, c0, r1 - r0, c1 - c0) = o.intensity;
        }
        for (const auto &inj : s.anomalies)
            if (inj.type == InjectionType::VisualBurst && f >= inj.first_window && f <= inj.last_window)
                img += inj.magnitude > 0 ? inj.magnitude : kVisualBurstDefault;
        if (s.pixel_noise > 0)
            for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] += s.pixel_noise * gauss(rng);

        Frame frame;
        frame.timestamp = f / s.fps;
        frame.pixels = img.round().max(0.0).min(255.0).cast<std::uint8_t>();
        out.frames.push_back(std::move(frame));
        std::ostringstream name;
        name << "frames/frame_" << std::setw(4) << std::setfill('0') << f << ".pgm";
        out.manifest.frames.push_back({name.str(), f / s.fps});
    }

    const auto ns = static_cast<Eigen::Index>(s.sample_count());
    Eigen::VectorXd audio = Eigen::VectorXd::Zero(ns);
    auto span_of = [&](double t0, double t1) {
        const auto a = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(t0 * s.sample_rate)), 0, ns);
        const auto b = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(t1 * s.sample_rate)), 0, ns);
        return std::pair{a, b};
    };
    for (const auto &seg : s.audio) {
        const auto [a, b] = span_of(seg.start_s, seg.start_s + seg.duration_s);
        for (Eigen::Index i = a; i < b; ++i) {
            const double t = static_cast<double>(i) / s.sample_rate;
            audio[i] += seg.kind == "tone" ? seg.amplitude * std::sin(2 * std::numbers::pi * seg.frequency_hz * t)
                                           : seg.amplitude * gauss(rng);
        }
    }
    for (const auto &inj : s.anomalies) {
        if (inj.type != InjectionType::AudioBurst) continue;
        // Covers the aligned windows of the injected frames.
        const auto [a, b] = span_of((inj.first_window - 0.5) / s.fps, (inj.last_window + 0.5) / s.fps);
        const double amp = inj.magnitude > 0 ? inj.magnitude : kAudioBurstDefault;
        for (Eigen::Index i = a; i < b; ++i) audio[i] += amp * gauss(rng);
    }
    if (s.audio_noise > 0)
        for (Eigen::Index i = 0; i < ns; ++i) audio[i] += s.audio_noise * gauss(rng);
    out.audio = quantize_pcm16(audio.cwiseMax(-1.0).cwiseMin(1.0));
    return out;
}

void write_scenario_dir(const std::filesystem::path &dir, const Scenario &s) {
    const auto rendered = render_scenario(s);
    std::error_code ec;
    std::filesystem::create_directories(dir / "frames", ec);
    if (ec) throw IoError("cannot create " + (dir / "frames").string() + ": " + ec.message());
    for (std::size_t i = 0; i < rendered.frames.size(); ++i) write_pgm(dir / rendered.manifest.frames[i].file, rendered.frames[i].pixels);
    write_wav(dir / rendered.manifest.audio, rendered.audio, s.sample_rate);
    write_manifest(dir / "manifest.json", rendered.manifest);
    std::ofstream sj(dir / "scenario.json");
    if (!sj) throw IoError("cannot write " + (dir / "scenario.json").string());
    sj << to_json(s).dump(2) << '\n';
}

} // namespace mmfuse
