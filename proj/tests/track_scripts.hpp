#pragma once

#include <map>
#include <random>
#include <vector>

#include "mmfuse/detect_track.hpp"

namespace testing {

/// Three well-separated objects moving linearly for `frames` frames.
inline mmfuse::DetectionScript three_object_script(int frames = 40) {
    mmfuse::DetectionScript s;
    s.frame_width = 320;
    s.frame_height = 240;
    for (int f = 0; f < frames; ++f) {
        std::vector<mmfuse::ScriptedObject> objs;
        objs.push_back({1, 0, {20.0 + 2 * f, 20, 50.0 + 2 * f, 50}, 0.9});
        objs.push_back({2, 0, {200.0 - 2 * f, 100, 230.0 - 2 * f, 130}, 0.85});
        objs.push_back({3, 1, {60, 170.0 - f, 90, 200.0 - f}, 0.8});
        s.frames.push_back(objs);
    }
    return s;
}

struct TrackingOutcome {
    int id_switches = 0;
    int tracks_created = 0;
};

/// Runs the tracker over noisy detections and counts, per ground-truth object,
/// how often the track covering it (IoU >= 0.5, non-lost) changes identity.
inline TrackingOutcome run_tracking(const mmfuse::DetectionScript &script, const mmfuse::DetectorNoise &noise) {
    mmfuse::Tracker tracker;
    std::map<int, int> last_id;
    TrackingOutcome out;
    for (std::size_t f = 0; f < script.frames.size(); ++f) {
        const auto dets = mmfuse::scripted_detector(f, script, noise);
        const auto &tracks = tracker.step(dets);
        for (const auto &obj : script.frames[f]) {
            int best = -1;
            double best_iou = 0.5;
            for (const auto &t : tracks) {
                if (t.state == mmfuse::TrackState::Lost || t.misses > 0) continue;
                const double v = mmfuse::iou(t.bbox, obj.bbox);
                if (v >= best_iou) best_iou = v, best = t.track_id;
            }
            if (best < 0) continue;
            auto it = last_id.find(obj.object_id);
            if (it != last_id.end() && it->second != best) ++out.id_switches;
            last_id[obj.object_id] = best;
        }
    }
    out.tracks_created = tracker.next_id() - 1;
    return out;
}

/// One object whose confidence dips for a single frame.
inline mmfuse::DetectionScript confidence_dip_script() {
    mmfuse::DetectionScript s;
    for (double c : {0.9, 0.9, 0.15, 0.9}) s.frames.push_back({{1, 0, {10, 10, 40, 40}, c}});
    return s;
}

inline std::vector<mmfuse::Detection> random_boxes(std::mt19937_64 &rng, int n, int classes) {
    std::uniform_real_distribution<double> pos(0, 100), size(5, 40), conf(0, 1);
    std::uniform_int_distribution<int> cls(0, classes - 1);
    std::vector<mmfuse::Detection> out;
    for (int i = 0; i < n; ++i) {
        const double x = pos(rng), y = pos(rng);
        mmfuse::Detection d;
        d.bbox = {x, y, x + size(rng), y + size(rng)};
        // Coarse confidences so ties occur.
        d.confidence = std::round(conf(rng) * 20) / 20;
        d.class_id = cls(rng);
        out.push_back(d);
    }
    return out;
}

} // namespace testing
