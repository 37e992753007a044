#include "mmfuse/detect_track.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <tuple>

#include "mmfuse/error.hpp"

namespace mmfuse {

BBox BBox::clamped(double frame_width, double frame_height) const {
    return {std::clamp(x1, 0.0, frame_width), std::clamp(y1, 0.0, frame_height), std::clamp(x2, 0.0, frame_width),
            std::clamp(y2, 0.0, frame_height)};
}

double iou(const BBox &a, const BBox &b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> filter_confidence(std::span<const Detection> dets, double floor) {
    std::vector<Detection> out;
    std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
                 [floor](const Detection &d) { return d.confidence >= floor; });
    return out;
}

namespace {

// Greedy suppression over an already-ordered candidate list.
std::vector<Detection> suppress_ordered(const std::vector<Detection> &ordered, double iou_threshold) {
    std::vector<Detection> kept;
    for (const auto &cand : ordered) {
        const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const Detection &k) {
            return k.class_id == cand.class_id && iou(k.bbox, cand.bbox) >= iou_threshold;
        });
        if (!overlaps) kept.push_back(cand);
    }
    return kept;
}

} // namespace

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
    std::vector<Detection> ordered(dets.begin(), dets.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Detection &a, const Detection &b) { return a.confidence > b.confidence; });
    return suppress_ordered(ordered, iou_threshold);
}

std::vector<Detection> cross_detector_merge(std::span<const Detection> fast, std::span<const Detection> accurate,
                                            double iou_threshold) {
    std::vector<Detection> ordered(accurate.begin(), accurate.end());
    ordered.insert(ordered.end(), fast.begin(), fast.end());
    // Accurate detections come first, so a stable sort resolves ties in their favour.
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Detection &a, const Detection &b) { return a.confidence > b.confidence; });
    return suppress_ordered(ordered, iou_threshold);
}

std::vector<Detection> scripted_detector(std::size_t frame_index, const DetectionScript &script,
                                         const DetectorNoise &noise) {
    if (frame_index >= script.frames.size())
        throw InvalidInput("scripted_detector: frame " + std::to_string(frame_index) + " is beyond the script (" +
                           std::to_string(script.frames.size()) + " frames)");

    std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                      static_cast<std::uint32_t>(frame_index), static_cast<std::uint32_t>(noise.source)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const bool clamp = script.frame_width > 0 && script.frame_height > 0;

    std::vector<Detection> out;
    for (const auto &obj : script.frames[frame_index]) {
        // Draw every variate unconditionally so one object's outcome never
        // shifts the random stream of the next.
        const double drop = unit(rng);
        const double j[4] = {gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
        const double cn = gauss(rng);
        if (drop < noise.drop_probability) continue;

        Detection d;
        d.class_id = obj.class_id;
        d.source = noise.source;
        d.bbox = obj.bbox;
        if (noise.jitter_px > 0.0) {
            d.bbox.x1 += noise.jitter_px * j[0];
            d.bbox.y1 += noise.jitter_px * j[1];
            d.bbox.x2 += noise.jitter_px * j[2];
            d.bbox.y2 += noise.jitter_px * j[3];
        }
        if (clamp) d.bbox = d.bbox.clamped(script.frame_width, script.frame_height);
        if (!d.bbox.valid()) continue;
        d.confidence = std::clamp(obj.confidence + noise.confidence_sigma * cn, 0.0, 1.0);
        out.push_back(d);
    }

    if (clamp && unit(rng) < noise.false_positive_rate) {
        const double w = 8.0 + 16.0 * unit(rng), h = 8.0 + 16.0 * unit(rng);
        const double x = unit(rng) * std::max(1.0, script.frame_width - w);
        const double y = unit(rng) * std::max(1.0, script.frame_height - h);
        Detection fp;
        fp.bbox = BBox{x, y, x + w, y + h}.clamped(script.frame_width, script.frame_height);
        fp.confidence = 0.3 + 0.3 * unit(rng);
        fp.class_id = noise.false_positive_class;
        fp.source = noise.source;
        if (fp.bbox.valid()) out.push_back(fp);
    }
    return out;
}

namespace {

// Greedy max-IoU assignment between the listed tracks and detections.
// Returns (track index, detection index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(const std::vector<Track> &tracks,
                                                              const std::vector<std::size_t> &track_idx,
                                                              std::span<const Detection> dets,
                                                              const std::vector<std::size_t> &det_idx, double min_iou) {
    struct Candidate {
        double score;
        std::size_t t, d;
    };
    std::vector<Candidate> cands;
    for (auto t : track_idx)
        for (auto d : det_idx) {
            if (tracks[t].class_id != dets[d].class_id) continue;
            const double v = iou(tracks[t].bbox, dets[d].bbox);
            if (v >= min_iou) cands.push_back({v, t, d});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate &a, const Candidate &b) {
        return std::tie(b.score, a.t, a.d) < std::tie(a.score, b.t, b.d);
    });

    std::vector<std::pair<std::size_t, std::size_t>> matches;
    std::vector<bool> t_used(tracks.size(), false), d_used(dets.size(), false);
    for (const auto &c : cands) {
        if (t_used[c.t] || d_used[c.d]) continue;
        t_used[c.t] = d_used[c.d] = true;
        matches.emplace_back(c.t, c.d);
    }
    return matches;
}

} // namespace

std::vector<Track> tracker_step(std::vector<Track> tracks, std::span<const Detection> dets,
                                const TrackerConfig &config, int &next_id) {
    std::vector<std::size_t> high, low;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].confidence >= config.high_threshold)
            high.push_back(i);
        else if (dets[i].confidence >= config.low_threshold)
            low.push_back(i);
    }

    std::vector<bool> matched(tracks.size(), false);
    std::vector<bool> det_used(dets.size(), false);
    auto apply = [&](const std::vector<std::pair<std::size_t, std::size_t>> &m) {
        for (auto [t, d] : m) {
            auto &tr = tracks[t];
            tr.bbox = dets[d].bbox;
            tr.confidence = dets[d].confidence;
            tr.misses = 0;
            tr.hits += 1;
            if (tr.state == TrackState::Lost || (tr.state == TrackState::Tentative && tr.hits >= config.confirm_hits))
                tr.state = TrackState::Active;
            matched[t] = true;
            det_used[d] = true;
        }
    };

    std::vector<std::size_t> all(tracks.size());
    std::iota(all.begin(), all.end(), 0);
    apply(greedy_match(tracks, all, dets, high, config.match_iou));

    std::vector<std::size_t> remaining;
    for (std::size_t t = 0; t < tracks.size(); ++t)
        if (!matched[t] && tracks[t].state != TrackState::Lost) remaining.push_back(t);
    apply(greedy_match(tracks, remaining, dets, low, config.match_iou));

    std::vector<Track> out;
    out.reserve(tracks.size() + high.size());
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        Track tr = tracks[t];
        tr.age += 1;
        if (!matched[t]) {
            tr.hits = 0;
            tr.misses += 1;
            if (tr.misses > config.max_misses) continue; // retired
            if (tr.state == TrackState::Active && tr.misses >= config.max_misses) tr.state = TrackState::Lost;
        }
        out.push_back(tr);
    }
    for (auto d : high) {
        if (det_used[d]) continue;
        Track tr;
        tr.track_id = next_id++;
        tr.bbox = dets[d].bbox;
        tr.class_id = dets[d].class_id;
        tr.confidence = dets[d].confidence;
        tr.hits = 1;
        tr.state = config.confirm_hits <= 1 ? TrackState::Active : TrackState::Tentative;
        out.push_back(tr);
    }
    return out;
}

const std::vector<Track> &Tracker::step(std::span<const Detection> dets) {
    tracks_ = tracker_step(std::move(tracks_), dets, config_, next_id_);
    return tracks_;
}

} // namespace mmfuse
