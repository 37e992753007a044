#include "mmfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <thread>

#include "mmfuse/artifacts.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/vision_dsp.hpp"

namespace mmfuse {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

int window_length(const PipelineInput &in) {
    return static_cast<int>(std::llround(in.audio.sample_rate / in.manifest.fps));
}

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd &z) {
    const Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

json box_json(const BBox &b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

const char *state_name(TrackState s) {
    switch (s) {
    case TrackState::Tentative: return "tentative";
    case TrackState::Active: return "active";
    case TrackState::Lost: return "lost";
    }
    return "unknown";
}

// Advanced-width token rows before normalisation.
std::pair<MatrixXdR, MatrixXdR> raw_tokens(const DetectionPayload &d, double confidence_floor) {
    const auto &f = *d.features;
    std::vector<std::vector<Detection>> kept;
    kept.reserve(d.detections.size());
    for (const auto &dets : d.detections) kept.push_back(filter_confidence(dets, confidence_floor));
    const auto vt = build_visual_tokens(kept, f.wavelet, f.flow);
    const auto at = build_audio_tokens(f.windows, f.source->audio.sample_rate);
    return {visual_matrix(vt, true), audio_matrix(at, true)};
}

} // namespace

// --- inputs ----------------------------------------------------------------

PipelineInput open_input(const fs::path &dir) {
    PipelineInput in;
    in.dir = dir;
    in.manifest = read_manifest(dir / "manifest.json");
    if (in.manifest.frames.empty()) throw IoError("manifest " + (dir / "manifest.json").string() + " lists no frames");
    if (!(in.manifest.fps > 0)) throw IoError("manifest " + (dir / "manifest.json").string() + " has non-positive fps");
    for (const auto &f : in.manifest.frames)
        if (!fs::exists(dir / f.file)) throw IoError("missing input file: " + (dir / f.file).string());
    const fs::path wav = dir / in.manifest.audio;
    if (!fs::exists(wav)) throw IoError("missing input file: " + wav.string());
    in.audio = read_wav(wav);
    if (fs::exists(dir / "scenario.json")) {
        in.scenario = load_scenario(dir / "scenario.json");
        in.script = in.scenario->detection_script();
    }
    return in;
}

std::size_t burst_count(const PipelineInput &input, int burst_frames) {
    const std::size_t n = input.manifest.frames.size();
    return (n + static_cast<std::size_t>(burst_frames) - 1) / static_cast<std::size_t>(burst_frames);
}

BurstPayload load_burst(const PipelineInput &input, std::size_t burst_index, int burst_frames) {
    const std::size_t n = input.manifest.frames.size();
    const std::size_t first = burst_index * static_cast<std::size_t>(burst_frames);
    if (first >= n) throw InvalidInput("load_burst: burst " + std::to_string(burst_index) + " is past the end of the input");
    const std::size_t last = std::min(n, first + static_cast<std::size_t>(burst_frames));

    BurstPayload b;
    b.burst_index = burst_index;
    b.first_window = first;
    b.burst.nominal_fps = input.manifest.fps;
    for (std::size_t i = first; i < last; ++i) {
        const auto &e = input.manifest.frames[i];
        b.burst.frames.push_back({read_pgm(input.dir / e.file), e.timestamp_s});
    }

    // One window per frame, each centred on its frame time; samples outside
    // the recording stay zero.
    const int sr = input.audio.sample_rate;
    const int w = window_length(input);
    const auto nf = static_cast<Eigen::Index>(last - first);
    const long long origin = std::llround((b.burst.frames.front().timestamp - input.audio.start_time) * sr) - w / 2;
    b.audio.sample_rate = sr;
    b.audio.start_time = input.audio.start_time + static_cast<double>(origin) / sr;
    b.audio.samples = Eigen::VectorXd::Zero(nf * w);
    const auto total = static_cast<long long>(input.audio.samples.size());
    const long long lo = std::max(0LL, origin), hi = std::min(total, origin + nf * w);
    if (hi > lo) b.audio.samples.segment(lo - origin, hi - lo) = input.audio.samples.segment(lo, hi - lo);
    return b;
}

// --- stages ----------------------------------------------------------------

Stages::Stages(const Config &config, ModelBundle models, DetectionScript script)
    : config_(config), models_(std::move(models)), script_(std::move(script)), labels_(config.events.resolve()),
      ensemble_{EnsembleStub(EnsembleMember::GeneralAudio), EnsembleStub(EnsembleMember::Speech),
                EnsembleStub(EnsembleMember::AcousticScene)},
      flow_(config.flow), tracker_(config.tracker),
      stat_window_(static_cast<std::size_t>(config.anomaly.history), config.anomaly.intensity_epsilon),
      audio_baseline_(static_cast<std::size_t>(config.anomaly.history)) {
    // The run seed perturbs the detector noise streams.
    config_.detection.fast.seed ^= config.seed * 0x9E3779B97F4A7C15ULL;
    config_.detection.accurate.seed ^= config.seed * 0x9E3779B97F4A7C15ULL;
    audio_baseline_.energy_eps = config.anomaly.energy_epsilon;
    audio_baseline_.centroid_eps = config.anomaly.centroid_epsilon;
}

Shared<FeaturePayload> Stages::features(Shared<BurstPayload> in) {
    auto out = std::make_shared<FeaturePayload>();
    out->source = in;
    for (const auto &frame : in->burst.frames) {
        Frame clean = preprocess_frame(frame, config_.nlm);
        out->wavelet.push_back(dwt2_energy(clean));
        out->flow.push_back(previous_frame_ && previous_frame_->pixels.rows() == clean.pixels.rows() &&
                                    previous_frame_->pixels.cols() == clean.pixels.cols()
                                ? flow_stats(flow_(*previous_frame_, clean))
                                : FlowStats{});
        previous_frame_ = std::move(clean);
    }
    out->windows = align_audio_to_frames(in->burst, in->audio);
    for (const auto &w : out->windows) out->spectral.push_back(spectral_stats(w.samples, in->audio.sample_rate));

    const int sr = in->audio.sample_rate;
    out->fused_audio = fuse_audio_ensemble(models_.ensemble, ensemble_[0].embed(in->audio.samples, sr),
                                           ensemble_[1].embed(in->audio.samples, sr), ensemble_[2].embed(in->audio.samples, sr));
    if (config_.runtime.analysis_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(config_.runtime.analysis_delay_ms));
    return out;
}

Shared<DetectionPayload> Stages::detect_track(Shared<FeaturePayload> in) {
    auto out = std::make_shared<DetectionPayload>();
    out->features = in;
    const auto &src = *in->source;
    for (std::size_t i = 0; i < src.burst.frames.size(); ++i) {
        const std::size_t g = src.first_window + i;
        std::vector<Detection> merged;
        if (g < script_.frames.size()) {
            const auto fast = nms(scripted_detector(g, script_, config_.detection.fast), config_.detection.nms_iou);
            const auto accurate = nms(scripted_detector(g, script_, config_.detection.accurate), config_.detection.nms_iou);
            merged = cross_detector_merge(fast, accurate, config_.detection.cross_detector_iou);
        }
        out->tracks.push_back(tracker_.step(merged));
        out->detections.push_back(std::move(merged));
    }
    return out;
}

void Stages::ensure_normalizers(const DetectionPayload &d) {
    if (models_.visual_normalizer && models_.audio_normalizer) return;
    const auto [v, a] = raw_tokens(d, config_.detection.confidence_floor);
    if (!models_.visual_normalizer) models_.visual_normalizer = FeatureNormalizer::fit(v);
    if (!models_.audio_normalizer) models_.audio_normalizer = FeatureNormalizer::fit(a);
}

std::pair<MatrixXdR, MatrixXdR> Stages::tokens(const DetectionPayload &d, bool advanced) {
    ensure_normalizers(d);
    const auto [v, a] = raw_tokens(d, config_.detection.confidence_floor);
    MatrixXdR vn = models_.visual_normalizer->apply(v);
    MatrixXdR an = models_.audio_normalizer->apply(a);
    if (advanced) return {std::move(vn), std::move(an)};
    return {vn.leftCols(kBasicVisualFeatures), an.leftCols(kBasicAudioFeatures)};
}

Shared<FusionPayload> Stages::fusion(Shared<DetectionPayload> in) {
    auto out = std::make_shared<FusionPayload>();
    out->detection = in;
    const auto [v, a] = tokens(*in, true);
    const MatrixXdR fused = in->features->fused_audio.transpose();
    const auto adv = models_.advanced.logits(v, a, fused);
    out->motion_probs = softmax(adv.motion.row(0));

    const auto [vb, ab] = tokens(*in, false);
    out->basic_motion_probs = softmax(models_.basic.logits(vb, ab).row(0));

    const int offset = config_.events.class_offset;
    for (const auto &dets : in->detections) {
        Eigen::RowVectorXd z = adv.event.row(0);
        for (const auto &d : dets) {
            const int label = d.class_id - offset;
            if (d.class_id >= offset && label < z.size()) z[label] += config_.events.evidence_gain * d.confidence;
        }
        out->event_logits.push_back(std::move(z));
    }
    return out;
}

Shared<AnomalyPayload> Stages::anomaly(Shared<FusionPayload> in) {
    auto out = std::make_shared<AnomalyPayload>();
    out->fusion = in;
    const auto &feat = *in->detection->features;
    const auto &src = *feat.source;
    for (std::size_t i = 0; i < src.burst.frames.size(); ++i) {
        const Frame &frame = src.burst.frames[i];
        MethodScores s{};
        s[Statistical] = zscore_score(stat_window_, frame);
        if (models_.autoencoder) {
            s[Reconstruction] = autoencoder_score(*models_.autoencoder, frame);
        } else {
            ae_warmup_.push_back(frame);
            if (static_cast<int>(ae_warmup_.size()) >= config_.anomaly.warmup_frames) {
                models_.autoencoder = autoencoder_train(ae_warmup_, config_.anomaly.autoencoder);
                ae_warmup_.clear();
            }
        }
        s[Audio] = audio_anomaly_score(feat.spectral[i], audio_baseline_);
        const auto &z = in->event_logits[i];
        const auto ev = event_anomaly_score(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())), labels_.anomaly_ids,
                                            config_.events.probability_threshold);
        s[Event] = ev.score;

        AnomalyReport r = combine_scores(s, config_.anomaly.weights, config_.anomaly.threshold);
        r.timestamp = frame.timestamp;
        r.window = src.first_window + i;
        for (int id : ev.labels) r.contributing_events.push_back(labels_.names[static_cast<std::size_t>(id)]);
        out->reports.push_back(std::move(r));
    }
    return out;
}

// --- run -------------------------------------------------------------------

LatencyStats latency_stats(std::vector<double> v) {
    LatencyStats s;
    s.samples = v.size();
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    auto rank = [&](double q) {
        const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
        return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
    };
    s.p50_ms = rank(0.50);
    s.p95_ms = rank(0.95);
    s.max_ms = v.back();
    return s;
}

json RunResult::summary() const {
    json stages_json = json::array();
    for (const auto &s : stages)
        stages_json.push_back({{"name", s.name},
                               {"received", s.received},
                               {"processed", s.processed},
                               {"dropped", s.dropped},
                               {"max_depth", s.max_depth},
                               {"latency_ms", {{"p50", s.latency.p50_ms}, {"p95", s.latency.p95_ms}, {"max", s.latency.max_ms}}}});
    return {{"bursts_ingested", bursts_ingested},
            {"windows_processed", windows_processed},
            {"anomalies_triggered", anomalies_triggered},
            {"artifacts", artifacts.size()},
            {"stages", stages_json}};
}

ModelBundle models_for(const Config &config) {
    if (config.runtime.model_dir.empty()) return ModelBundle::init(config);
    return load_models(config.runtime.model_dir, config);
}

namespace {

// Turns one processed burst into log records and, for triggered windows,
// artifacts. Owned by the sink.
class Sink {
public:
    Sink(const EventLabels &labels, fs::path artifact_root, RunResult &result)
        : labels_(labels), artifact_root_(std::move(artifact_root)), result_(result) {}

    void consume(const AnomalyPayload &p) {
        const auto &fusion = *p.fusion;
        const auto &det = *fusion.detection;
        const auto &feat = *det.features;
        const auto &src = *feat.source;

        result_.records.push_back({src.burst.frames.front().timestamp, src.first_window, EventKind::Metric,
                                   {{"burst", src.burst_index}, {"frames", src.burst.frames.size()}}});
        for (std::size_t i = 0; i < src.burst.frames.size(); ++i) {
            const double t = src.burst.frames[i].timestamp;
            const std::size_t w = src.first_window + i;

            json dets = json::array();
            for (const auto &d : det.detections[i])
                dets.push_back({{"class_id", d.class_id},
                                {"confidence", d.confidence},
                                {"bbox", box_json(d.bbox)},
                                {"source", d.source == DetectorSource::Fast ? "fast" : "accurate"}});
            result_.records.push_back({t, w, EventKind::Detection, {{"detections", dets}}});

            json tracks = json::array();
            for (const auto &tr : det.tracks[i])
                tracks.push_back({{"track_id", tr.track_id}, {"class_id", tr.class_id}, {"state", state_name(tr.state)},
                                  {"bbox", box_json(tr.bbox)}, {"age", tr.age}, {"misses", tr.misses}});
            result_.records.push_back({t, w, EventKind::Track, {{"tracks", tracks}}});

            Eigen::Index motion = 0, basic_motion = 0, event = 0;
            const double motion_p = fusion.motion_probs.maxCoeff(&motion);
            const double basic_p = fusion.basic_motion_probs.maxCoeff(&basic_motion);
            const Eigen::RowVectorXd ep = softmax(fusion.event_logits[i]);
            const double event_p = ep.maxCoeff(&event);
            result_.records.push_back({t, w, EventKind::Classification,
                                       {{"motion", motion},
                                        {"motion_confidence", motion_p},
                                        {"motion_basic", basic_motion},
                                        {"motion_basic_confidence", basic_p},
                                        {"event", labels_.names[static_cast<std::size_t>(event)]},
                                        {"event_confidence", event_p}}});

            const AnomalyReport &r = p.reports[i];
            json payload = to_json(r);
            if (r.triggered) {
                ++result_.anomalies_triggered;
                if (!artifact_root_.empty()) {
                    try {
                        const auto paths = persist_anomaly_artifact(r, src.burst.frames[i], feat.windows[i].samples,
                                                                    src.audio.sample_rate, artifact_root_);
                        payload["artifact"] = paths.directory.filename().string();
                        result_.artifacts.push_back(paths.directory);
                    } catch (const IoError &e) {
                        std::cerr << "warning: artifact for window " << w << " not saved: " << e.what() << '\n';
                        payload["artifact_error"] = e.what();
                    }
                }
            }
            result_.records.push_back({t, w, EventKind::Anomaly, std::move(payload)});
            result_.reports.push_back(r);
            ++result_.windows_processed;
        }
    }

private:
    const EventLabels &labels_;
    fs::path artifact_root_;
    RunResult &result_;
};

template <typename In>
StageCounters counters(const std::string &name, const StageQueue<In> &q, std::vector<double> latencies) {
    return {name, q.pushed(), q.popped(), q.dropped(), q.max_depth(), latency_stats(std::move(latencies))};
}

} // namespace

RunResult run_pipeline(const PipelineInput &input, const Config &config, const ModelBundle &models, const fs::path &out_dir) {
    config.validate();
    const int bf = config.runtime.burst_frames;
    const std::size_t bursts = burst_count(input, bf);
    std::size_t capacity = static_cast<std::size_t>(config.runtime.queue_capacity);
    if (config.runtime.deterministic) capacity = std::max(capacity, bursts);

    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    }

    Stages stages(config, models, input.script);
    RunResult result;
    Sink sink(stages.labels(), out_dir.empty() ? fs::path{} : out_dir / "artifacts", result);

    StageQueue<Shared<BurstPayload>> q_features(capacity);
    StageQueue<Shared<FeaturePayload>> q_detect(capacity);
    StageQueue<Shared<DetectionPayload>> q_fusion(capacity);
    StageQueue<Shared<FusionPayload>> q_anomaly(capacity);
    StageQueue<Shared<AnomalyPayload>> q_sink(capacity);
    std::array<std::vector<double>, 6> lat; // ingest, features, detect_track, fusion, anomaly, sink

    auto ingest_one = [&](std::size_t b) {
        const auto t0 = Clock::now();
        auto payload = std::make_shared<const BurstPayload>(load_burst(input, b, bf));
        lat[0].push_back(ms_since(t0));
        ++result.bursts_ingested;
        q_features.push(std::move(payload));
    };
    auto sink_one = [&](const Shared<AnomalyPayload> &p) {
        const auto t0 = Clock::now();
        sink.consume(*p);
        lat[5].push_back(ms_since(t0));
    };

    if (!config.runtime.threaded) {
        for (std::size_t b = 0; b < bursts; ++b) {
            ingest_one(b);
            auto timed = [&](auto &in, auto &out, std::size_t slot, auto fn) {
                while (auto item = in.try_pop()) {
                    const auto t0 = Clock::now();
                    auto r = fn(std::move(*item));
                    lat[slot].push_back(ms_since(t0));
                    out.push(std::move(r));
                }
            };
            timed(q_features, q_detect, 1, [&](auto x) { return stages.features(std::move(x)); });
            timed(q_detect, q_fusion, 2, [&](auto x) { return stages.detect_track(std::move(x)); });
            timed(q_fusion, q_anomaly, 3, [&](auto x) { return stages.fusion(std::move(x)); });
            timed(q_anomaly, q_sink, 4, [&](auto x) { return stages.anomaly(std::move(x)); });
            while (auto p = q_sink.try_pop()) sink_one(*p);
        }
    } else {
        std::mutex err_mu;
        std::exception_ptr error;
        auto fail = [&] {
            std::lock_guard lock(err_mu);
            if (!error) error = std::current_exception();
        };
        auto worker = [&](auto &in, auto &out, std::size_t slot, auto fn) {
            return std::thread([&in, &out, slot, fn, &lat, &fail] {
                try {
                    while (auto item = in.pop()) {
                        const auto t0 = Clock::now();
                        auto r = fn(std::move(*item));
                        lat[slot].push_back(ms_since(t0));
                        out.push(std::move(r));
                    }
                } catch (...) {
                    fail();
                }
                out.close();
            });
        };
        std::vector<std::thread> threads;
        threads.emplace_back([&] {
            try {
                for (std::size_t b = 0; b < bursts; ++b) ingest_one(b);
            } catch (...) {
                fail();
            }
            q_features.close();
        });
        threads.push_back(worker(q_features, q_detect, 1, [&](Shared<BurstPayload> x) { return stages.features(std::move(x)); }));
        threads.push_back(worker(q_detect, q_fusion, 2, [&](Shared<FeaturePayload> x) { return stages.detect_track(std::move(x)); }));
        threads.push_back(worker(q_fusion, q_anomaly, 3, [&](Shared<DetectionPayload> x) { return stages.fusion(std::move(x)); }));
        threads.push_back(worker(q_anomaly, q_sink, 4, [&](Shared<FusionPayload> x) { return stages.anomaly(std::move(x)); }));
        try {
            while (auto p = q_sink.pop()) sink_one(*p);
        } catch (...) {
            fail();
            // Keep draining so upstream workers can finish.
            while (q_sink.pop()) {
            }
        }
        for (auto &t : threads) t.join();
        if (error) std::rethrow_exception(error);
    }

    result.stages.push_back({"ingest", bursts, result.bursts_ingested, 0, 0, latency_stats(lat[0])});
    result.stages.push_back(counters("features", q_features, lat[1]));
    result.stages.push_back(counters("detect_track", q_detect, lat[2]));
    result.stages.push_back(counters("fusion", q_fusion, lat[3]));
    result.stages.push_back(counters("anomaly", q_anomaly, lat[4]));
    result.stages.push_back(counters("sink", q_sink, lat[5]));

    if (!out_dir.empty()) {
        write_event_log(out_dir / "events.jsonl", result.records);
        std::ofstream s(out_dir / "summary.json");
        if (!s) throw IoError("cannot write " + (out_dir / "summary.json").string());
        s << result.summary().dump(2) << '\n';
    }
    return result;
}

// --- training ----------------------------------------------------------------

TrainReport train_models(const PipelineInput &input, const Config &config, const TrainOptions &options, ModelBundle &models) {
    if (!input.scenario) throw InvalidInput("training needs scenario.json ground truth in " + input.dir.string());
    const Scenario &sc = *input.scenario;
    const int bf = config.runtime.burst_frames;

    Stages stages(config, models, input.script);
    std::vector<Shared<DetectionPayload>> bursts;
    for (std::size_t b = 0; b < burst_count(input, bf); ++b)
        bursts.push_back(stages.detect_track(stages.features(std::make_shared<const BurstPayload>(load_burst(input, b, bf)))));

    // Global per-window rows and the burst each window came from.
    MatrixXdR visual(0, kAdvancedVisualFeatures), audio(0, kAdvancedAudioFeatures);
    std::vector<std::size_t> owner;
    std::vector<Frame> normal_frames;
    for (std::size_t b = 0; b < bursts.size(); ++b) {
        const auto [v, a] = raw_tokens(*bursts[b], config.detection.confidence_floor);
        MatrixXdR vv(visual.rows() + v.rows(), v.cols()), aa(audio.rows() + a.rows(), a.cols());
        vv << visual, v;
        aa << audio, a;
        visual = std::move(vv);
        audio = std::move(aa);
        const auto &src = *bursts[b]->features->source;
        for (std::size_t i = 0; i < src.burst.frames.size(); ++i) {
            owner.push_back(b);
            if (!sc.injected(static_cast<int>(src.first_window + i))) normal_frames.push_back(src.burst.frames[i]);
        }
    }
    models.visual_normalizer = FeatureNormalizer::fit(visual);
    models.audio_normalizer = FeatureNormalizer::fit(audio);
    const MatrixXdR vn = models.visual_normalizer->apply(visual), an = models.audio_normalizer->apply(audio);

    // Sliding sequences of burst length, subsampled to at most 32.
    const auto n = static_cast<int>(vn.rows());
    const int len = std::min(bf, n);
    const int count = n - len + 1;
    const int stride = std::max(1, count / 32);
    std::vector<LabeledSequence<double>> basic_set, advanced_set;
    for (int s = 0; s < count; s += stride) {
        int moving = 0;
        std::vector<int> votes(kEventClasses, 0);
        for (int k = s; k < s + len; ++k) {
            moving += sc.motion_label(k);
            ++votes[static_cast<std::size_t>(sc.event_label(k))];
        }
        votes[0] = 0;
        const auto best = std::max_element(votes.begin(), votes.end());
        const int event = *best > 0 ? static_cast<int>(best - votes.begin()) : 0;
        const int motion = 2 * moving >= len ? 1 : 0;
        const MatrixXdR fused = bursts[owner[static_cast<std::size_t>(s)]]->features->fused_audio.transpose();
        basic_set.push_back({vn.middleRows(s, len).leftCols(kBasicVisualFeatures), an.middleRows(s, len).leftCols(kBasicAudioFeatures),
                             Mat<double>(), motion, event});
        advanced_set.push_back({vn.middleRows(s, len), an.middleRows(s, len), fused, motion, event});
    }

    TrainReport report;
    report.sequences = basic_set.size();
    GradientDescent<double> basic_opt(options.learning_rate, options.momentum);
    for (int step = 0; step < options.basic_steps; ++step) {
        const double loss = train_step(models.basic, std::span<const LabeledSequence<double>>(basic_set), basic_opt);
        if (step == 0) report.basic_loss_first = loss;
        report.basic_loss_last = loss;
    }
    GradientDescent<double> adv_opt(options.learning_rate, options.momentum);
    for (int step = 0; step < options.advanced_steps; ++step) {
        const double loss = train_step(models.advanced, std::span<const LabeledSequence<double>>(advanced_set), adv_opt);
        if (step == 0) report.advanced_loss_first = loss;
        report.advanced_loss_last = loss;
    }

    if (static_cast<int>(normal_frames.size()) >= config.anomaly.warmup_frames) {
        models.autoencoder = autoencoder_train(normal_frames, config.anomaly.autoencoder);
        report.autoencoder_mse = models.autoencoder->train_mse;
    }
    return report;
}

} // namespace mmfuse
