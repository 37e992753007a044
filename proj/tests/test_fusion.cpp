#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "gradcheck_suite.hpp"
#include "helpers.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/fusion.hpp"
#include "oracles.hpp"
#include "training_sets.hpp"

using namespace mmfuse;
using M = Mat<double>;

TEST_CASE("visual tokens") {
    std::vector<std::vector<Detection>> dets(2);
    dets[1] = {{{0, 0, 1, 1}, 0.4, 0}, {{0, 0, 1, 1}, 0.6, 0}};
    std::vector<WaveletEnergy> wav(2);
    wav[1].subband[LL2] = 5;
    wav[1].subband[HH1] = 2;
    wav[1].total = 7;
    const auto t = build_visual_tokens(dets, wav);
    CHECK(t[0].bbox_count == 0);
    CHECK(t[0].mean_confidence == 0);
    CHECK(t[0].wavelet_energy == 0);
    CHECK(t[1].bbox_count == 2);
    CHECK(t[1].mean_confidence == doctest::Approx(0.5));
    CHECK(t[1].wavelet_energy == 2);
    CHECK_THROWS_AS(build_visual_tokens(dets, std::span<const WaveletEnergy>(wav.data(), 1)), InvalidInput);
}

TEST_CASE("audio tokens") {
    std::vector<AlignedWindow> w(2);
    w[0].samples = Eigen::VectorXd::Zero(3200);
    w[1].samples = testing::tone(1000, 3200, 16000, 0.5);
    const auto t = build_audio_tokens(w, 16000);
    REQUIRE(t.size() == 2);
    CHECK(t[0].zcr == 0);
    CHECK(t[0].centroid_hz == 0);
    CHECK(t[0].energy == 0);
    std::vector<double> x(w[1].samples.data(), w[1].samples.data() + 3200);
    CHECK(t[1].centroid_hz == doctest::Approx(oracle::dft_centroid(x, 16000)).epsilon(1e-9));
    CHECK(std::abs(t[1].centroid_hz - 1000) < 10);
}

TEST_CASE("normalizer") {
    M rows(3, 2);
    rows << 1, 5, 2, 5, 3, 5;
    const auto n = FeatureNormalizer::fit(rows);
    const M z = n.apply(rows);
    CHECK(z.col(0).sum() == doctest::Approx(0.0));
    CHECK(z(0, 1) == 0.0);
    const auto back = FeatureNormalizer::from_json(n.to_json());
    CHECK(back.apply(rows) == z);
}

TEST_CASE("ensemble fusion") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(kEnsembleEmbedDim);
    auto layer = AudioEnsembleFusion::init(3);
    CHECK(layer.in_dim() == 768);
    CHECK(layer.out_dim() == 256);
    layer.bias.setZero();
    CHECK(fuse_audio_ensemble(layer, zero, zero, zero).isZero(0));

    // Selection matrix picking the first 256 coordinates.
    std::mt19937_64 rng(8);
    const Eigen::VectorXd e1 = oracle::random_matrix(768, 1, rng), e2 = oracle::random_matrix(768, 1, rng),
                          e3 = oracle::random_matrix(768, 1, rng);
    AudioEnsembleFusion sel;
    sel.weight = Eigen::MatrixXd::Zero(256, 3 * 768);
    sel.weight.leftCols(256).setIdentity();
    sel.bias = Eigen::VectorXd::Zero(256);
    CHECK(fuse_audio_ensemble(sel, e1, e2, e3) == e1.head(256));

    // Scalar dot-product oracle.
    const auto l2 = AudioEnsembleFusion::init(11);
    const auto out = fuse_audio_ensemble(l2, e1, e2, e3);
    double worst = 0;
    for (int o = 0; o < 256; ++o) {
        double s = l2.bias[o];
        for (int i = 0; i < 768; ++i) s += l2.weight(o, i) * e1[i] + l2.weight(o, 768 + i) * e2[i] + l2.weight(o, 1536 + i) * e3[i];
        worst = std::max(worst, std::abs(s - out[o]));
    }
    CHECK(worst < 1e-10);
    CHECK_THROWS_AS(fuse_audio_ensemble(l2, e1.head(10).eval(), e2, e3), InvalidInput);
}

TEST_CASE("ensemble stubs are deterministic and distinct") {
    const auto x = testing::tone(700, 3200, 16000, 0.3);
    const EnsembleStub a(EnsembleMember::GeneralAudio), b(EnsembleMember::Speech);
    CHECK(a.embed(x, 16000) == EnsembleStub(EnsembleMember::GeneralAudio).embed(x, 16000));
    CHECK(a.embed(x, 16000).size() == 768);
    CHECK(a.embed(x, 16000) != b.embed(x, 16000));
}

TEST_CASE("event labels") {
    const auto l = EventLabels::defaults();
    CHECK(l.names.size() == kEventClasses);
    CHECK(l.id_of("fire") >= 0);
    CHECK(l.id_of("no such label") == -1);
    CHECK(!l.anomaly_ids.empty());
}

TEST_CASE("basic model matches the scalar reference forward") {
    std::mt19937_64 rng(12);
    const auto model = BasicFusionModel<double>::init(FusionDims::basic(), 5);
    const M vis = oracle::random_matrix(6, 3, rng), aud = oracle::random_matrix(6, 4, rng);
    AttentionTrace<double> trace;
    const M got = model.logits(vis, aud, &trace);
    std::vector<oracle::Matrix> ref_trace;
    const auto ref = oracle::basic_forward(model, oracle::to_rows(vis), oracle::to_rows(aud), &ref_trace);
    CHECK(oracle::max_abs_diff(ref, got) < 1e-8);
    REQUIRE(trace.weights.size() == 2 * 4);
    for (std::size_t i = 0; i < trace.weights.size(); ++i) {
        CHECK(oracle::max_abs_diff(ref_trace[i], trace.weights[i]) < 1e-10);
        for (Eigen::Index r = 0; r < trace.weights[i].rows(); ++r) CHECK(std::abs(trace.weights[i].row(r).sum() - 1.0) < 1e-9);
    }
}

TEST_CASE("basic model pooling properties") {
    std::mt19937_64 rng(13);
    const auto model = BasicFusionModel<double>::init(FusionDims::basic(), 6);
    const M vis = oracle::random_matrix(5, 3, rng), aud = oracle::random_matrix(5, 4, rng);
    std::vector<int> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    M pv(5, 3), pa(5, 4);
    for (int i = 0; i < 5; ++i) pv.row(i) = vis.row(perm[i]), pa.row(i) = aud.row(perm[i]);
    CHECK((model.logits(vis, aud) - model.logits(pv, pa)).cwiseAbs().maxCoeff() < 1e-10);

    // T = 1: the pooled vector is the single encoded token.
    const M v1 = vis.topRows(1), a1 = aud.topRows(1);
    const auto ref = oracle::basic_forward(model, oracle::to_rows(v1), oracle::to_rows(a1));
    CHECK(oracle::max_abs_diff(ref, model.logits(v1, a1)) < 1e-8);

    CHECK_THROWS_AS(model.logits(vis, aud.topRows(4)), InvalidInput);
    CHECK_THROWS_AS(model.logits(M(0, 3), M(0, 4)), InvalidInput);
    CHECK_THROWS_AS(model.logits(aud, aud), InvalidInput);
}

TEST_CASE("advanced model matches the scalar reference forward") {
    std::mt19937_64 rng(14);
    const auto model = AdvancedFusionModel<double>::init(FusionDims::advanced(), 9);
    const M vis = oracle::random_matrix(10, 4, rng), aud = oracle::random_matrix(10, 5, rng), fused = oracle::random_matrix(1, 256, rng);
    AttentionTrace<double> trace;
    const auto got = model.logits(vis, aud, fused, &trace);
    std::vector<oracle::Matrix> ref_trace;
    const auto ref = oracle::advanced_forward(model, oracle::to_rows(vis), oracle::to_rows(aud), oracle::to_rows(fused), &ref_trace);
    CHECK(got.motion.cols() == 2);
    CHECK(got.event.cols() == 32);
    CHECK(oracle::max_abs_diff(ref.motion, got.motion) < 1e-8);
    CHECK(oracle::max_abs_diff(ref.event, got.event) < 1e-8);
    REQUIRE(trace.weights.size() == 4 * 2 * 8);
    for (const auto &w : trace.weights)
        for (Eigen::Index r = 0; r < w.rows(); ++r) CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-9);
}

TEST_CASE("advanced model with zero parameters outputs the head biases") {
    auto model = AdvancedFusionModel<double>::init(FusionDims::advanced(), 10);
    auto &ps = model.params();
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (ps.name(i) != "motion_head.b" && ps.name(i) != "event_head.b") ps.at(i).setZero();
    const auto out = model.logits(M::Zero(3, 4), M::Zero(3, 5), M::Zero(1, 256));
    CHECK(out.motion == ps["motion_head.b"]);
    CHECK(out.event == ps["event_head.b"]);
}

TEST_CASE("advanced model at T = 1 reduces to a residual stack") {
    // With a single token each attention weight is 1, so attention returns the
    // value projection of the other stream. Evaluate that by hand.
    const auto dims = testing::tiny_dims(true);
    const auto model = AdvancedFusionModel<double>::init(dims, 4);
    std::mt19937_64 rng(15);
    const M vis = oracle::random_matrix(1, 4, rng), aud = oracle::random_matrix(1, 5, rng), fused = oracle::random_matrix(1, 8, rng);
    const oracle::Params p{model.params()};
    auto v = oracle::add(p.lin("visual_proj", oracle::to_rows(vis)), oracle::cols({p("visual_pos")[0]}, 0, 8));
    auto a = oracle::add(oracle::add(p.lin("audio_proj", oracle::to_rows(aud)), {p("audio_pos")[0]}), oracle::to_rows(fused));
    for (int l = 0; l < dims.layers; ++l) {
        const std::string pre = "layers." + std::to_string(l);
        const auto va = p.lin(pre + ".v2a.o", p.lin(pre + ".v2a.v", a));
        const auto av = p.lin(pre + ".a2v.o", p.lin(pre + ".a2v.v", v));
        v = p.ln(pre + ".visual_norm1", oracle::add(v, va));
        a = p.ln(pre + ".audio_norm1", oracle::add(a, av));
        v = p.ln(pre + ".visual_norm2", oracle::add(v, p.ffn(pre + ".visual_ffn", v)));
        a = p.ln(pre + ".audio_norm2", oracle::add(a, p.ffn(pre + ".audio_ffn", a)));
    }
    auto pooled = v;
    pooled[0].insert(pooled[0].end(), a[0].begin(), a[0].end());
    const auto got = model.logits(vis, aud, fused);
    CHECK(oracle::max_abs_diff(p.lin("motion_head", pooled), got.motion) < 1e-10);
    CHECK(oracle::max_abs_diff(p.lin("event_head", pooled), got.event) < 1e-10);
}

TEST_CASE("advanced model shape errors") {
    const auto model = AdvancedFusionModel<double>::init(FusionDims::advanced(), 1);
    CHECK_THROWS_AS(model.logits(M::Zero(3, 4), M::Zero(3, 5), M::Zero(1, 100)), InvalidInput);
    CHECK_THROWS_AS(model.logits(M::Zero(65, 4), M::Zero(65, 5), M::Zero(1, 256)), InvalidInput);
}

TEST_CASE("motion prediction is invariant to audio gain") {
    const auto model = BasicFusionModel<double>::init(FusionDims::basic(), 21);
    std::mt19937_64 rng(16);
    std::normal_distribution<double> g(0.0, 0.2);
    std::vector<AlignedWindow> w(4);
    for (auto &x : w) {
        x.samples.resize(3200);
        for (auto &s : x.samples) s = g(rng);
    }
    auto scaled = w;
    for (auto &x : scaled) x.samples *= 3.0;
    const M vis = oracle::random_matrix(4, 3, rng);
    const M a1 = audio_matrix(build_audio_tokens(w, 16000), false), a2 = audio_matrix(build_audio_tokens(scaled, 16000), false);
    CHECK((a1 - a2).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(argmax(model.logits(vis, a1)) == argmax(model.logits(vis, a2)));
    // Energy rises with gain.
    CHECK(build_audio_tokens(scaled, 16000)[0].energy > build_audio_tokens(w, 16000)[0].energy);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    auto model = BasicFusionModel<double>::init(FusionDims::basic(), 2);
    const auto before = model.params();
    const auto set = testing::separable_set(4, 3, 1);
    const double loss = train_step(model, std::span<const testing::Seq>(set), 0.0);
    CHECK(std::isfinite(loss));
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.params().at(i) == before.at(i));

    auto adv = AdvancedFusionModel<double>::init(testing::tiny_dims(true), 2);
    const auto adv_before = adv.params();
    testing::Seq ex;
    ex.visual = M::Ones(2, 4);
    ex.audio = M::Ones(2, 5);
    ex.fused = M::Zero(1, 8);
    ex.event = 2;
    const std::vector<testing::Seq> batch{ex};
    train_step(adv, std::span<const testing::Seq>(batch), 0.0);
    for (std::size_t i = 0; i < adv_before.size(); ++i) CHECK(adv.params().at(i) == adv_before.at(i));
}

TEST_CASE("invalid labels are rejected") {
    auto model = BasicFusionModel<double>::init(FusionDims::basic(), 2);
    auto set = testing::separable_set(1, 3, 1);
    set[0].motion = 2;
    CHECK_THROWS_AS(train_step(model, std::span<const testing::Seq>(set), 0.1), InvalidInput);
}

TEST_CASE("repeated example loss decreases") {
    const auto losses = testing::repeated_example_losses(3);
    CHECK(testing::decreases_over_every_span(losses));
    CHECK(losses.back() < 0.1);
}

TEST_CASE("full model gradients pass finite differences") {
    for (const auto &c : testing::run_gradcheck_suite(1)) {
        INFO(c.name << " " << c.worst);
        CHECK(c.max_rel_error < 1e-4);
        CHECK(c.invariant_grad < 1e-12);
    }
}
