#include <doctest.h>

#include <random>
#include <vector>

#include "helpers.hpp"
#include "mmfuse/audio_dsp.hpp"
#include "mmfuse/error.hpp"
#include "oracles.hpp"

using namespace mmfuse;

namespace {
std::vector<double> to_std(const Eigen::VectorXd &v) { return {v.data(), v.data() + v.size()}; }
} // namespace

TEST_CASE("stft shape") {
    const auto spec = stft(Eigen::VectorXd::Zero(32000), 1024, 512, 16000);
    CHECK(spec.frames() == 61);
    CHECK(spec.bins() == 513);
    CHECK_THROWS_AS(stft(Eigen::VectorXd::Zero(100), 1024, 512, 16000), InvalidInput);
}

TEST_CASE("stft dominant bin agrees with a naive DFT") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> f(100.0, 7000.0);
    const auto hann = hann_window(1024);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = testing::tone(f(rng), 2048, 16000);
        const auto spec = stft(x, 1024, 512, 16000);
        std::vector<double> frame(1024);
        for (int i = 0; i < 1024; ++i) frame[static_cast<std::size_t>(i)] = x[512 + i] * hann[i];
        const auto ref = oracle::naive_dft_magnitude(frame);
        Eigen::Index got = 0;
        spec.magnitudes.row(1).maxCoeff(&got);
        const auto want = std::max_element(ref.begin(), ref.end()) - ref.begin();
        CHECK(got == want);
        for (Eigen::Index k = 0; k < spec.bins(); ++k) CHECK(spec.magnitudes(1, k) == doctest::Approx(ref[static_cast<std::size_t>(k)]).epsilon(1e-9).scale(1));
    }
}

TEST_CASE("mel energy of white noise") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 0.3);
    Eigen::VectorXd x(16000);
    for (auto &v : x) v = g(rng);
    const auto spec = stft(x, 1024, 512, 16000);
    const auto mel = mel_spectrogram(spec);
    CHECK(mel.bands.cols() == kMelBands);
    CHECK(mel.bands.minCoeff() > 0.0);
    CHECK(mel.bands.sum() <= spec.magnitudes.array().square().sum());
    CHECK(mel.filters.maxCoeff() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("mel scale round trip") {
    for (double hz : {0.0, 100.0, 1000.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
    CHECK(hz_to_mel(1000.0) == doctest::Approx(1000.0).epsilon(0.01));
}

TEST_CASE("cwt of a sine peaks at the nearest pseudo-frequency") {
    const auto scales = morlet_scales(32);
    for (double hz : {300.0, 1000.0, 2500.0}) {
        const auto x = testing::tone(hz, 4096, 16000);
        const auto sg = cwt_scalogram(x, scales, 16000);
        const Eigen::VectorXd mid = sg.magnitudes.col(2048);
        Eigen::Index got = 0;
        mid.maxCoeff(&got);
        Eigen::Index want = 0;
        double best = 1e300;
        for (Eigen::Index i = 0; i < scales.size(); ++i) {
            const double d = std::abs(std::log(morlet_scale_to_frequency(scales[i]) / hz));
            if (d < best) best = d, want = i;
        }
        CHECK(std::abs(got - want) <= 1);
    }
}

TEST_CASE("cwt matches direct time-domain convolution") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Eigen::VectorXd x(1024);
    for (auto &v : x) v = g(rng);
    Eigen::VectorXd scales(3);
    scales << morlet_frequency_to_scale(1000.0), morlet_frequency_to_scale(700.0), morlet_frequency_to_scale(500.0);
    const auto sg = cwt_scalogram(x, scales, 16000);
    const auto xs = to_std(x);
    for (Eigen::Index si = 0; si < scales.size(); ++si)
        for (std::size_t n : {100u, 500u, 900u}) {
            const double ref = oracle::cwt_magnitude_at(xs, scales[si], 16000, n);
            CHECK(sg.magnitudes(si, static_cast<Eigen::Index>(n)) == doctest::Approx(ref).epsilon(1e-3));
        }
}

TEST_CASE("cwt impulse response follows the wavelet envelope") {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2048);
    x[1024] = 1.0;
    const double s = morlet_frequency_to_scale(800.0), dt = 1.0 / 16000;
    Eigen::VectorXd scales(1);
    scales << s;
    const auto sg = cwt_scalogram(x, scales, 16000);
    for (int off : {0, 5, 10, 20}) {
        const double eta = off * dt / s;
        const double env = std::sqrt(dt / s) * std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * eta * eta);
        CHECK(sg.magnitudes(0, 1024 + off) == doctest::Approx(env).epsilon(1e-3));
        CHECK(sg.magnitudes(0, 1024 - off) == doctest::Approx(env).epsilon(1e-3));
    }
}

TEST_CASE("cwt rejects non-positive scales") {
    Eigen::VectorXd scales(2);
    scales << 0.0, 1e-3;
    CHECK_THROWS_AS(cwt_scalogram(Eigen::VectorXd::Ones(64), scales, 16000), InvalidInput);
    scales << -1e-3, 1e-3;
    CHECK_THROWS_AS(cwt_scalogram(Eigen::VectorXd::Ones(64), scales, 16000), InvalidInput);
}

TEST_CASE("spectral stats hand cases") {
    Eigen::VectorXd alt(4);
    alt << 1, -1, 1, -1;
    CHECK(spectral_stats(alt, 16000).zcr == 1.0);

    const auto flat = spectral_stats(Eigen::VectorXd::Constant(3200, 0.5), 16000);
    CHECK(flat.zcr == 0.0);
    CHECK(flat.centroid_hz == 0.0);
    CHECK(flat.energy == doctest::Approx(0.25));

    const auto silent = spectral_stats(Eigen::VectorXd::Zero(3200), 16000);
    CHECK(silent.centroid_hz == 0.0);
    CHECK(silent.energy == 0.0);
}

TEST_CASE("spectral centroid of pure tones within 1 percent") {
    for (double hz = 500; hz <= 4000; hz += 250) {
        const auto st = spectral_stats(testing::tone(hz, 3200, 16000, 0.3), 16000);
        CHECK(std::abs(st.centroid_hz - hz) / hz < 0.01);
    }
}

TEST_CASE("spectral centroid matches the DFT oracle") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Eigen::VectorXd x(800);
    for (auto &v : x) v = g(rng);
    CHECK(spectral_stats(x, 16000).centroid_hz == doctest::Approx(oracle::dft_centroid(to_std(x), 16000)).epsilon(1e-9));
}

TEST_CASE("spectral stats scale covariance") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    Eigen::VectorXd x(3200);
    for (auto &v : x) v = g(rng);
    const auto a = spectral_stats(x, 16000), b = spectral_stats(3.0 * x, 16000);
    CHECK(b.zcr == a.zcr);
    CHECK(b.centroid_hz == doctest::Approx(a.centroid_hz));
    CHECK(b.bandwidth_hz == doctest::Approx(a.bandwidth_hz));
    CHECK(b.rolloff_hz == doctest::Approx(a.rolloff_hz));
    CHECK(b.energy == doctest::Approx(9.0 * a.energy));
}
