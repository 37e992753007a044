#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/media_io.hpp"

using namespace mmfuse;

TEST_CASE("pgm round trip") {
    testing::TempDir dir("pgm");
    PixelGrid px(7, 5);
    for (Eigen::Index i = 0; i < px.size(); ++i) px.data()[i] = static_cast<std::uint8_t>(i * 7);
    write_pgm(dir.path / "a.pgm", px);
    CHECK(read_pgm(dir.path / "a.pgm") == px);
    CHECK_THROWS_AS(read_pgm(dir.path / "missing.pgm"), IoError);
}

TEST_CASE("wav round trips exactly on the 16-bit grid") {
    testing::TempDir dir("wav");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd x(4000);
    for (auto &v : x) v = u(rng);
    const Eigen::VectorXd q = quantize_pcm16(x);
    write_wav(dir.path / "a.wav", q, 16000);
    const auto clip = read_wav(dir.path / "a.wav");
    CHECK(clip.sample_rate == 16000);
    CHECK(clip.samples == q);
    CHECK((q - x).cwiseAbs().maxCoeff() <= 0.5 / 32767 + 1e-12);
}

TEST_CASE("manifest round trip") {
    testing::TempDir dir("manifest");
    Manifest m;
    m.fps = 5;
    m.frames = {{"frames/a.pgm", 0.0}, {"frames/b.pgm", 0.2}};
    write_manifest(dir.path / "manifest.json", m);
    const auto r = read_manifest(dir.path / "manifest.json");
    CHECK(r.fps == 5);
    REQUIRE(r.frames.size() == 2);
    CHECK(r.frames[1].file == "frames/b.pgm");
    CHECK(r.frames[1].timestamp_s == doctest::Approx(0.2));
}

TEST_CASE("luma conversion") {
    PixelGrid r = PixelGrid::Constant(2, 2, 255), g = PixelGrid::Zero(2, 2), b = PixelGrid::Zero(2, 2);
    CHECK(rgb_to_gray(r, g, b)(0, 0) == 76);
    CHECK(rgb_to_gray(r, r, r)(1, 1) == 255);
}
