#include <doctest.h>

#include "helpers.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/timebase.hpp"

using namespace mmfuse;

TEST_CASE("canonical burst gives ten 3200-sample windows") {
    const auto burst = testing::uniform_burst(10, 5.0);
    AudioClip clip;
    clip.samples = Eigen::VectorXd::LinSpaced(32000, -1.0, 1.0);
    const auto windows = align_audio_to_frames(burst, clip);
    REQUIRE(windows.size() == 10);
    for (const auto &w : windows) CHECK(w.samples.size() == 3200);

    // Frame 0 sits on the first sample: the left half of its window is padding.
    CHECK(windows[0].pad_left == 1600);
    CHECK(windows[0].samples.head(1600).cwiseAbs().maxCoeff() == 0.0);
    CHECK(windows[0].samples[1600] == clip.samples[0]);
    CHECK(windows[9].pad_right == 0);
    CHECK(windows[5].pad_left == 0);
    CHECK(windows[5].samples[0] == clip.samples[1000 * 16 - 1600]);

    const auto again = align_audio_to_frames(burst, clip);
    for (std::size_t i = 0; i < windows.size(); ++i) CHECK(windows[i].samples == again[i].samples);
}

TEST_CASE("single frame gets the whole clip length") {
    const auto burst = testing::uniform_burst(1, 5.0);
    AudioClip clip;
    clip.samples = Eigen::VectorXd::Ones(480);
    const auto w = align_audio_to_frames(burst, clip);
    REQUIRE(w.size() == 1);
    CHECK(w[0].samples.size() == 480);
}

TEST_CASE("frame far outside the clip is an alignment failure") {
    auto burst = testing::uniform_burst(2, 5.0);
    burst.frames[1].timestamp = 50.0;
    AudioClip clip;
    clip.samples = Eigen::VectorXd::Ones(1600);
    try {
        align_audio_to_frames(burst, clip);
        FAIL("expected AlignmentFailure");
    } catch (const AlignmentFailure &e) {
        CHECK(e.frame_index() == 1);
    }
}

TEST_CASE("empty inputs are rejected") {
    AudioClip clip;
    clip.samples = Eigen::VectorXd::Ones(10);
    CHECK_THROWS_AS(align_audio_to_frames(FrameBurst{}, clip), InvalidInput);
    CHECK_THROWS_AS(align_audio_to_frames(testing::uniform_burst(2, 5.0), AudioClip{}), InvalidInput);
}

TEST_CASE("validation reports monotonicity and dimension problems") {
    auto burst = testing::uniform_burst(4, 5.0);
    CHECK(validate_burst(burst).ok());

    burst.frames[2].timestamp = burst.frames[1].timestamp;
    auto r = validate_burst(burst);
    CHECK(r.count(ViolationKind::NonMonotoneTimestamp) == 1);

    burst = testing::uniform_burst(4, 5.0);
    burst.frames[1] = testing::constant_frame(9, 8, 0, burst.frames[1].timestamp);
    burst.frames[3] = testing::constant_frame(8, 7, 0, burst.frames[3].timestamp);
    r = validate_burst(burst);
    CHECK(r.count(ViolationKind::DimensionMismatch) == 2);

    CHECK(validate_burst(FrameBurst{}).count(ViolationKind::Empty) == 1);
    burst = testing::uniform_burst(2, 5.0);
    burst.nominal_fps = 0;
    CHECK(validate_burst(burst).count(ViolationKind::NonPositiveFps) == 1);
}
