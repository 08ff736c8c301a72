#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "vfiqa/flow.hpp"

using namespace vfiqa;
using fixtures::TempDir;

namespace {

// Raw .flo writer independent of write_flo, for crafting malformed files.
void write_flo_raw(const std::string& path, float tag, std::int32_t w, std::int32_t h,
                   const std::vector<float>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out.write(reinterpret_cast<const char*>(&tag), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * 4));
}

bool fields_identical(const MotionField& a, const MotionField& b) {
    return a.width == b.width && a.height == b.height && a.u == b.u && a.v == b.v;
}

} // namespace

TEST_SUITE("flow") {

TEST_CASE("flo roundtrip is bit-exact for random fields") {
    TempDir dir;
    std::mt19937 rng(8101);
    std::uniform_int_distribution<int> dim(1, 24);
    for (int c = 0; c < 60; ++c) {
        const MotionField field = fixtures::random_field(dim(rng), dim(rng), rng, 1e4);
        const auto path = dir.file("f" + std::to_string(c) + ".flo");
        write_flo(field, path);
        CHECK(fields_identical(read_flo(path), field));
    }
}

TEST_CASE("flo roundtrip of degenerate shapes") {
    TempDir dir;

    MotionField zero = MotionField::zeros(3, 2);
    write_flo(zero, dir.file("zero.flo"));
    CHECK(fields_identical(read_flo(dir.file("zero.flo")), zero));

    MotionField tiny = MotionField::zeros(1, 1);
    tiny.u[0] = 0.5;
    tiny.v[0] = -0.25;
    write_flo(tiny, dir.file("tiny.flo"));
    CHECK(fields_identical(read_flo(dir.file("tiny.flo")), tiny));
}

TEST_CASE("wrong sanity tag is rejected") {
    TempDir dir;
    const auto path = dir.file("badtag.flo");
    write_flo_raw(path, 0.0f, 2, 2, std::vector<float>(8, 0.0f));
    CHECK_THROWS_AS(read_flo(path), NotFloFile);
}

TEST_CASE("file shorter than the 12-byte header is rejected") {
    TempDir dir;
    const auto path = dir.file("stub.flo");
    std::ofstream(path, std::ios::binary).write("\x00\x01", 2);
    CHECK_THROWS_AS(read_flo(path), NotFloFile);
}

TEST_CASE("payload size disagreeing with the header is rejected") {
    TempDir dir;
    const auto path = dir.file("trunc.flo");
    // Header promises 8x8 = 64 (u,v) pairs; payload holds only 60.
    write_flo_raw(path, 202021.25f, 8, 8, std::vector<float>(120, 1.0f));
    CHECK_THROWS_AS(read_flo(path), TruncatedFlow);
}

TEST_CASE("absurd header dimensions are rejected") {
    TempDir dir;
    const auto path = dir.file("dims.flo");
    write_flo_raw(path, 202021.25f, -3, 2, std::vector<float>(12, 0.0f));
    CHECK_THROWS_AS(read_flo(path), NotFloFile);
}

TEST_CASE("non-finite values are rejected on read and on write") {
    TempDir dir;
    const auto bad_read = dir.file("nan.flo");
    std::vector<float> payload(8, 0.0f);
    payload[3] = std::numeric_limits<float>::quiet_NaN();
    write_flo_raw(bad_read, 202021.25f, 2, 2, payload);
    CHECK_THROWS_AS(read_flo(bad_read), NonFiniteFlow);

    MotionField field = MotionField::zeros(2, 2);
    field.v[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(write_flo(field, dir.file("inf.flo")), NonFiniteFlow);
}

TEST_CASE("identical textured frames give near-zero flow") {
    const LumaFrame frame = fixtures::textured_frame(96, 72, 8102);
    const MotionField field = estimate_farneback(frame, frame, {});
    double mean_abs_u = 0.0, mean_abs_v = 0.0;
    for (std::size_t i = 0; i < field.pixel_count(); ++i) {
        mean_abs_u += std::abs(field.u[i]);
        mean_abs_v += std::abs(field.v[i]);
    }
    mean_abs_u /= static_cast<double>(field.pixel_count());
    mean_abs_v /= static_cast<double>(field.pixel_count());
    CHECK(mean_abs_u < 0.05);
    CHECK(mean_abs_v < 0.05);
    CHECK(fixtures::mean_magnitude(field) < 0.05);
}

TEST_CASE("integer translations are recovered within a quarter pixel") {
    for (const int t : {-3, -2, -1, 1, 2, 3}) {
        CAPTURE(t);
        {
            const auto [prev, next] = fixtures::translated_pair(128, 96, 8103, t, 0.0);
            const auto mean = fixtures::interior_mean(estimate_farneback(prev, next, {}), 0.10);
            CHECK(std::abs(mean.u - t) < 0.25);
            CHECK(std::abs(mean.v) < 0.25);
        }
        {
            const auto [prev, next] = fixtures::translated_pair(128, 96, 8104, 0.0, t);
            const auto mean = fixtures::interior_mean(estimate_farneback(prev, next, {}), 0.10);
            CHECK(std::abs(mean.u) < 0.25);
            CHECK(std::abs(mean.v - t) < 0.25);
        }
    }
}

TEST_CASE("estimator output is finite even on pure noise") {
    std::mt19937 rng(8105);
    for (int c = 0; c < 3; ++c) {
        const LumaFrame a = fixtures::random_luma(40, 32, rng);
        const LumaFrame b = fixtures::random_luma(40, 32, rng);
        const MotionField field = estimate_farneback(a, b, {});
        for (std::size_t i = 0; i < field.pixel_count(); ++i) {
            REQUIRE(std::isfinite(field.u[i]));
            REQUIRE(std::isfinite(field.v[i]));
        }
    }
}

TEST_CASE("mismatched or undersized frames are rejected") {
    const LumaFrame a = fixtures::textured_frame(16, 16, 8106);
    const LumaFrame b = fixtures::textured_frame(16, 14, 8106);
    CHECK_THROWS_AS(estimate_farneback(a, b, {}), DimensionMismatch);

    const LumaFrame small = fixtures::textured_frame(8, 8, 8107);
    CHECK_THROWS_AS(estimate_farneback(small, small, {}), FrameTooSmall); // window is 15
}

TEST_CASE("parameter validation rejects out-of-range settings") {
    FarnebackParams p;
    CHECK_NOTHROW(p.validate());
    p.pyramid_scale = 1.0;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = {};
    p.window_size = 14;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = {};
    p.poly_neighborhood = 4;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = {};
    p.iterations_per_level = 0;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = {};
    p.pyramid_levels = 0;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
    p = {};
    p.poly_sigma = 0.0;
    CHECK_THROWS_AS(p.validate(), InvalidSpec);
}

TEST_CASE("flo directory source serves both sides and checks dimensions") {
    TempDir dir;
    std::mt19937 rng(8108);
    const auto dist_dir = dir.subdir("dist");
    const auto ref_dir = dir.subdir("ref");

    const MotionField fd = fixtures::random_field(6, 4, rng);
    const MotionField fr = fixtures::random_field(6, 4, rng);
    write_flo(fd, FloDirectorySource::flo_path(dist_dir, 0));
    write_flo(fr, FloDirectorySource::flo_path(ref_dir, 0));
    CHECK(FloDirectorySource::flo_path(dist_dir, 0) == dist_dir + "/000000.flo");

    const LumaFrame frame = fixtures::constant_frame(6, 4, 99);

    const FloDirectorySource both("ext", dist_dir, ref_dir);
    CHECK(fields_identical(both.field(SequenceSide::distorted, 0, frame, frame), fd));
    CHECK(fields_identical(both.field(SequenceSide::reference, 0, frame, frame), fr));
    CHECK(both.label() == "ext");

    const FloDirectorySource dist_only("ext", dist_dir, std::nullopt);
    CHECK_THROWS_AS(dist_only.field(SequenceSide::reference, 0, frame, frame), InvalidSpec);

    const LumaFrame other = fixtures::constant_frame(8, 4, 99);
    CHECK_THROWS_AS(both.field(SequenceSide::distorted, 0, other, other), DimensionMismatch);

    CHECK_THROWS_AS(both.field(SequenceSide::distorted, 7, frame, frame), IoError);
}

TEST_CASE("farneback source matches direct estimation") {
    const auto [prev, next] = fixtures::translated_pair(48, 40, 8109, 1.0, 0.0);
    const FarnebackSource source{};
    const MotionField via_source = source.field(SequenceSide::distorted, 0, prev, next);
    const MotionField direct = estimate_farneback(prev, next, {});
    CHECK(fields_identical(via_source, direct));
    CHECK(source.label() == "farneback");
}

} // TEST_SUITE
