#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "vfiqa/divergence.hpp"

using namespace vfiqa;

namespace {

// Independent finite-difference oracle: central differences inside, one-sided
// at the borders, zero along a degenerate (single-row/column) axis.
double oracle_divergence(const MotionField& f, int x, int y) {
    double dudx = 0.0;
    if (f.width > 1) {
        if (x == 0)
            dudx = f.u_at(1, y) - f.u_at(0, y);
        else if (x == f.width - 1)
            dudx = f.u_at(x, y) - f.u_at(x - 1, y);
        else
            dudx = (f.u_at(x + 1, y) - f.u_at(x - 1, y)) / 2.0;
    }
    double dvdy = 0.0;
    if (f.height > 1) {
        if (y == 0)
            dvdy = f.v_at(x, 1) - f.v_at(x, 0);
        else if (y == f.height - 1)
            dvdy = f.v_at(x, y) - f.v_at(x, y - 1);
        else
            dvdy = (f.v_at(x, y + 1) - f.v_at(x, y - 1)) / 2.0;
    }
    return dudx + dvdy;
}

MotionField polynomial_field(int w, int h, const int cu[3], const int cv[3], int cross_u,
                             int cross_v) {
    MotionField f = MotionField::zeros(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            f.u[i] = cu[0] + cu[1] * x + cu[2] * x * x + cross_u * x * y;
            f.v[i] = cv[0] + cv[1] * y + cv[2] * y * y + cross_v * x * y;
        }
    }
    return f;
}

ScalarMap map_of(std::vector<double> values, int w, int h) {
    return ScalarMap{w, h, std::move(values)};
}

} // namespace

TEST_SUITE("divergence") {

TEST_CASE("constant fields have exactly zero divergence") {
    MotionField f = MotionField::zeros(7, 5);
    for (auto& u : f.u) u = 3.25;
    for (auto& v : f.v) v = -1.5;
    const ScalarMap raw = raw_divergence(f);
    for (const double d : raw.values) CHECK(d == 0.0);
}

TEST_CASE("the field u=x has unit divergence everywhere") {
    const int cu[3] = {0, 1, 0}, cv[3] = {0, 0, 0};
    const MotionField f = polynomial_field(6, 6, cu, cv, 0, 0);
    const ScalarMap raw = raw_divergence(f);
    for (const double d : raw.values) CHECK(d == 1.0);
}

TEST_CASE("the field u=x^2 recovers 2x on interior columns") {
    const int cu[3] = {0, 0, 1}, cv[3] = {0, 0, 0};
    const MotionField f = polynomial_field(5, 4, cu, cv, 0, 0);
    const ScalarMap raw = raw_divergence(f);
    for (int y = 0; y < 4; ++y) {
        for (int x = 1; x <= 3; ++x) CHECK(raw.at(x, y) == 2.0 * x);
        CHECK(raw.at(0, y) == 1.0); // forward difference of x^2 at 0
        CHECK(raw.at(4, y) == 7.0); // backward difference at 4: 16 - 9
    }
}

TEST_CASE("polynomial fields match the brute-force oracle exactly") {
    std::mt19937 rng(9001);
    std::uniform_int_distribution<int> coeff(-3, 3);
    for (int w = 1; w <= 9; ++w) {
        for (int h = 1; h <= 9; ++h) {
            const int cu[3] = {coeff(rng), coeff(rng), coeff(rng)};
            const int cv[3] = {coeff(rng), coeff(rng), coeff(rng)};
            const MotionField f = polynomial_field(w, h, cu, cv, coeff(rng), coeff(rng));
            const ScalarMap raw = raw_divergence(f);
            REQUIRE(raw.values.size() == f.pixel_count());
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) CHECK(raw.at(x, y) == oracle_divergence(f, x, y));
        }
    }
}

TEST_CASE("divergence is linear in the field to machine precision") {
    std::mt19937 rng(9002);
    std::uniform_real_distribution<double> scale(-2.0, 2.0);
    for (int c = 0; c < 100; ++c) {
        const MotionField f1 = fixtures::random_field(9, 7, rng);
        const MotionField f2 = fixtures::random_field(9, 7, rng);
        const double a = scale(rng), b = scale(rng);
        MotionField mix = MotionField::zeros(9, 7);
        for (std::size_t i = 0; i < mix.pixel_count(); ++i) {
            mix.u[i] = a * f1.u[i] + b * f2.u[i];
            mix.v[i] = a * f1.v[i] + b * f2.v[i];
        }
        const ScalarMap rm = raw_divergence(mix);
        const ScalarMap r1 = raw_divergence(f1);
        const ScalarMap r2 = raw_divergence(f2);
        for (std::size_t i = 0; i < rm.values.size(); ++i)
            CHECK(std::abs(rm.values[i] - (a * r1.values[i] + b * r2.values[i])) <= 1e-12);
    }
}

TEST_CASE("normalization divides by the maximum magnitude") {
    const DivergenceMap d = normalize_divergence(map_of({-2.0, 1.0, 4.0}, 3, 1));
    CHECK_FALSE(d.degenerate);
    CHECK(d.values[0] == 0.5);
    CHECK(d.values[1] == 0.25);
    CHECK(d.values[2] == 1.0);
}

TEST_CASE("an all-zero raw map normalizes to a flagged all-zero map") {
    const DivergenceMap d = normalize_divergence(map_of(std::vector<double>(12, 0.0), 4, 3));
    CHECK(d.degenerate);
    for (const double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("a uniform nonzero raw map normalizes to all ones") {
    const DivergenceMap d = normalize_divergence(map_of(std::vector<double>(10, -7.5), 5, 2));
    CHECK_FALSE(d.degenerate);
    for (const double v : d.values) CHECK(v == 1.0);
}

TEST_CASE("normalized values live in [0,1] and reach 1 unless degenerate") {
    std::mt19937 rng(9003);
    std::uniform_real_distribution<double> val(-50.0, 50.0);
    for (int c = 0; c < 50; ++c) {
        std::vector<double> raw(20);
        for (auto& r : raw) r = val(rng);
        const DivergenceMap d = normalize_divergence(map_of(std::move(raw), 5, 4));
        REQUIRE_FALSE(d.degenerate);
        double max = 0.0;
        for (const double v : d.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            max = std::max(max, v);
        }
        CHECK(max == 1.0);
    }
}

TEST_CASE("a divergence value exactly at the threshold stays out of the mask") {
    DivergenceMap d;
    d.width = 3;
    d.height = 1;
    d.values = {0.005, 0.01, 0.02};
    const WeightMask mask = threshold_mask(d, DivergenceThreshold{});
    CHECK(mask.bits == std::vector<std::uint8_t>{0, 0, 1});
    CHECK(mask.z == 1);
}

TEST_CASE("an all-zero map yields an empty mask") {
    DivergenceMap d;
    d.width = 2;
    d.height = 2;
    d.values = {0.0, 0.0, 0.0, 0.0};
    d.degenerate = true;
    const WeightMask mask = threshold_mask(d, DivergenceThreshold{});
    CHECK(mask.z == 0);
}

TEST_CASE("threshold zero admits every strictly positive pixel") {
    DivergenceMap d;
    d.width = 2;
    d.height = 2;
    d.values = {0.1, 0.2, 0.3, 1.0};
    const WeightMask mask = threshold_mask(d, DivergenceThreshold{0.0});
    CHECK(mask.z == 4);
    for (const auto b : mask.bits) CHECK(b == 1);
}

TEST_CASE("threshold construction enforces the [0,1] range") {
    CHECK(DivergenceThreshold{}.t == 0.01);
    CHECK_NOTHROW(DivergenceThreshold{0.0});
    CHECK_NOTHROW(DivergenceThreshold{1.0});
    CHECK_THROWS_AS(DivergenceThreshold{1.5}, InvalidSpec);
    CHECK_THROWS_AS(DivergenceThreshold{-0.1}, InvalidSpec);
}

TEST_CASE("the mask is invariant to positive scaling of the raw field") {
    std::mt19937 rng(9004);
    for (int c = 0; c < 100; ++c) {
        const MotionField f = fixtures::random_field(12, 10, rng);
        const ScalarMap raw = raw_divergence(f);
        const WeightMask base = threshold_mask(normalize_divergence(raw), DivergenceThreshold{});
        for (const double s : {0.1, 3.0, 1e4}) {
            ScalarMap scaled = raw;
            for (auto& v : scaled.values) v *= s;
            const WeightMask m =
                threshold_mask(normalize_divergence(scaled), DivergenceThreshold{});
            CHECK(m.bits == base.bits);
            CHECK(m.z == base.z);
        }
    }
}

TEST_CASE("mask population never grows as the threshold grows") {
    std::mt19937 rng(9005);
    for (int c = 0; c < 30; ++c) {
        const DivergenceMap d = normalize_divergence(raw_divergence(fixtures::random_field(10, 8, rng)));
        std::size_t prev_z = d.values.size() + 1;
        for (const double t : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
            const std::size_t z = threshold_mask(d, DivergenceThreshold{t}).z;
            CHECK(z <= prev_z);
            prev_z = z;
        }
        CHECK(threshold_mask(d, DivergenceThreshold{1.0}).z == 0);
    }
}

TEST_CASE("pgm export writes the quantized map") {
    fixtures::TempDir dir;
    DivergenceMap d;
    d.width = 2;
    d.height = 2;
    d.values = {0.0, 0.5, 0.25, 1.0};
    const auto path = dir.file("d.pgm");
    write_pgm(d, path);

    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "P5");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(maxval == 255);
    in.get(); // single whitespace after maxval
    unsigned char px[4];
    in.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128); // lround(127.5) rounds away from zero
    CHECK(px[2] == 64);
    CHECK(px[3] == 255);
}

} // TEST_SUITE
