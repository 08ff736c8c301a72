#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vfiqa/flow.hpp"
#include "vfiqa/video_io.hpp"

namespace fixtures {

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / ("vfiqa-test-" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create scratch directory");
    }
    ~TempDir() {
        if (path_.empty()) return;
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    TempDir(TempDir&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }
    TempDir& operator=(TempDir&&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string subdir(const std::string& name) const {
        const auto p = path_ / name;
        std::filesystem::create_directories(p);
        return p.string();
    }

private:
    std::filesystem::path path_;
};

// Smooth band-limited texture: a coarse random lattice sampled with bilinear
// interpolation. (shift_x, shift_y) translate the underlying continuous
// pattern, so two frames with the same seed and different shifts are exact
// translations of one another (up to 8-bit rounding). Shift headroom: 48 px.
inline vfiqa::LumaFrame textured_frame(int width, int height, std::uint32_t seed,
                                       double shift_x = 0.0, double shift_y = 0.0) {
    constexpr double kCell = 7.0;
    constexpr double kMarginPx = 48.0;
    const int lat_w = static_cast<int>((width + 2.0 * kMarginPx) / kCell) + 3;
    const int lat_h = static_cast<int>((height + 2.0 * kMarginPx) / kCell) + 3;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> level(20.0, 235.0);
    std::vector<double> lattice(static_cast<std::size_t>(lat_w) * lat_h);
    for (auto& v : lattice) v = level(rng);

    vfiqa::LumaFrame frame{width, height,
                           std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double gx = (x + kMarginPx + shift_x) / kCell;
            const double gy = (y + kMarginPx + shift_y) / kCell;
            int ix = static_cast<int>(std::floor(gx));
            int iy = static_cast<int>(std::floor(gy));
            ix = std::max(0, std::min(ix, lat_w - 2));
            iy = std::max(0, std::min(iy, lat_h - 2));
            const double fx = gx - ix;
            const double fy = gy - iy;
            const double* row0 = lattice.data() + static_cast<std::size_t>(iy) * lat_w;
            const double* row1 = row0 + lat_w;
            const double v = (1.0 - fy) * ((1.0 - fx) * row0[ix] + fx * row0[ix + 1]) +
                             fy * ((1.0 - fx) * row1[ix] + fx * row1[ix + 1]);
            frame.samples[static_cast<std::size_t>(y) * width + x] =
                static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return frame;
}

// prev/next pair whose true displacement, in the prev(x) ~ next(x + F(x))
// sense, is (tx, ty).
inline std::pair<vfiqa::LumaFrame, vfiqa::LumaFrame> translated_pair(int width, int height,
                                                                     std::uint32_t seed,
                                                                     double tx, double ty) {
    return {textured_frame(width, height, seed, 0.0, 0.0),
            textured_frame(width, height, seed, -tx, -ty)};
}

inline vfiqa::LumaFrame constant_frame(int width, int height, std::uint8_t value) {
    return {width, height,
            std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, value)};
}

inline vfiqa::LumaFrame random_luma(int width, int height, std::mt19937& rng) {
    vfiqa::LumaFrame frame{width, height,
                           std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& s : frame.samples) s = static_cast<std::uint8_t>(byte(rng));
    return frame;
}

// Values quantized to float32 so .flo roundtrips can be compared bit-exactly.
inline vfiqa::MotionField random_field(int width, int height, std::mt19937& rng,
                                       double amplitude = 4.0) {
    vfiqa::MotionField field = vfiqa::MotionField::zeros(width, height);
    std::uniform_real_distribution<double> d(-amplitude, amplitude);
    for (auto& u : field.u) u = static_cast<float>(d(rng));
    for (auto& v : field.v) v = static_cast<float>(d(rng));
    return field;
}

inline vfiqa::FrameSequence random_sequence(const vfiqa::VideoSpec& spec, std::size_t frames,
                                            std::mt19937& rng) {
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<std::vector<std::uint8_t>> data(frames);
    for (auto& f : data) {
        f.resize(spec.frame_size());
        for (auto& b : f) b = static_cast<std::uint8_t>(byte(rng));
    }
    return vfiqa::FrameSequence::from_frames(spec, std::move(data));
}

// Textured sequence with gentle per-frame drift so motion fields are nontrivial.
inline vfiqa::FrameSequence drifting_sequence(const vfiqa::VideoSpec& spec, std::size_t frames,
                                              std::uint32_t seed, double drift_per_frame = 1.0) {
    std::vector<vfiqa::LumaFrame> lumas;
    lumas.reserve(frames);
    for (std::size_t n = 0; n < frames; ++n)
        lumas.push_back(textured_frame(spec.width, spec.height, seed,
                                       -drift_per_frame * static_cast<double>(n), 0.0));
    return vfiqa::FrameSequence::from_luma(spec, lumas);
}

// Additive uniform noise of peak amplitude +/-amp, clamped to [0, 255].
inline vfiqa::FrameSequence noisy_copy(const vfiqa::FrameSequence& src, std::uint32_t seed,
                                       int amp) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> delta(-amp, amp);
    std::vector<std::vector<std::uint8_t>> frames;
    frames.reserve(src.frame_count());
    for (std::size_t n = 0; n < src.frame_count(); ++n) {
        auto bytes = src.frame_bytes(n);
        for (std::size_t i = 0; i < src.spec().luma_size(); ++i) {
            const int v = static_cast<int>(bytes[i]) + delta(rng);
            bytes[i] = static_cast<std::uint8_t>(std::max(0, std::min(255, v)));
        }
        frames.push_back(std::move(bytes));
    }
    return vfiqa::FrameSequence::from_frames(src.spec(), std::move(frames));
}

struct InteriorMean {
    double u = 0.0;
    double v = 0.0;
};

// Mean displacement over the field with a border fraction excluded per side.
inline InteriorMean interior_mean(const vfiqa::MotionField& field, double border_fraction) {
    const int mx = static_cast<int>(std::lround(field.width * border_fraction));
    const int my = static_cast<int>(std::lround(field.height * border_fraction));
    double su = 0.0, sv = 0.0;
    std::size_t count = 0;
    for (int y = my; y < field.height - my; ++y) {
        for (int x = mx; x < field.width - mx; ++x) {
            su += field.u_at(x, y);
            sv += field.v_at(x, y);
            ++count;
        }
    }
    return {su / static_cast<double>(count), sv / static_cast<double>(count)};
}

inline double mean_magnitude(const vfiqa::MotionField& field) {
    double sum = 0.0;
    for (std::size_t i = 0; i < field.pixel_count(); ++i)
        sum += std::hypot(field.u[i], field.v[i]);
    return sum / static_cast<double>(field.pixel_count());
}

} // namespace fixtures
