#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vfiqa/errors.hpp"
#include "vfiqa/video_io.hpp"

namespace vfiqa {

// Dense per-pixel displacement field between two frames. The value at pixel
// x describes where that pixel of the earlier frame lands in the later one:
// prev(x) ~ next(x + F(x)). Components are stored as doubles so downstream
// differential operators stay exact to machine precision; .flo I/O narrows
// to float32 as the format requires.
struct MotionField {
    int width = 0;
    int height = 0;
    std::vector<double> u; // horizontal displacement, row major
    std::vector<double> v; // vertical displacement, row major

    static MotionField zeros(int w, int h) {
        const std::size_t n = static_cast<std::size_t>(w) * h;
        return MotionField{w, h, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    }

    std::size_t pixel_count() const { return u.size(); }
    double u_at(int x, int y) const { return u[static_cast<std::size_t>(y) * width + x]; }
    double v_at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

struct FarnebackParams {
    int pyramid_levels = 3;
    double pyramid_scale = 0.5;
    int window_size = 15;
    int iterations_per_level = 3;
    int poly_neighborhood = 5;
    double poly_sigma = 1.1;

    void validate() const;
};

// Classical dense flow by local quadratic polynomial expansion: each
// neighborhood is fitted with a quadratic under a Gaussian applicability
// window, displacement follows from the coefficient algebra, and the
// estimate is refined coarse-to-fine over an image pyramid. Pure function;
// safe to call concurrently on different frame pairs.
MotionField estimate_farneback(const LumaFrame& prev, const LumaFrame& next,
                               const FarnebackParams& params = {});

// Middlebury .flo container: float32 tag 202021.25, int32 width, int32
// height, then row-major interleaved (u, v) float32 pairs.
MotionField read_flo(const std::string& path);
void write_flo(const MotionField& field, const std::string& path);

// Which of the two compared sequences a flow field belongs to. The
// divergence-masked metric only ever needs distorted-side fields; the EPE
// ablation needs both.
enum class SequenceSide { reference, distorted };

class FlowSource {
public:
    virtual ~FlowSource() = default;

    // Field mapping frame pair_index onto pair_index + 1 of the sequence
    // identified by side. prev/next are that sequence's frames.
    virtual MotionField field(SequenceSide side, std::size_t pair_index,
                              const LumaFrame& prev, const LumaFrame& next) const = 0;

    virtual std::string label() const = 0;
};

// Built-in estimator; stateless, so concurrent calls are fine.
class FarnebackSource final : public FlowSource {
public:
    explicit FarnebackSource(FarnebackParams params = {}) : params_(params) {
        params_.validate();
    }

    MotionField field(SequenceSide, std::size_t, const LumaFrame& prev,
                      const LumaFrame& next) const override {
        return estimate_farneback(prev, next, params_);
    }

    std::string label() const override { return "farneback"; }
    const FarnebackParams& params() const { return params_; }

private:
    FarnebackParams params_;
};

// Precomputed fields laid out as <dir>/%06d.flo where index n holds the
// field from frame n to n+1. Lets externally computed estimators (e.g. DNN
// flow) drive the metric without being linked in.
class FloDirectorySource final : public FlowSource {
public:
    FloDirectorySource(std::string label, std::string distorted_dir,
                       std::optional<std::string> reference_dir = std::nullopt)
        : label_(std::move(label)),
          distorted_dir_(std::move(distorted_dir)),
          reference_dir_(std::move(reference_dir)) {}

    MotionField field(SequenceSide side, std::size_t pair_index, const LumaFrame& prev,
                      const LumaFrame& next) const override;

    std::string label() const override { return label_; }

    static std::string flo_path(const std::string& dir, std::size_t pair_index);

private:
    std::string label_;
    std::string distorted_dir_;
    std::optional<std::string> reference_dir_;
};

} // namespace vfiqa
