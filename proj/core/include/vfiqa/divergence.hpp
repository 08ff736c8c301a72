#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfiqa/errors.hpp"
#include "vfiqa/flow.hpp"

namespace vfiqa {

// Signed per-pixel scalar field, row major. Used for the raw (unnormalized)
// motion-field divergence.
struct ScalarMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Divergence magnitude normalized to [0,1] by the map maximum. When the raw
// divergence is identically zero the normalization is undefined; the map is
// then all zeros with `degenerate` set and downstream layers fall back.
struct DivergenceMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    bool degenerate = false;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Binary pixel selection plus its population count z.
struct WeightMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;
    std::size_t z = 0;

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct DivergenceThreshold {
    double t = 0.01;

    DivergenceThreshold() = default;
    explicit DivergenceThreshold(double value) : t(value) {
        if (!(t >= 0.0 && t <= 1.0))
            throw InvalidSpec("divergence threshold must lie in [0,1], got " +
                              std::to_string(value));
    }
};

// du/dx + dv/dy by central differences in the interior and one-sided
// (forward/backward) differences on the one-pixel border. Linear in the
// field, so it distributes over field sums exactly.
ScalarMap raw_divergence(const MotionField& field);

// |raw| / max|raw|; an identically zero input yields an all-zero map with
// the degenerate flag set.
DivergenceMap normalize_divergence(const ScalarMap& raw);

// w(x) = 1 where d(x) > t, 0 where d(x) <= t (boundary excluded).
WeightMask threshold_mask(const DivergenceMap& d, DivergenceThreshold thr);

// Debug visualization: 8-bit binary PGM, sample value round(255 * d).
void write_pgm(const DivergenceMap& d, const std::string& path);

} // namespace vfiqa
