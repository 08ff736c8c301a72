#include "vfiqa/divergence.hpp"

#include <cmath>
#include <fstream>

namespace vfiqa {

ScalarMap raw_divergence(const MotionField& field) {
    const int w = field.width, h = field.height;
    if (w <= 0 || h <= 0) throw InvalidSpec("motion field dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (field.u.size() != n || field.v.size() != n)
        throw DimensionMismatch("motion field component size does not match its dimensions");

    ScalarMap out{w, h, std::vector<double>(n, 0.0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double du_dx = 0.0;
            if (w > 1) {
                if (x == 0)
                    du_dx = field.u_at(1, y) - field.u_at(0, y);
                else if (x == w - 1)
                    du_dx = field.u_at(w - 1, y) - field.u_at(w - 2, y);
                else
                    du_dx = (field.u_at(x + 1, y) - field.u_at(x - 1, y)) * 0.5;
            }
            double dv_dy = 0.0;
            if (h > 1) {
                if (y == 0)
                    dv_dy = field.v_at(x, 1) - field.v_at(x, 0);
                else if (y == h - 1)
                    dv_dy = field.v_at(x, h - 1) - field.v_at(x, h - 2);
                else
                    dv_dy = (field.v_at(x, y + 1) - field.v_at(x, y - 1)) * 0.5;
            }
            out.values[static_cast<std::size_t>(y) * w + x] = du_dx + dv_dy;
        }
    }
    return out;
}

DivergenceMap normalize_divergence(const ScalarMap& raw) {
    DivergenceMap out{raw.width, raw.height, std::vector<double>(raw.values.size(), 0.0), false};
    double max_abs = 0.0;
    for (double v : raw.values) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == 0.0) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < raw.values.size(); ++i)
        out.values[i] = std::abs(raw.values[i]) / max_abs;
    return out;
}

WeightMask threshold_mask(const DivergenceMap& d, DivergenceThreshold thr) {
    WeightMask mask{d.width, d.height, std::vector<std::uint8_t>(d.values.size(), 0), 0};
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (d.values[i] > thr.t) {
            mask.bits[i] = 1;
            ++mask.z;
        }
    }
    return mask;
}

void write_pgm(const DivergenceMap& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << d.width << " " << d.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(d.width));
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x)
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(255.0 * d.at(x, y)));
        out.write(reinterpret_cast<const char*>(row.data()), d.width);
    }
    if (!out) throw IoError("write failure on " + path);
}

} // namespace vfiqa
