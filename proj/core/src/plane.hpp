#pragma once

// Internal float image buffer plus the small filter kit the pyramid flow
// estimator needs. Not installed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vfiqa/video_io.hpp"

namespace vfiqa::detail {

struct FloatPlane {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    FloatPlane() = default;
    FloatPlane(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.f) {}

    float* row(int y) { return data.data() + static_cast<std::size_t>(y) * width; }
    const float* row(int y) const { return data.data() + static_cast<std::size_t>(y) * width; }
    float at(int x, int y) const { return row(y)[x]; }
};

inline FloatPlane plane_from_luma(const LumaFrame& frame) {
    FloatPlane p(frame.width, frame.height);
    for (std::size_t i = 0; i < frame.samples.size(); ++i)
        p.data[i] = static_cast<float>(frame.samples[i]);
    return p;
}

inline int clamp_index(int i, int lo, int hi) { return std::min(std::max(i, lo), hi); }

// Separable Gaussian with replicate-edge padding. kernel_size <= 0 derives
// the size from sigma (round(sigma*5)|1, at least 3); sigma <= 0 derives a
// sigma from the kernel size.
inline FloatPlane gaussian_blur(const FloatPlane& src, double sigma, int kernel_size = 0) {
    if (kernel_size <= 0) {
        kernel_size = static_cast<int>(std::lround(sigma * 5.0)) | 1;
        kernel_size = std::max(kernel_size, 3);
    }
    if (sigma <= 0.0) sigma = 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;

    const int r = kernel_size / 2;
    std::vector<double> k(kernel_size);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += k[i + r];
    }
    for (auto& w : k) w /= sum;

    const int w = src.width, h = src.height;
    FloatPlane tmp(w, h), dst(w, h);
    for (int y = 0; y < h; ++y) {
        const float* in = src.row(y);
        float* out = tmp.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * in[clamp_index(x + i, 0, w - 1)];
            out[x] = static_cast<float>(acc);
        }
    }
    for (int y = 0; y < h; ++y) {
        float* out = dst.row(y);
        for (int i = -r; i <= r; ++i) {
            const float* in = tmp.row(clamp_index(y + i, 0, h - 1));
            const double ki = k[i + r];
            if (i == -r)
                for (int x = 0; x < w; ++x) out[x] = static_cast<float>(ki * in[x]);
            else
                for (int x = 0; x < w; ++x) out[x] += static_cast<float>(ki * in[x]);
        }
    }
    return dst;
}

// Bilinear resize with pixel-center alignment and edge clamping.
inline FloatPlane resize_bilinear(const FloatPlane& src, int new_w, int new_h) {
    if (new_w == src.width && new_h == src.height) return src;
    FloatPlane dst(new_w, new_h);
    const double sx = static_cast<double>(src.width) / new_w;
    const double sy = static_cast<double>(src.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(src.height - 1));
        int y0 = static_cast<int>(fy);
        if (y0 > src.height - 2) y0 = std::max(src.height - 2, 0);
        const double ay = (src.height > 1) ? fy - y0 : 0.0;
        const float* r0 = src.row(y0);
        const float* r1 = src.row(std::min(y0 + 1, src.height - 1));
        float* out = dst.row(y);
        for (int x = 0; x < new_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(src.width - 1));
            int x0 = static_cast<int>(fx);
            if (x0 > src.width - 2) x0 = std::max(src.width - 2, 0);
            const double ax = (src.width > 1) ? fx - x0 : 0.0;
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double top = r0[x0] + ax * (r0[x1] - r0[x0]);
            const double bot = r1[x0] + ax * (r1[x1] - r1[x0]);
            out[x] = static_cast<float>(top + ay * (bot - top));
        }
    }
    return dst;
}

} // namespace vfiqa::detail
