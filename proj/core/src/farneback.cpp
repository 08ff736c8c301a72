#include "vfiqa/flow.hpp"

#include <array>
#include <cmath>

#include "plane.hpp"

namespace vfiqa {

using detail::FloatPlane;

void FarnebackParams::validate() const {
    if (pyramid_levels < 1)
        throw InvalidSpec("pyramid_levels must be >= 1");
    if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0))
        throw InvalidSpec("pyramid_scale must lie in (0, 1)");
    if (window_size < 3 || window_size % 2 == 0)
        throw InvalidSpec("window_size must be odd and >= 3");
    if (iterations_per_level < 1)
        throw InvalidSpec("iterations_per_level must be >= 1");
    if (poly_neighborhood < 3 || poly_neighborhood % 2 == 0)
        throw InvalidSpec("poly_neighborhood must be odd and >= 3");
    if (poly_sigma <= 0.0)
        throw InvalidSpec("poly_sigma must be positive");
}

namespace {

// Quadratic expansion coefficients, interleaved five floats per pixel:
// [0] y linear term, [1] x linear term, [2] y^2 term, [3] x^2 term,
// [4] xy term (basis coefficient; the symmetric-matrix entry is half of it).
struct Poly5 {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Poly5(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 5, 0.f) {}
    float* px(int x, int y) { return data.data() + 5 * (static_cast<std::size_t>(y) * width + x); }
    const float* px(int x, int y) const {
        return data.data() + 5 * (static_cast<std::size_t>(y) * width + x);
    }
};

// Local constraint system per pixel: [0] Gxx, [1] Gxy, [2] Gyy, [3] hx, [4] hy
// for the 2x2 normal equations G d = h.
using Matrices = Poly5;

void invert3x3(const double a[3][3], double inv[3][3]) {
    const double c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
    const double c01 = a[1][2] * a[2][0] - a[1][0] * a[2][2];
    const double c02 = a[1][0] * a[2][1] - a[1][1] * a[2][0];
    const double det = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;
    inv[0][0] = c00 / det;
    inv[1][0] = c01 / det;
    inv[2][0] = c02 / det;
    inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
}

// Weighted least-squares fit of a quadratic to every neighborhood, via
// separable correlation with a Gaussian applicability. Replicate-edge
// padding keeps the borders free of phantom structure.
Poly5 poly_expansion(const FloatPlane& img, int poly_n, double sigma) {
    const int n = poly_n / 2;
    const int taps = 2 * n + 1;

    std::vector<double> g(taps), xg(taps), xxg(taps);
    double gsum = 0.0;
    for (int i = -n; i <= n; ++i) {
        g[i + n] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        gsum += g[i + n];
    }
    for (auto& w : g) w /= gsum;
    for (int i = -n; i <= n; ++i) {
        xg[i + n] = i * g[i + n];
        xxg[i + n] = static_cast<double>(i) * i * g[i + n];
    }

    double m2 = 0.0, m4 = 0.0;
    for (int i = -n; i <= n; ++i) {
        m2 += g[i + n] * i * i;
        m4 += g[i + n] * i * i * i * i;
    }
    const double m22 = m2 * m2;

    // Normal matrix restricted to the basis {1, s^2, t^2}; the linear and
    // cross terms decouple because the applicability is separable and even.
    const double B[3][3] = {{1.0, m2, m2}, {m2, m4, m22}, {m2, m22, m4}};
    double Bi[3][3];
    invert3x3(B, Bi);
    const double ig_lin = 1.0 / m2;
    const double ig_cross = 1.0 / m22;

    const int w = img.width, h = img.height;
    Poly5 out(w, h);
    std::vector<double> row0(w), row1(w), row2(w);

    for (int y = 0; y < h; ++y) {
        std::fill(row0.begin(), row0.end(), 0.0);
        std::fill(row1.begin(), row1.end(), 0.0);
        std::fill(row2.begin(), row2.end(), 0.0);
        for (int k = -n; k <= n; ++k) {
            const float* src = img.row(detail::clamp_index(y + k, 0, h - 1));
            const double gk = g[k + n], xgk = xg[k + n], xxgk = xxg[k + n];
            for (int x = 0; x < w; ++x) {
                const double p = src[x];
                row0[x] += gk * p;
                row1[x] += xgk * p;
                row2[x] += xxgk * p;
            }
        }
        float* dst = out.px(0, y);
        for (int x = 0; x < w; ++x, dst += 5) {
            double b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
            if (x >= n && x < w - n) {
                for (int j = -n; j <= n; ++j) {
                    const int xx = x + j;
                    b1 += g[j + n] * row0[xx];
                    b2 += xg[j + n] * row0[xx];
                    b4 += xxg[j + n] * row0[xx];
                    b3 += g[j + n] * row1[xx];
                    b6 += xg[j + n] * row1[xx];
                    b5 += g[j + n] * row2[xx];
                }
            } else {
                for (int j = -n; j <= n; ++j) {
                    const int xx = detail::clamp_index(x + j, 0, w - 1);
                    b1 += g[j + n] * row0[xx];
                    b2 += xg[j + n] * row0[xx];
                    b4 += xxg[j + n] * row0[xx];
                    b3 += g[j + n] * row1[xx];
                    b6 += xg[j + n] * row1[xx];
                    b5 += g[j + n] * row2[xx];
                }
            }
            dst[0] = static_cast<float>(b3 * ig_lin);
            dst[1] = static_cast<float>(b2 * ig_lin);
            dst[2] = static_cast<float>(Bi[1][0] * b1 + Bi[1][1] * b5 + Bi[1][2] * b4);
            dst[3] = static_cast<float>(Bi[1][0] * b1 + Bi[1][1] * b4 + Bi[1][2] * b5);
            dst[4] = static_cast<float>(b6 * ig_cross);
        }
    }
    return out;
}

// Builds the per-pixel 2x2 constraint system from the two expansions and the
// current displacement guess. The later frame's coefficients are sampled
// bilinearly at the displaced position (edge-clamped). Constraints within
// five pixels of the frame edge are attenuated so border fits carry less
// weight.
void update_matrices(const Poly5& r0, const Poly5& r1, const FloatPlane& flow_u,
                     const FloatPlane& flow_v, Matrices& m) {
    constexpr int kBorder = 5;
    static constexpr std::array<float, kBorder> kBorderScale = {0.14f, 0.14f, 0.4472f, 0.4472f,
                                                                0.4472f};
    const int w = r0.width, h = r0.height;
    for (int y = 0; y < h; ++y) {
        const float* u_row = flow_u.row(y);
        const float* v_row = flow_v.row(y);
        const float* c0 = r0.px(0, y);
        float* out = m.px(0, y);
        for (int x = 0; x < w; ++x, c0 += 5, out += 5) {
            const float dx = u_row[x];
            const float dy = v_row[x];

            double fx = x + dx, fy = y + dy;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
            fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
            int x0 = static_cast<int>(fx);
            int y0 = static_cast<int>(fy);
            if (x0 > w - 2) x0 = std::max(w - 2, 0);
            if (y0 > h - 2) y0 = std::max(h - 2, 0);
            const double ax = (w > 1) ? fx - x0 : 0.0;
            const double ay = (h > 1) ? fy - y0 : 0.0;
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);

            const double a00 = (1.0 - ax) * (1.0 - ay);
            const double a01 = ax * (1.0 - ay);
            const double a10 = (1.0 - ax) * ay;
            const double a11 = ax * ay;
            const float* p00 = r1.px(x0, y0);
            const float* p01 = r1.px(x1, y0);
            const float* p10 = r1.px(x0, y1);
            const float* p11 = r1.px(x1, y1);

            double s[5];
            for (int c = 0; c < 5; ++c)
                s[c] = a00 * p00[c] + a01 * p01[c] + a10 * p10[c] + a11 * p11[c];

            double ayy = (c0[2] + s[2]) * 0.5;
            double axx = (c0[3] + s[3]) * 0.5;
            double axy = (c0[4] + s[4]) * 0.25;
            double rhs_y = (c0[0] - s[0]) * 0.5;
            double rhs_x = (c0[1] - s[1]) * 0.5;
            rhs_y += ayy * dy + axy * dx;
            rhs_x += axy * dy + axx * dx;

            if (x < kBorder || x >= w - kBorder || y < kBorder || y >= h - kBorder) {
                double scale = 1.0;
                if (x < kBorder) scale *= kBorderScale[x];
                if (x >= w - kBorder) scale *= kBorderScale[w - x - 1];
                if (y < kBorder) scale *= kBorderScale[y];
                if (y >= h - kBorder) scale *= kBorderScale[h - y - 1];
                axx *= scale;
                ayy *= scale;
                axy *= scale;
                rhs_x *= scale;
                rhs_y *= scale;
            }

            out[0] = static_cast<float>(axx * axx + axy * axy);
            out[1] = static_cast<float>((axx + ayy) * axy);
            out[2] = static_cast<float>(ayy * ayy + axy * axy);
            out[3] = static_cast<float>(axx * rhs_x + axy * rhs_y);
            out[4] = static_cast<float>(axy * rhs_x + ayy * rhs_y);
        }
    }
}

// Normalized box filter over all five channels, replicate-edge, running sums.
Matrices box_blur5(const Matrices& src, int win) {
    const int r = win / 2;
    const int w = src.width, h = src.height;
    Matrices tmp(w, h), dst(w, h);
    const double inv = 1.0 / (static_cast<double>(win) * win);

    for (int y = 0; y < h; ++y) {
        const float* in = src.px(0, y);
        float* out = tmp.px(0, y);
        double acc[5] = {0, 0, 0, 0, 0};
        for (int j = -r; j <= r; ++j) {
            const float* p = in + 5 * detail::clamp_index(j, 0, w - 1);
            for (int c = 0; c < 5; ++c) acc[c] += p[c];
        }
        for (int c = 0; c < 5; ++c) out[c] = static_cast<float>(acc[c]);
        for (int x = 1; x < w; ++x) {
            const float* add = in + 5 * detail::clamp_index(x + r, 0, w - 1);
            const float* sub = in + 5 * detail::clamp_index(x - r - 1, 0, w - 1);
            for (int c = 0; c < 5; ++c) acc[c] += add[c] - sub[c];
            float* o = out + 5 * x;
            for (int c = 0; c < 5; ++c) o[c] = static_cast<float>(acc[c]);
        }
    }

    std::vector<double> col(static_cast<std::size_t>(w) * 5, 0.0);
    for (int j = -r; j <= r; ++j) {
        const float* row = tmp.px(0, detail::clamp_index(j, 0, h - 1));
        for (std::size_t i = 0; i < col.size(); ++i) col[i] += row[i];
    }
    for (int y = 0; y < h; ++y) {
        if (y > 0) {
            const float* add = tmp.px(0, detail::clamp_index(y + r, 0, h - 1));
            const float* sub = tmp.px(0, detail::clamp_index(y - r - 1, 0, h - 1));
            for (std::size_t i = 0; i < col.size(); ++i) col[i] += add[i] - sub[i];
        }
        float* out = dst.px(0, y);
        for (std::size_t i = 0; i < col.size(); ++i)
            out[i] = static_cast<float>(col[i] * inv);
    }
    return dst;
}

// Per-pixel solve of G d = h. The small diagonal bias keeps textureless
// regions finite and damps displacements where there is no constraint.
void solve_flow(const Matrices& m, FloatPlane& flow_u, FloatPlane& flow_v) {
    const int w = m.width, h = m.height;
    for (int y = 0; y < h; ++y) {
        const float* in = m.px(0, y);
        float* u = flow_u.row(y);
        float* v = flow_v.row(y);
        for (int x = 0; x < w; ++x, in += 5) {
            const double g11 = in[0], g12 = in[1], g22 = in[2], h1 = in[3], h2 = in[4];
            const double idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3);
            u[x] = static_cast<float>((g22 * h1 - g12 * h2) * idet);
            v[x] = static_cast<float>((g11 * h2 - g12 * h1) * idet);
        }
    }
}

} // namespace

MotionField estimate_farneback(const LumaFrame& prev, const LumaFrame& next,
                               const FarnebackParams& params) {
    params.validate();
    if (prev.width != next.width || prev.height != next.height)
        throw DimensionMismatch("frame sizes differ: " + std::to_string(prev.width) + "x" +
                                std::to_string(prev.height) + " vs " +
                                std::to_string(next.width) + "x" + std::to_string(next.height));
    if (std::min(prev.width, prev.height) < params.window_size)
        throw FrameTooSmall("frame " + std::to_string(prev.width) + "x" +
                            std::to_string(prev.height) + " smaller than the " +
                            std::to_string(params.window_size) + "px integration window");

    const FloatPlane full0 = detail::plane_from_luma(prev);
    const FloatPlane full1 = detail::plane_from_luma(next);
    const int w = full0.width, h = full0.height;

    // Drop pyramid levels too coarse for the expansion neighborhood.
    std::vector<double> level_scales;
    double scale = 1.0;
    for (int k = 0; k < params.pyramid_levels; ++k) {
        if (k > 0) scale *= params.pyramid_scale;
        const int wk = static_cast<int>(std::lround(w * scale));
        const int hk = static_cast<int>(std::lround(h * scale));
        if (std::min(wk, hk) < 2 * params.poly_neighborhood + 1) break;
        level_scales.push_back(scale);
    }
    if (level_scales.empty()) level_scales.push_back(1.0);

    FloatPlane flow_u, flow_v;
    for (int k = static_cast<int>(level_scales.size()) - 1; k >= 0; --k) {
        const double s = level_scales[k];
        const int wk = static_cast<int>(std::lround(w * s));
        const int hk = static_cast<int>(std::lround(h * s));
        const double smooth_sigma = (1.0 / s - 1.0) * 0.5;

        FloatPlane lvl0 = detail::resize_bilinear(detail::gaussian_blur(full0, smooth_sigma), wk, hk);
        FloatPlane lvl1 = detail::resize_bilinear(detail::gaussian_blur(full1, smooth_sigma), wk, hk);

        if (flow_u.data.empty()) {
            flow_u = FloatPlane(wk, hk);
            flow_v = FloatPlane(wk, hk);
        } else {
            const float gain = static_cast<float>(1.0 / params.pyramid_scale);
            flow_u = detail::resize_bilinear(flow_u, wk, hk);
            flow_v = detail::resize_bilinear(flow_v, wk, hk);
            for (auto& val : flow_u.data) val *= gain;
            for (auto& val : flow_v.data) val *= gain;
        }

        const Poly5 r0 = poly_expansion(lvl0, params.poly_neighborhood, params.poly_sigma);
        const Poly5 r1 = poly_expansion(lvl1, params.poly_neighborhood, params.poly_sigma);

        Matrices m(wk, hk);
        update_matrices(r0, r1, flow_u, flow_v, m);
        for (int i = 0; i < params.iterations_per_level; ++i) {
            const Matrices blurred = box_blur5(m, params.window_size);
            solve_flow(blurred, flow_u, flow_v);
            if (i + 1 < params.iterations_per_level)
                update_matrices(r0, r1, flow_u, flow_v, m);
        }
    }

    MotionField field = MotionField::zeros(w, h);
    for (std::size_t i = 0; i < field.pixel_count(); ++i) {
        field.u[i] = flow_u.data[i];
        field.v[i] = flow_v.data[i];
    }
    return field;
}

} // namespace vfiqa
