#include "vfiqa/metrics.hpp"

#include <cmath>
#include <functional>

#include "plane.hpp"
#include "vfiqa/parallel.hpp"

namespace vfiqa {

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::psnr: return "psnr";
        case MetricKind::ssim: return "ssim";
        case MetricKind::gmsd: return "gmsd";
        case MetricKind::psnr_div: return "psnr-div";
        case MetricKind::psnr_epe: return "psnr-epe";
    }
    throw InvalidSpec("unknown metric kind");
}

MetricKind metric_from_string(const std::string& name) {
    if (name == "psnr") return MetricKind::psnr;
    if (name == "ssim") return MetricKind::ssim;
    if (name == "gmsd") return MetricKind::gmsd;
    if (name == "psnr-div" || name == "psnr_div") return MetricKind::psnr_div;
    if (name == "psnr-epe" || name == "psnr_epe") return MetricKind::psnr_epe;
    throw InvalidSpec("unknown metric '" + name +
                      "' (expected psnr, ssim, gmsd, psnr-div or psnr-epe)");
}

namespace {

void check_frame_dims(const LumaFrame& ref, const LumaFrame& dist) {
    if (ref.width != dist.width || ref.height != dist.height)
        throw DimensionMismatch("frame sizes differ: " + std::to_string(ref.width) + "x" +
                                std::to_string(ref.height) + " vs " + std::to_string(dist.width) +
                                "x" + std::to_string(dist.height));
}

} // namespace

double mse_frame(const LumaFrame& ref, const LumaFrame& dist) {
    check_frame_dims(ref, dist);
    double sum = 0.0;
    for (std::size_t i = 0; i < ref.samples.size(); ++i) {
        const double d = static_cast<double>(ref.samples[i]) - static_cast<double>(dist.samples[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(ref.samples.size());
}

double masked_mse(const LumaFrame& ref, const LumaFrame& dist, const WeightMask& mask) {
    check_frame_dims(ref, dist);
    if (mask.width != ref.width || mask.height != ref.height)
        throw DimensionMismatch("mask is " + std::to_string(mask.width) + "x" +
                                std::to_string(mask.height) + ", frames are " +
                                std::to_string(ref.width) + "x" + std::to_string(ref.height));
    if (mask.z == 0) throw EmptyMask("mask selects no pixels");
    double sum = 0.0;
    for (std::size_t i = 0; i < ref.samples.size(); ++i) {
        if (!mask.bits[i]) continue;
        const double d = static_cast<double>(ref.samples[i]) - static_cast<double>(dist.samples[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(mask.z);
}

double psnr_from_mse(double mse) { return 10.0 * std::log10(255.0 * 255.0 / mse); }

FrameScore score_frame_psnr_div(const LumaFrame& ref, const LumaFrame& dist,
                                const DivergenceMap& divergence, DivergenceThreshold thr,
                                std::size_t frame_index) {
    const WeightMask mask = threshold_mask(divergence, thr);
    if (mask.z == 0) {
        const double mse = mse_frame(ref, dist);
        return {frame_index, mse > 0.0 ? psnr_from_mse(mse) : kPsnrCapDb, true};
    }
    const double mse_w = masked_mse(ref, dist, mask);
    if (mse_w == 0.0) return {frame_index, kPsnrCapDb, true};
    return {frame_index, psnr_from_mse(mse_w), false};
}

ScalarMap epe_map(const MotionField& f_dist, const MotionField& f_ref) {
    if (f_dist.width != f_ref.width || f_dist.height != f_ref.height)
        throw DimensionMismatch("motion fields differ: " + std::to_string(f_dist.width) + "x" +
                                std::to_string(f_dist.height) + " vs " +
                                std::to_string(f_ref.width) + "x" + std::to_string(f_ref.height));
    ScalarMap out{f_dist.width, f_dist.height, std::vector<double>(f_dist.pixel_count(), 0.0)};
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::hypot(f_dist.u[i] - f_ref.u[i], f_dist.v[i] - f_ref.v[i]);
    return out;
}

EpeWeightMap epe_weights(const ScalarMap& epe) {
    EpeWeightMap out{epe.width, epe.height, std::vector<double>(epe.values.size(), 0.0), false};
    double total = 0.0;
    for (double v : epe.values) total += v;
    if (total == 0.0) {
        const double uniform = 1.0 / static_cast<double>(epe.values.size());
        for (auto& w : out.weights) w = uniform;
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < epe.values.size(); ++i) out.weights[i] = epe.values[i] / total;
    return out;
}

namespace {

double ssim_frame_impl(const LumaFrame& ref, const LumaFrame& dist) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

    check_frame_dims(ref, dist);
    const int w = ref.width, h = ref.height;
    if (w < kWin || h < kWin)
        throw FrameTooSmall("frame " + std::to_string(w) + "x" + std::to_string(h) +
                            " smaller than the " + std::to_string(kWin) + "x" +
                            std::to_string(kWin) + " window");

    double kernel[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double t = i - (kWin - 1) / 2.0;
        kernel[i] = std::exp(-t * t / (2.0 * kSigma * kSigma));
        ksum += kernel[i];
    }
    for (double& k : kernel) k /= ksum;

    // Separable valid-region Gaussian filtering of the five moment images.
    // The 2D window is the outer product of the 1D kernel with itself, so
    // two 1D passes match the direct 11x11 weighted sums.
    const int hw = w - kWin + 1;
    const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    const auto hidx = [hw](int x, int y) { return static_cast<std::size_t>(y) * hw + x; };

    std::vector<double> hx(static_cast<std::size_t>(hw) * h), hy(hx.size()), hxx(hx.size()),
        hyy(hx.size()), hxy(hx.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < hw; ++x) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int j = 0; j < kWin; ++j) {
                const double a = ref.samples[idx(x + j, y)];
                const double b = dist.samples[idx(x + j, y)];
                const double k = kernel[j];
                sx += k * a;
                sy += k * b;
                sxx += k * a * a;
                syy += k * b * b;
                sxy += k * a * b;
            }
            hx[hidx(x, y)] = sx;
            hy[hidx(x, y)] = sy;
            hxx[hidx(x, y)] = sxx;
            hyy[hidx(x, y)] = syy;
            hxy[hidx(x, y)] = sxy;
        }
    }

    const int vh = h - kWin + 1;
    double total = 0.0;
    for (int y = 0; y < vh; ++y) {
        for (int x = 0; x < hw; ++x) {
            double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
            for (int j = 0; j < kWin; ++j) {
                const double k = kernel[j];
                const std::size_t p = hidx(x, y + j);
                mx += k * hx[p];
                my += k * hy[p];
                mxx += k * hxx[p];
                myy += k * hyy[p];
                mxy += k * hxy[p];
            }
            const double var_x = mxx - mx * mx;
            const double var_y = myy - my * my;
            const double cov = mxy - mx * my;
            const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
            const double den = (mx * mx + my * my + kC1) * (var_x + var_y + kC2);
            total += num / den;
        }
    }
    return total / (static_cast<double>(hw) * vh);
}

// Distinct 2x2 block average; odd trailing row/column is handled by edge
// replication so any frame size is defined.
detail::FloatPlane half_size(const LumaFrame& src) {
    const int w = (src.width + 1) / 2, h = (src.height + 1) / 2;
    detail::FloatPlane out(w, h);
    for (int y = 0; y < h; ++y) {
        float* dst = out.row(y);
        for (int x = 0; x < w; ++x) {
            const int x0 = 2 * x, y0 = 2 * y;
            const int x1 = std::min(x0 + 1, src.width - 1);
            const int y1 = std::min(y0 + 1, src.height - 1);
            const double sum = static_cast<double>(src.at(x0, y0)) + src.at(x1, y0) +
                               src.at(x0, y1) + src.at(x1, y1);
            dst[x] = static_cast<float>(sum * 0.25);
        }
    }
    return out;
}

// Prewitt gradient magnitude with kernels scaled by 1/3, zero padding
// outside the image (the convention of the reference implementation).
std::vector<double> prewitt_magnitude(const detail::FloatPlane& img) {
    const int w = img.width, h = img.height;
    std::vector<double> mag(static_cast<std::size_t>(w) * h, 0.0);
    const auto sample = [&](int x, int y) -> double {
        if (x < 0 || x >= w || y < 0 || y >= h) return 0.0;
        return img.row(y)[x];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int j = -1; j <= 1; ++j) {
                gx += sample(x - 1, y + j) - sample(x + 1, y + j);
                gy += sample(x + j, y - 1) - sample(x + j, y + 1);
            }
            gx /= 3.0;
            gy /= 3.0;
            mag[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return mag;
}

double gmsd_frame_impl(const LumaFrame& ref, const LumaFrame& dist) {
    constexpr double kC = 170.0;
    check_frame_dims(ref, dist);

    const detail::FloatPlane r = half_size(ref);
    const detail::FloatPlane d = half_size(dist);
    const std::vector<double> mr = prewitt_magnitude(r);
    const std::vector<double> md = prewitt_magnitude(d);

    std::vector<double> gms(mr.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < mr.size(); ++i) {
        gms[i] = (2.0 * mr[i] * md[i] + kC) / (mr[i] * mr[i] + md[i] * md[i] + kC);
        mean += gms[i];
    }
    mean /= static_cast<double>(gms.size());
    double var = 0.0;
    for (double g : gms) {
        const double dv = g - mean;
        var += dv * dv;
    }
    return std::sqrt(var / static_cast<double>(gms.size()));
}

void check_sequences(const FrameSequence& ref, const FrameSequence& dist, bool needs_flow) {
    if (ref.spec().width != dist.spec().width || ref.spec().height != dist.spec().height)
        throw DimensionMismatch("sequence sizes differ: " + std::to_string(ref.spec().width) +
                                "x" + std::to_string(ref.spec().height) + " vs " +
                                std::to_string(dist.spec().width) + "x" +
                                std::to_string(dist.spec().height));
    if (ref.frame_count() != dist.frame_count())
        throw DimensionMismatch("frame counts differ: " + std::to_string(ref.frame_count()) +
                                " vs " + std::to_string(dist.frame_count()));
    const std::size_t min_frames = needs_flow ? 2 : 1;
    if (ref.frame_count() < min_frames)
        throw EmptySequence(needs_flow ? "flow-weighted metrics need at least 2 frames"
                                       : "nothing to score in an empty sequence");
}

std::vector<std::size_t> select_frames(std::size_t total, bool needs_flow, std::size_t stride) {
    const std::size_t end = needs_flow ? total - 1 : total;
    std::vector<std::size_t> indices;
    indices.reserve(end);
    for (std::size_t n = 0; n < end; ++n)
        if (stride <= 1 || n % stride != 0) indices.push_back(n);
    if (indices.empty())
        throw EmptySequence("interpolated-frame selection left no frames to score");
    return indices;
}

SequenceScore drive(const std::string& name, std::size_t total,
                    const std::vector<std::size_t>& indices, std::size_t workers,
                    const std::function<FrameScore(std::size_t)>& score_one) {
    std::vector<FrameScore> per_frame(indices.size());
    parallel_for(0, indices.size(), workers,
                 [&](std::size_t slot) { per_frame[slot] = score_one(indices[slot]); });
    double sum = 0.0;
    for (const FrameScore& s : per_frame) sum += s.value;
    return {name, std::move(per_frame), sum / static_cast<double>(indices.size()), total};
}

FrameScore plain_psnr_frame(const LumaFrame& ref, const LumaFrame& dist, std::size_t n) {
    const double mse = mse_frame(ref, dist);
    if (mse == 0.0) return {n, kPsnrCapDb, true};
    return {n, psnr_from_mse(mse), false};
}

} // namespace

double ssim_frame(const LumaFrame& ref, const LumaFrame& dist) {
    return ssim_frame_impl(ref, dist);
}

double gmsd_frame(const LumaFrame& ref, const LumaFrame& dist) {
    return gmsd_frame_impl(ref, dist);
}

SequenceScore psnr(const FrameSequence& ref, const FrameSequence& dist,
                   const ScoreOptions& options) {
    check_sequences(ref, dist, false);
    const auto indices = select_frames(ref.frame_count(), false, options.interpolated_stride);
    return drive("psnr", ref.frame_count(), indices, options.workers, [&](std::size_t n) {
        return plain_psnr_frame(ref.luma(n), dist.luma(n), n);
    });
}

SequenceScore ssim(const FrameSequence& ref, const FrameSequence& dist,
                   const ScoreOptions& options) {
    check_sequences(ref, dist, false);
    const auto indices = select_frames(ref.frame_count(), false, options.interpolated_stride);
    return drive("ssim", ref.frame_count(), indices, options.workers, [&](std::size_t n) {
        return FrameScore{n, ssim_frame_impl(ref.luma(n), dist.luma(n)), false};
    });
}

SequenceScore gmsd(const FrameSequence& ref, const FrameSequence& dist,
                   const ScoreOptions& options) {
    check_sequences(ref, dist, false);
    const auto indices = select_frames(ref.frame_count(), false, options.interpolated_stride);
    return drive("gmsd", ref.frame_count(), indices, options.workers, [&](std::size_t n) {
        return FrameScore{n, gmsd_frame_impl(ref.luma(n), dist.luma(n)), false};
    });
}

SequenceScore psnr_div(const FrameSequence& ref, const FrameSequence& dist,
                       const FlowSource& flow_source, DivergenceThreshold thr,
                       const ScoreOptions& options) {
    check_sequences(ref, dist, true);
    const auto indices = select_frames(ref.frame_count(), true, options.interpolated_stride);
    return drive("psnr-div", ref.frame_count(), indices, options.workers, [&](std::size_t n) {
        const LumaFrame prev = dist.luma(n);
        const LumaFrame next = dist.luma(n + 1);
        const MotionField field = flow_source.field(SequenceSide::distorted, n, prev, next);
        const DivergenceMap div = normalize_divergence(raw_divergence(field));
        return score_frame_psnr_div(ref.luma(n), prev, div, thr, n);
    });
}

SequenceScore psnr_epe(const FrameSequence& ref, const FrameSequence& dist,
                       const FlowSource& flow_source, const ScoreOptions& options) {
    check_sequences(ref, dist, true);
    const auto indices = select_frames(ref.frame_count(), true, options.interpolated_stride);
    return drive("psnr-epe", ref.frame_count(), indices, options.workers, [&](std::size_t n) {
        const LumaFrame ref_prev = ref.luma(n);
        const LumaFrame dist_prev = dist.luma(n);
        const MotionField f_ref =
            flow_source.field(SequenceSide::reference, n, ref_prev, ref.luma(n + 1));
        const MotionField f_dist =
            flow_source.field(SequenceSide::distorted, n, dist_prev, dist.luma(n + 1));
        const EpeWeightMap weights = epe_weights(epe_map(f_dist, f_ref));

        double mse_w = 0.0;
        for (std::size_t i = 0; i < weights.weights.size(); ++i) {
            const double d = static_cast<double>(ref_prev.samples[i]) -
                             static_cast<double>(dist_prev.samples[i]);
            mse_w += weights.weights[i] * d * d;
        }
        if (mse_w == 0.0) return FrameScore{n, kPsnrCapDb, true};
        return FrameScore{n, psnr_from_mse(mse_w), weights.degenerate};
    });
}

SequenceScore score_sequence(MetricKind kind, const FrameSequence& ref, const FrameSequence& dist,
                             const FlowSource* flow_source, DivergenceThreshold thr,
                             const ScoreOptions& options) {
    if (metric_needs_flow(kind) && flow_source == nullptr)
        throw InvalidSpec(to_string(kind) + " needs a flow source");
    switch (kind) {
        case MetricKind::psnr: return psnr(ref, dist, options);
        case MetricKind::ssim: return ssim(ref, dist, options);
        case MetricKind::gmsd: return gmsd(ref, dist, options);
        case MetricKind::psnr_div: return psnr_div(ref, dist, *flow_source, thr, options);
        case MetricKind::psnr_epe: return psnr_epe(ref, dist, *flow_source, options);
    }
    throw InvalidSpec("unknown metric kind");
}

} // namespace vfiqa
