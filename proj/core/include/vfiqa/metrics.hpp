#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vfiqa/divergence.hpp"
#include "vfiqa/errors.hpp"
#include "vfiqa/flow.hpp"
#include "vfiqa/video_io.hpp"

namespace vfiqa {

enum class MetricKind { psnr, ssim, gmsd, psnr_div, psnr_epe };

std::string to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& name);

// Flow-weighted metrics score frame pairs (n, n+1), so they need >= 2 frames
// and leave the last frame unscored.
inline bool metric_needs_flow(MetricKind kind) {
    return kind == MetricKind::psnr_div || kind == MetricKind::psnr_epe;
}
// The EPE ablation compares fields from both sequences; everything else
// needs at most the distorted side.
inline bool metric_needs_reference_flow(MetricKind kind) { return kind == MetricKind::psnr_epe; }
// GMSD is a distortion measure (0 = identical); the rest grow with quality.
inline bool metric_higher_is_better(MetricKind kind) { return kind != MetricKind::gmsd; }

// Finite stand-in for +inf dB when the masked or plain MSE is exactly zero.
inline constexpr double kPsnrCapDb = 100.0;

struct FrameScore {
    std::size_t frame_index = 0;
    double value = 0.0;
    bool degenerate = false; // a defined fallback was taken (zero MSE cap, empty mask, ...)
};

struct SequenceScore {
    std::string metric_name;
    std::vector<FrameScore> per_frame;
    double aggregate = 0.0; // arithmetic mean of per_frame values
    std::size_t frames_total = 0;
};

// Nonnegative per-pixel weights summing to 1. An all-zero end-point-error
// map has no meaningful normalization; weights are then uniform 1/N with
// `degenerate` set.
struct EpeWeightMap {
    int width = 0;
    int height = 0;
    std::vector<double> weights;
    bool degenerate = false;
};

struct ScoreOptions {
    std::size_t workers = 0; // 0 = resolve via default_workers()
    // When > 1, score only frames n with n % stride != 0: with an integer
    // upsampling factor k, indices divisible by k are source frames and the
    // rest were synthesized by the interpolator.
    std::size_t interpolated_stride = 0;
};

// Frame-level primitives. All arithmetic in double on promoted 8-bit luma.
double mse_frame(const LumaFrame& ref, const LumaFrame& dist);
double masked_mse(const LumaFrame& ref, const LumaFrame& dist, const WeightMask& mask);
double psnr_from_mse(double mse); // 20*log10(255/sqrt(mse)); caller guards mse 0
double ssim_frame(const LumaFrame& ref, const LumaFrame& dist);
double gmsd_frame(const LumaFrame& ref, const LumaFrame& dist);

// Divergence-masked score of one frame given its precomputed normalized
// divergence map. Fallbacks: empty mask (including degenerate divergence)
// scores plain frame PSNR; zero masked MSE caps at kPsnrCapDb. Both set the
// degenerate flag. Shared by the sequence driver and the threshold sweep so
// cached-divergence paths stay bit-identical.
FrameScore score_frame_psnr_div(const LumaFrame& ref, const LumaFrame& dist,
                                const DivergenceMap& divergence, DivergenceThreshold thr,
                                std::size_t frame_index);

ScalarMap epe_map(const MotionField& f_dist, const MotionField& f_ref);
EpeWeightMap epe_weights(const ScalarMap& epe);

// Sequence-level metrics. Aggregate is the arithmetic mean of per-frame
// scores; frame fan-out is deterministic for any worker count.
SequenceScore psnr(const FrameSequence& ref, const FrameSequence& dist,
                   const ScoreOptions& options = {});
SequenceScore ssim(const FrameSequence& ref, const FrameSequence& dist,
                   const ScoreOptions& options = {});
SequenceScore gmsd(const FrameSequence& ref, const FrameSequence& dist,
                   const ScoreOptions& options = {});
SequenceScore psnr_div(const FrameSequence& ref, const FrameSequence& dist,
                       const FlowSource& flow_source, DivergenceThreshold thr = {},
                       const ScoreOptions& options = {});
SequenceScore psnr_epe(const FrameSequence& ref, const FrameSequence& dist,
                       const FlowSource& flow_source, const ScoreOptions& options = {});

// Dispatch by kind; flow_source may be null for non-flow metrics.
SequenceScore score_sequence(MetricKind kind, const FrameSequence& ref,
                             const FrameSequence& dist, const FlowSource* flow_source,
                             DivergenceThreshold thr = {}, const ScoreOptions& options = {});

} // namespace vfiqa
