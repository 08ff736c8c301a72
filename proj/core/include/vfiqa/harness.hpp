#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfiqa/divergence.hpp"
#include "vfiqa/errors.hpp"
#include "vfiqa/flow.hpp"
#include "vfiqa/metrics.hpp"
#include "vfiqa/stats.hpp"
#include "vfiqa/video_io.hpp"

namespace vfiqa {

struct ManifestEntry {
    std::string video_id;
    std::string ref_path;
    std::string dist_path;
    VideoSpec spec;            // frame_rate is the output (scored) rate
    Rational fps_in{30, 1};    // source rate before interpolation
    double dmos = 0.0;
    std::optional<std::string> flow_dir; // precomputed distorted-side fields

    std::string resolution_label() const; // "1080p"
    std::string rate_label() const;       // "30->60"
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

// CSV columns: video_id, ref_path, dist_path, width, height, fps_in,
// fps_out, dmos, optional flow_dir. Header row optional; relative paths are
// resolved against the manifest's directory.
DatasetManifest read_manifest_csv(const std::string& path);

struct RunConfig {
    std::vector<MetricKind> metrics{MetricKind::psnr_div};
    DivergenceThreshold threshold{};
    FarnebackParams flow_params{};
    std::size_t workers = 0; // 0 = default_workers()
    // Score only frames synthesized by the interpolator. Each entry's stride
    // is its fps_out/fps_in ratio, which must be an integer >= 2.
    bool only_interpolated = false;
};

// Upsampling factor of one manifest entry; frame indices divisible by it are
// source frames, the rest are interpolated.
std::size_t interpolation_stride(const ManifestEntry& entry);

struct EntryScores {
    std::string video_id;
    double dmos = 0.0;
    std::string resolution_label;
    std::string rate_label;
    std::map<std::string, SequenceScore> by_metric; // keyed by metric name
};

struct EntryError {
    std::string video_id;
    std::string message;
};

// Correlation reports for one slice of the dataset (overall, or one
// resolution / rate-conversion group).
struct SubsetReport {
    std::string kind;  // "resolution" or "rate"
    std::string label; // "1080p", "30->60", ...
    std::size_t entries = 0;
    std::map<std::string, CorrelationReport> by_metric;
};

struct RunResult {
    std::vector<EntryScores> scored;  // manifest order, failed entries omitted
    std::vector<EntryError> errors;   // manifest order
    std::map<std::string, CorrelationReport> overall; // metric name -> report
    std::vector<SubsetReport> subsets;
};

// Scores every manifest entry with every requested metric and correlates
// aggregates against DMOS. A failing entry is recorded and excluded without
// stopping the run; fewer than 4 scorable entries aborts (the fit needs 4).
RunResult run_dataset(const DatasetManifest& manifest, const RunConfig& config);

// One motion estimator in a sweep: either the built-in estimator with given
// parameters, or a directory tree of precomputed fields laid out as
// <flow_base_dir>/<video_id>/%06d.flo.
struct EstimatorConfig {
    std::string label;
    bool builtin = true;
    FarnebackParams params{};
    std::string flow_base_dir;
};

struct SweepCell {
    std::string estimator;
    double threshold = 0.0;
    CorrelationReport report;
    std::size_t frames_scored = 0;
    std::size_t frames_degenerate = 0; // empty-mask or zero-error fallbacks
};

struct SweepResult {
    std::vector<SweepCell> cells; // estimator-major, thresholds ascending
    std::vector<EntryError> errors;
};

// Divergence-threshold sweep of the masked metric. Flow (and thus the
// normalized divergence map) is threshold-independent, so it is computed
// once per (entry, estimator) and shared across all thresholds.
SweepResult sweep_threshold(const DatasetManifest& manifest,
                            const std::vector<double>& thresholds,
                            const std::vector<EstimatorConfig>& estimators,
                            const RunConfig& config);

struct TimingReport {
    std::string metric_name;
    int width = 0;
    int height = 0;
    std::size_t samples = 0;  // timed frame scores, warm-up excluded
    std::size_t warmup = 1;
    double median_ms = 0.0;
    double mean_ms = 0.0;
};

// Wall-clock cost of scoring one frame, median over `samples` single
// threaded runs after one untimed warm-up. Flow estimation is part of the
// timed region for flow-weighted metrics.
TimingReport time_metric(const FrameSequence& ref, const FrameSequence& dist, MetricKind kind,
                         std::size_t samples, const FlowSource& flow_source,
                         DivergenceThreshold thr = {});

} // namespace vfiqa
