#include "vfiqa/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>

#include "csv.hpp"
#include "vfiqa/parallel.hpp"

namespace vfiqa {

std::string ManifestEntry::resolution_label() const {
    return std::to_string(spec.height) + "p";
}

std::string ManifestEntry::rate_label() const {
    return fps_in.str() + "->" + spec.frame_rate.str();
}

DatasetManifest read_manifest_csv(const std::string& path) {
    const auto rows = detail::read_csv_rows(path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    const auto resolve = [&base](const std::string& p) {
        if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
        return (base / p).string();
    };

    DatasetManifest manifest;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (i == 0 && !row.empty() && row[0] == "video_id") continue;
        const std::string ctx = path + " row " + std::to_string(i + 1);
        if (row.size() != 8 && row.size() != 9)
            throw ManifestError(ctx + ": expected 8 or 9 columns (video_id, ref_path, "
                                      "dist_path, width, height, fps_in, fps_out, dmos[, "
                                      "flow_dir]), got " +
                                std::to_string(row.size()));

        ManifestEntry entry;
        entry.video_id = row[0];
        if (entry.video_id.empty()) throw ManifestError(ctx + ": empty video_id");
        if (!ids.insert(entry.video_id).second)
            throw ManifestError(ctx + ": duplicate video_id '" + entry.video_id + "'");
        entry.ref_path = resolve(row[1]);
        entry.dist_path = resolve(row[2]);
        entry.spec.width = static_cast<int>(detail::parse_long(row[3], ctx));
        entry.spec.height = static_cast<int>(detail::parse_long(row[4], ctx));
        try {
            entry.fps_in = Rational::parse(row[5]);
            entry.spec.frame_rate = Rational::parse(row[6]);
        } catch (const Error& e) {
            throw ManifestError(ctx + ": " + e.what());
        }
        entry.dmos = detail::parse_double(row[7], ctx);
        if (row.size() == 9 && !row[8].empty()) entry.flow_dir = resolve(row[8]);
        try {
            entry.spec.validate();
        } catch (const Error& e) {
            throw ManifestError(ctx + ": " + e.what());
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

std::size_t interpolation_stride(const ManifestEntry& entry) {
    const long long num = entry.spec.frame_rate.num * entry.fps_in.den;
    const long long den = entry.spec.frame_rate.den * entry.fps_in.num;
    if (num <= 0 || den <= 0 || num % den != 0)
        throw InvalidSpec(entry.video_id + ": rate conversion " + entry.rate_label() +
                          " is not an integer upsampling factor");
    const long long ratio = num / den;
    if (ratio < 2)
        throw InvalidSpec(entry.video_id + ": rate conversion " + entry.rate_label() +
                          " interpolates no frames");
    return static_cast<std::size_t>(ratio);
}

namespace {

std::unique_ptr<FlowSource> entry_flow_source(const ManifestEntry& entry,
                                              const FarnebackParams& params) {
    if (entry.flow_dir)
        return std::make_unique<FloDirectorySource>("flo", *entry.flow_dir);
    return std::make_unique<FarnebackSource>(params);
}

// Outer (per entry) and inner (per frame) parallelism share one worker
// budget so a batch run does not oversubscribe the machine.
std::size_t inner_workers(std::size_t total_workers, std::size_t entries) {
    const std::size_t outer = std::min(total_workers, std::max<std::size_t>(entries, 1));
    return std::max<std::size_t>(1, total_workers / outer);
}

struct EntryOutcome {
    bool ok = false;
    EntryScores scores;
    std::string error;
};

void append_subset_reports(const std::vector<EntryScores>& scored,
                           const std::vector<std::string>& metric_names, const std::string& kind,
                           const std::function<const std::string&(const EntryScores&)>& key_of,
                           std::vector<SubsetReport>& out) {
    std::map<std::string, std::vector<const EntryScores*>> groups;
    for (const EntryScores& e : scored) groups[key_of(e)].push_back(&e);
    for (const auto& [label, members] : groups) {
        if (members.size() < 4) continue; // below the fit's minimum sample count
        SubsetReport report{kind, label, members.size(), {}};
        for (const std::string& metric : metric_names) {
            std::vector<double> scores, dmos;
            for (const EntryScores* e : members) {
                scores.push_back(e->by_metric.at(metric).aggregate);
                dmos.push_back(e->dmos);
            }
            try {
                report.by_metric[metric] = evaluate_aligned(scores, dmos);
            } catch (const DegenerateFit&) {
            } catch (const ZeroVariance&) {
            }
        }
        if (!report.by_metric.empty()) out.push_back(std::move(report));
    }
}

} // namespace

RunResult run_dataset(const DatasetManifest& manifest, const RunConfig& config) {
    if (config.metrics.empty()) throw InvalidSpec("no metrics requested");
    const std::size_t n = manifest.entries.size();
    const std::size_t workers = resolve_workers(config.workers);
    const std::size_t frame_workers = inner_workers(workers, n);

    std::vector<EntryOutcome> outcomes(n);
    parallel_for(0, n, std::min(workers, std::max<std::size_t>(n, 1)), [&](std::size_t i) {
        const ManifestEntry& entry = manifest.entries[i];
        EntryOutcome& out = outcomes[i];
        try {
            const FrameSequence ref = read_yuv420(entry.ref_path, entry.spec);
            const FrameSequence dist = read_yuv420(entry.dist_path, entry.spec);
            const auto flow = entry_flow_source(entry, config.flow_params);
            ScoreOptions options;
            options.workers = frame_workers;
            if (config.only_interpolated) options.interpolated_stride = interpolation_stride(entry);

            out.scores.video_id = entry.video_id;
            out.scores.dmos = entry.dmos;
            out.scores.resolution_label = entry.resolution_label();
            out.scores.rate_label = entry.rate_label();
            for (const MetricKind kind : config.metrics)
                out.scores.by_metric[to_string(kind)] =
                    score_sequence(kind, ref, dist, flow.get(), config.threshold, options);
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    RunResult result;
    for (std::size_t i = 0; i < n; ++i) {
        if (outcomes[i].ok)
            result.scored.push_back(std::move(outcomes[i].scores));
        else
            result.errors.push_back({manifest.entries[i].video_id, outcomes[i].error});
    }
    if (result.scored.size() < 4)
        throw AbortedRun("only " + std::to_string(result.scored.size()) +
                         " of " + std::to_string(n) +
                         " entries scorable; correlation fit needs at least 4");

    std::vector<std::string> metric_names;
    for (const MetricKind kind : config.metrics) metric_names.push_back(to_string(kind));

    for (const std::string& metric : metric_names) {
        std::vector<double> scores, dmos;
        for (const EntryScores& e : result.scored) {
            scores.push_back(e.by_metric.at(metric).aggregate);
            dmos.push_back(e.dmos);
        }
        result.overall[metric] = evaluate_aligned(scores, dmos);
    }

    append_subset_reports(
        result.scored, metric_names, "resolution",
        [](const EntryScores& e) -> const std::string& { return e.resolution_label; },
        result.subsets);
    append_subset_reports(
        result.scored, metric_names, "rate",
        [](const EntryScores& e) -> const std::string& { return e.rate_label; },
        result.subsets);
    return result;
}

SweepResult sweep_threshold(const DatasetManifest& manifest,
                            const std::vector<double>& thresholds,
                            const std::vector<EstimatorConfig>& estimators,
                            const RunConfig& config) {
    if (thresholds.empty()) throw InvalidSpec("sweep needs at least one threshold");
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
        if (!(thresholds[i] < thresholds[i + 1]))
            throw InvalidSpec("sweep thresholds must be strictly increasing");
    for (const double t : thresholds) static_cast<void>(DivergenceThreshold{t}); // range check
    if (estimators.empty()) throw InvalidSpec("sweep needs at least one estimator");
    {
        std::set<std::string> labels;
        for (const auto& est : estimators)
            if (!labels.insert(est.label).second)
                throw InvalidSpec("duplicate estimator label '" + est.label + "'");
    }

    const std::size_t n = manifest.entries.size();
    const std::size_t workers = resolve_workers(config.workers);

    struct EntrySweep {
        bool ok = false;
        std::string error;
        double dmos = 0.0;
        // per estimator, per threshold: aggregate score + degeneracy counts
        std::vector<std::vector<SequenceScore>> scores;
    };
    std::vector<EntrySweep> outcomes(n);

    parallel_for(0, n, std::min(workers, std::max<std::size_t>(n, 1)), [&](std::size_t i) {
        const ManifestEntry& entry = manifest.entries[i];
        EntrySweep& out = outcomes[i];
        out.dmos = entry.dmos;
        try {
            const FrameSequence ref = read_yuv420(entry.ref_path, entry.spec);
            const FrameSequence dist = read_yuv420(entry.dist_path, entry.spec);
            if (dist.frame_count() < 2)
                throw EmptySequence("flow-weighted metrics need at least 2 frames");
            const std::size_t pairs = dist.frame_count() - 1;
            const std::size_t stride =
                config.only_interpolated ? interpolation_stride(entry) : 0;
            std::vector<std::size_t> scored_pairs;
            for (std::size_t p = 0; p < pairs; ++p)
                if (stride <= 1 || p % stride != 0) scored_pairs.push_back(p);
            if (scored_pairs.empty())
                throw EmptySequence("interpolated-frame selection left no frames to score");

            out.scores.resize(estimators.size());
            for (std::size_t e = 0; e < estimators.size(); ++e) {
                const EstimatorConfig& est = estimators[e];
                std::unique_ptr<FlowSource> flow;
                if (est.builtin) {
                    flow = std::make_unique<FarnebackSource>(est.params);
                } else {
                    flow = std::make_unique<FloDirectorySource>(
                        est.label, est.flow_base_dir + "/" + entry.video_id);
                }

                // The expensive, threshold-independent half of the pipeline
                // runs once per estimator.
                std::map<std::size_t, DivergenceMap> divergence;
                for (const std::size_t p : scored_pairs) {
                    const LumaFrame prev = dist.luma(p);
                    const LumaFrame next = dist.luma(p + 1);
                    divergence[p] = normalize_divergence(
                        raw_divergence(flow->field(SequenceSide::distorted, p, prev, next)));
                }

                out.scores[e].reserve(thresholds.size());
                for (const double t : thresholds) {
                    SequenceScore seq;
                    seq.metric_name = "psnr-div";
                    seq.frames_total = dist.frame_count();
                    double sum = 0.0;
                    for (const std::size_t p : scored_pairs) {
                        seq.per_frame.push_back(score_frame_psnr_div(
                            ref.luma(p), dist.luma(p), divergence.at(p), DivergenceThreshold{t},
                            p));
                        sum += seq.per_frame.back().value;
                    }
                    seq.aggregate = sum / static_cast<double>(scored_pairs.size());
                    out.scores[e].push_back(std::move(seq));
                }
            }
            out.ok = true;
        } catch (const std::exception& ex) {
            out.scores.clear();
            out.error = ex.what();
        }
    });

    SweepResult result;
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < n; ++i) {
        if (outcomes[i].ok)
            usable.push_back(i);
        else
            result.errors.push_back({manifest.entries[i].video_id, outcomes[i].error});
    }
    if (usable.size() < 4)
        throw AbortedRun("only " + std::to_string(usable.size()) + " of " + std::to_string(n) +
                         " entries scorable; correlation fit needs at least 4");

    for (std::size_t e = 0; e < estimators.size(); ++e) {
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            SweepCell cell;
            cell.estimator = estimators[e].label;
            cell.threshold = thresholds[t];
            std::vector<double> scores, dmos;
            for (const std::size_t i : usable) {
                const SequenceScore& seq = outcomes[i].scores[e][t];
                scores.push_back(seq.aggregate);
                dmos.push_back(outcomes[i].dmos);
                cell.frames_scored += seq.per_frame.size();
                for (const FrameScore& f : seq.per_frame)
                    if (f.degenerate) ++cell.frames_degenerate;
            }
            cell.report = evaluate_aligned(scores, dmos);
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

TimingReport time_metric(const FrameSequence& ref, const FrameSequence& dist, MetricKind kind,
                         std::size_t samples, const FlowSource& flow_source,
                         DivergenceThreshold thr) {
    if (samples < 1) throw InvalidSpec("need at least one timed sample");
    const bool needs_flow = metric_needs_flow(kind);
    const std::size_t frames = ref.frame_count();
    if (frames < 2) throw EmptySequence("timing needs at least 2 frames");
    const std::size_t scorable = needs_flow ? frames - 1 : frames;

    // One scored frame per sample, cycling through the sequence; sample 0 is
    // the untimed warm-up.
    double sink = 0.0;
    std::vector<double> ms;
    ms.reserve(samples);
    for (std::size_t s = 0; s <= samples; ++s) {
        const std::size_t f = s % scorable;
        const auto t0 = std::chrono::steady_clock::now();
        switch (kind) {
            case MetricKind::psnr: {
                const double mse = mse_frame(ref.luma(f), dist.luma(f));
                sink += mse > 0.0 ? psnr_from_mse(mse) : kPsnrCapDb;
                break;
            }
            case MetricKind::ssim:
                sink += ssim_frame(ref.luma(f), dist.luma(f));
                break;
            case MetricKind::gmsd:
                sink += gmsd_frame(ref.luma(f), dist.luma(f));
                break;
            case MetricKind::psnr_div: {
                const LumaFrame prev = dist.luma(f);
                const LumaFrame next = dist.luma(f + 1);
                const MotionField field =
                    flow_source.field(SequenceSide::distorted, f, prev, next);
                const DivergenceMap div = normalize_divergence(raw_divergence(field));
                sink += score_frame_psnr_div(ref.luma(f), prev, div, thr, f).value;
                break;
            }
            case MetricKind::psnr_epe: {
                const MotionField f_ref =
                    flow_source.field(SequenceSide::reference, f, ref.luma(f), ref.luma(f + 1));
                const MotionField f_dist =
                    flow_source.field(SequenceSide::distorted, f, dist.luma(f), dist.luma(f + 1));
                const EpeWeightMap w = epe_weights(epe_map(f_dist, f_ref));
                const LumaFrame r = ref.luma(f);
                const LumaFrame d = dist.luma(f);
                double mse_w = 0.0;
                for (std::size_t i = 0; i < w.weights.size(); ++i) {
                    const double diff =
                        static_cast<double>(r.samples[i]) - static_cast<double>(d.samples[i]);
                    mse_w += w.weights[i] * diff * diff;
                }
                sink += mse_w > 0.0 ? psnr_from_mse(mse_w) : kPsnrCapDb;
                break;
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        if (s == 0) continue; // warm-up
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    if (!std::isfinite(sink)) throw InvalidSpec("non-finite score during timing");

    TimingReport report;
    report.metric_name = to_string(kind);
    report.width = ref.spec().width;
    report.height = ref.spec().height;
    report.samples = samples;
    report.warmup = 1;
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    report.median_ms = sorted.size() % 2 == 1
                           ? sorted[sorted.size() / 2]
                           : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    report.mean_ms = 0.0;
    for (const double v : ms) report.mean_ms += v;
    report.mean_ms /= static_cast<double>(ms.size());
    return report;
}

} // namespace vfiqa
