#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vfiqa/errors.hpp"

namespace vfiqa {

// One subject's pair of raw opinion scores for one video.
struct OpinionRecord {
    std::string subject_id;
    std::string video_id;
    double s_ref = 0.0;
    double s_dist = 0.0;
};

// Differential mean opinion scores keyed by video, rows sorted by video_id.
struct DmosTable {
    struct Row {
        std::string video_id;
        double dmos = 0.0;
        std::size_t subjects = 0;
    };
    std::vector<Row> rows;

    std::size_t size() const { return rows.size(); }
    const Row& by_video(const std::string& video_id) const;
};

// d_ij = s_ij(ref) - s_ij(dist), averaged per video over subjects.
DmosTable compute_dmos(const std::vector<OpinionRecord>& records);

// CSV columns: subject_id, video_id, s_ref, s_dist (header row optional).
std::vector<OpinionRecord> read_opinion_csv(const std::string& path);

// Four-parameter logistic Y(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3)/|b4|)).
// b1 and b2 are the asymptotes (either order, so decreasing relations fit
// without special cases), b3 the midpoint, |b4| the slope scale.
struct LogisticParams {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;
    double beta4 = 1.0;

    double operator()(double x) const;
};

// Least-squares fit of the logistic to (scores -> targets): coarse search
// over midpoint/scale candidates with the asymptotes solved linearly, then
// Levenberg-Marquardt refinement to gradient tolerance 1e-8 (at most 500
// iterations). Refinement only ever accepts steps that lower the residual.
LogisticParams fit_logistic(const std::vector<double>& scores,
                            const std::vector<double>& targets);

// Correlation / error measures. plcc and rmse follow the usual convention
// of being applied to logistic-mapped scores; srcc and krcc are rank based
// and consume raw scores (they are invariant under the monotone mapping).
double plcc(const std::vector<double>& x, const std::vector<double>& y);
double srcc(const std::vector<double>& x, const std::vector<double>& y);
double krcc(const std::vector<double>& x, const std::vector<double>& y); // tau-b
double rmse(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationReport {
    double plcc = 0.0;
    double srcc = 0.0;
    double krcc = 0.0;
    double rmse = 0.0;
    LogisticParams fit;
    std::size_t n = 0;
};

// Full evaluation of one metric against subjective scores: fit the
// logistic, then PLCC/RMSE on mapped values and SRCC/KRCC on raw values.
CorrelationReport evaluate_aligned(const std::vector<double>& scores,
                                   const std::vector<double>& dmos);
CorrelationReport evaluate_metric(const std::map<std::string, double>& scores_by_video,
                                  const DmosTable& dmos);

struct MeasureSet {
    double plcc = 0.0;
    double srcc = 0.0;
    double krcc = 0.0;
    double rmse = 0.0;
};

struct BootstrapReport {
    double subset_fraction = 1.0;
    std::size_t iterations = 0;
    std::vector<MeasureSet> metric_a; // one entry per iteration
    std::vector<MeasureSet> metric_b;
    MeasureSet p_values; // paired two-sided t-test per measure
};

// Draws ceil(fraction*n) videos with replacement per iteration (fraction 1.0
// uses the identity subset so results coincide with evaluate_metric), refits
// both metrics on the subset, and compares the per-iteration measure
// distributions with a paired two-sided t-test. Deterministic given seed; an
// all-zero difference vector yields p = 1.
BootstrapReport bootstrap_compare(const std::map<std::string, double>& metric_a,
                                  const std::map<std::string, double>& metric_b,
                                  const DmosTable& dmos, double subset_fraction,
                                  std::size_t iterations, std::uint64_t seed);

} // namespace vfiqa
