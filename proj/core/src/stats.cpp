#include "vfiqa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "csv.hpp"

namespace vfiqa {

const DmosTable::Row& DmosTable::by_video(const std::string& video_id) const {
    const auto it = std::lower_bound(
        rows.begin(), rows.end(), video_id,
        [](const Row& r, const std::string& id) { return r.video_id < id; });
    if (it == rows.end() || it->video_id != video_id)
        throw IndexOutOfRange("no subjective entry for video '" + video_id + "'");
    return *it;
}

DmosTable compute_dmos(const std::vector<OpinionRecord>& records) {
    if (records.empty()) throw EmptySequence("no opinion records");
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::pair<double, std::size_t>> acc; // video -> (sum d, count)
    for (const OpinionRecord& r : records) {
        if (!seen.insert({r.subject_id, r.video_id}).second)
            throw DuplicateRecord("subject '" + r.subject_id + "' scored video '" + r.video_id +
                                  "' more than once");
        auto& slot = acc[r.video_id];
        slot.first += r.s_ref - r.s_dist;
        slot.second += 1;
    }
    DmosTable table;
    table.rows.reserve(acc.size());
    for (const auto& [video_id, sum_count] : acc)
        table.rows.push_back({video_id, sum_count.first / static_cast<double>(sum_count.second),
                              sum_count.second});
    return table;
}

std::vector<OpinionRecord> read_opinion_csv(const std::string& path) {
    const auto rows = detail::read_csv_rows(path);
    std::vector<OpinionRecord> records;
    records.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (i == 0 && !row.empty() && row[0] == "subject_id") continue;
        const std::string ctx = path + " row " + std::to_string(i + 1);
        if (row.size() != 4)
            throw ManifestError(ctx + ": expected 4 columns (subject_id, video_id, s_ref, "
                                      "s_dist), got " +
                                std::to_string(row.size()));
        records.push_back({row[0], row[1], detail::parse_double(row[2], ctx),
                           detail::parse_double(row[3], ctx)});
    }
    if (records.empty()) throw ManifestError(path + ": no opinion records");
    return records;
}

double LogisticParams::operator()(double x) const {
    const double scale = std::max(std::abs(beta4), 1e-12);
    const double t = std::clamp(-(x - beta3) / scale, -500.0, 500.0);
    return beta2 + (beta1 - beta2) / (1.0 + std::exp(t));
}

namespace {

double sse_of(const LogisticParams& p, const std::vector<double>& x,
              const std::vector<double>& y) {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = p(x[i]) - y[i];
        sse += r * r;
    }
    return sse;
}

// For fixed midpoint/scale the model is linear in the asymptotes:
// Y = b1*L + b2*(1-L). Solving that 2x2 least-squares problem exactly makes
// the coarse search cheap and handles decreasing relations for free.
bool solve_asymptotes(const std::vector<double>& x, const std::vector<double>& y, double beta3,
                      double beta4, LogisticParams& out) {
    double suu = 0, suv = 0, svv = 0, suy = 0, svy = 0;
    LogisticParams probe{1.0, 0.0, beta3, beta4};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double l = probe(x[i]); // equals the logistic factor L(x)
        const double m = 1.0 - l;
        suu += l * l;
        suv += l * m;
        svv += m * m;
        suy += l * y[i];
        svy += m * y[i];
    }
    const double det = suu * svv - suv * suv;
    if (std::abs(det) < 1e-12) return false;
    out.beta1 = (suy * svv - suv * svy) / det;
    out.beta2 = (suu * svy - suv * suy) / det;
    out.beta3 = beta3;
    out.beta4 = beta4;
    return true;
}

bool solve4(double a[4][4], double b[4], double out[4]) {
    int perm[4] = {0, 1, 2, 3};
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[perm[r]][col]) > std::abs(a[perm[pivot]][col])) pivot = r;
        std::swap(perm[col], perm[pivot]);
        const double diag = a[perm[col]][col];
        if (std::abs(diag) < 1e-300) return false;
        for (int r = col + 1; r < 4; ++r) {
            const double f = a[perm[r]][col] / diag;
            for (int c = col; c < 4; ++c) a[perm[r]][c] -= f * a[perm[col]][c];
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    for (int col = 3; col >= 0; --col) {
        double s = b[perm[col]];
        for (int c = col + 1; c < 4; ++c) s -= a[perm[col]][c] * out[c];
        out[col] = s / a[perm[col]][col];
    }
    return true;
}

} // namespace

LogisticParams fit_logistic(const std::vector<double>& scores,
                            const std::vector<double>& targets) {
    if (scores.size() != targets.size())
        throw LengthMismatch("scores and targets differ in length: " +
                             std::to_string(scores.size()) + " vs " +
                             std::to_string(targets.size()));
    const std::size_t n = scores.size();
    if (n < 4)
        throw DegenerateFit("four-parameter fit needs at least 4 points, got " +
                            std::to_string(n));
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    if (*lo_it == *hi_it) throw DegenerateFit("all scores identical; curve is underdetermined");

    // Coarse stage: midpoint over score deciles, scale over half/base/double.
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> mids;
    for (int d = 0; d <= 10; ++d) {
        const double q = sorted[std::min(n - 1, static_cast<std::size_t>(
                                                    std::llround(d / 10.0 * (n - 1))))];
        if (mids.empty() || q != mids.back()) mids.push_back(q);
    }
    const double base_scale = (*hi_it - *lo_it) / 4.0;

    LogisticParams best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (const double b3 : mids) {
        for (const double mult : {0.5, 1.0, 2.0}) {
            LogisticParams cand;
            if (!solve_asymptotes(scores, targets, b3, base_scale * mult, cand)) continue;
            const double sse = sse_of(cand, scores, targets);
            if (sse < best_sse) {
                best_sse = sse;
                best = cand;
            }
        }
    }
    if (!std::isfinite(best_sse)) throw DegenerateFit("no usable coarse initialization");

    // Levenberg-Marquardt on all four parameters. beta4 is kept positive
    // (the model only sees |beta4|) and steps are accepted only when they
    // reduce the residual, so the coarse solution is never made worse.
    double p[4] = {best.beta1, best.beta2, best.beta3, std::abs(best.beta4)};
    const double min_scale = 1e-9 * (*hi_it - *lo_it);
    double lambda = 1e-3;
    double sse = best_sse;
    for (int iter = 0; iter < 500; ++iter) {
        double jtj[4][4] = {};
        double jtr[4] = {};
        const LogisticParams cur{p[0], p[1], p[2], p[3]};
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = std::max(p[3], 1e-12);
            const double t = std::clamp(-(scores[i] - p[2]) / scale, -500.0, 500.0);
            const double e = std::exp(t);
            const double l = 1.0 / (1.0 + e);
            const double dl = l * (1.0 - l); // d/dt of the logistic factor, times -1 on t
            const double r = cur(scores[i]) - targets[i];
            const double j[4] = {
                l,                                              // d/dbeta1
                1.0 - l,                                        // d/dbeta2
                -(p[0] - p[1]) * dl / scale,                    // d/dbeta3
                -(p[0] - p[1]) * dl * (scores[i] - p[2]) / (scale * scale), // d/dbeta4
            };
            for (int a = 0; a < 4; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        double gmax = 0.0;
        for (double g : jtr) gmax = std::max(gmax, std::abs(g));
        if (gmax <= 1e-8) break;

        bool stepped = false;
        while (lambda < 1e12) {
            double a[4][4];
            double b[4];
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) a[r][c] = jtj[r][c];
                a[r][r] += lambda * std::max(jtj[r][r], 1e-12);
                b[r] = -jtr[r];
            }
            double delta[4];
            if (solve4(a, b, delta)) {
                double trial[4] = {p[0] + delta[0], p[1] + delta[1], p[2] + delta[2],
                                   std::max(std::abs(p[3] + delta[3]), min_scale)};
                const LogisticParams cand{trial[0], trial[1], trial[2], trial[3]};
                const double trial_sse = sse_of(cand, scores, targets);
                if (trial_sse < sse) {
                    std::copy(trial, trial + 4, p);
                    sse = trial_sse;
                    lambda = std::max(lambda * 0.1, 1e-12);
                    stepped = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!stepped) break;
    }
    return {p[0], p[1], p[2], p[3]};
}

namespace {

void check_lengths(const std::vector<double>& x, const std::vector<double>& y,
                   std::size_t min_n) {
    if (x.size() != y.size())
        throw LengthMismatch("vectors differ in length: " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    if (x.size() < min_n)
        throw LengthMismatch("need at least " + std::to_string(min_n) + " samples, got " +
                             std::to_string(x.size()));
}

// Positions averaged over runs of equal values.
std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double plcc(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y, 2);
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw ZeroVariance("correlation undefined for a constant input");
    return sxy / std::sqrt(sxx * syy);
}

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y, 2);
    return plcc(average_ranks(x), average_ranks(y));
}

double krcc(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y, 2);
    const std::size_t n = x.size();
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) continue;
            if (dx == 0.0) {
                ++ties_x;
            } else if (dy == 0.0) {
                ++ties_y;
            } else if ((dx > 0) == (dy > 0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double pairs = static_cast<double>(n) * (n - 1) / 2.0;
    // tau-b counts a pair tied in BOTH as tied in each margin.
    long long both = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (x[i] == x[j] && y[i] == y[j]) ++both;
    const double den_x = pairs - static_cast<double>(ties_x + both);
    const double den_y = pairs - static_cast<double>(ties_y + both);
    if (den_x <= 0.0 || den_y <= 0.0)
        throw ZeroVariance("rank correlation undefined for a constant input");
    return static_cast<double>(concordant - discordant) / std::sqrt(den_x * den_y);
}

double rmse(const std::vector<double>& x, const std::vector<double>& y) {
    check_lengths(x, y, 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(x.size()));
}

CorrelationReport evaluate_aligned(const std::vector<double>& scores,
                                   const std::vector<double>& dmos) {
    const LogisticParams fit = fit_logistic(scores, dmos);
    std::vector<double> mapped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) mapped[i] = fit(scores[i]);
    CorrelationReport report;
    report.fit = fit;
    report.n = scores.size();
    report.plcc = plcc(mapped, dmos);
    report.rmse = rmse(mapped, dmos);
    report.srcc = srcc(scores, dmos);
    report.krcc = krcc(scores, dmos);
    return report;
}

CorrelationReport evaluate_metric(const std::map<std::string, double>& scores_by_video,
                                  const DmosTable& dmos) {
    if (scores_by_video.size() != dmos.size())
        throw LengthMismatch("metric covers " + std::to_string(scores_by_video.size()) +
                             " videos, subjective table has " + std::to_string(dmos.size()));
    std::vector<double> scores, targets;
    scores.reserve(dmos.size());
    targets.reserve(dmos.size());
    for (const auto& row : dmos.rows) {
        const auto it = scores_by_video.find(row.video_id);
        if (it == scores_by_video.end())
            throw IndexOutOfRange("metric has no score for video '" + row.video_id + "'");
        scores.push_back(it->second);
        targets.push_back(row.dmos);
    }
    return evaluate_aligned(scores, targets);
}

namespace {

double paired_two_sided_p(const std::vector<double>& diffs) {
    const std::size_t k = diffs.size();
    const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / k;
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    var /= static_cast<double>(k - 1);
    const double sd = std::sqrt(var);
    if (sd == 0.0) return mean == 0.0 ? 1.0 : 0.0;
    const double t = mean / (sd / std::sqrt(static_cast<double>(k)));
    const boost::math::students_t dist(static_cast<double>(k - 1));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

} // namespace

BootstrapReport bootstrap_compare(const std::map<std::string, double>& metric_a,
                                  const std::map<std::string, double>& metric_b,
                                  const DmosTable& dmos, double subset_fraction,
                                  std::size_t iterations, std::uint64_t seed) {
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
        throw InvalidSpec("subset fraction must lie in (0, 1]");
    if (iterations < 2) throw InvalidSpec("bootstrap needs at least 2 iterations");

    const std::size_t n = dmos.size();
    std::vector<double> a, b, d;
    a.reserve(n);
    b.reserve(n);
    d.reserve(n);
    for (const auto& row : dmos.rows) {
        const auto ia = metric_a.find(row.video_id);
        const auto ib = metric_b.find(row.video_id);
        if (ia == metric_a.end() || ib == metric_b.end())
            throw IndexOutOfRange("both metrics must score video '" + row.video_id + "'");
        a.push_back(ia->second);
        b.push_back(ib->second);
        d.push_back(row.dmos);
    }
    if (metric_a.size() != n || metric_b.size() != n)
        throw LengthMismatch("metric video sets do not match the subjective table");

    const std::size_t m =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(subset_fraction * n)));
    const bool identity = subset_fraction == 1.0;

    // Seed-split: one master stream hands each iteration its own seed, so
    // the per-iteration draws are reproducible regardless of scheduling.
    std::mt19937_64 master(seed);
    std::vector<std::uint64_t> iter_seeds(iterations);
    for (auto& s : iter_seeds) s = master();

    BootstrapReport report;
    report.subset_fraction = subset_fraction;
    report.iterations = iterations;
    report.metric_a.resize(iterations);
    report.metric_b.resize(iterations);

    for (std::size_t it = 0; it < iterations; ++it) {
        std::mt19937_64 rng(iter_seeds[it]);
        bool done = false;
        for (int attempt = 0; attempt < 10 && !done; ++attempt) {
            std::vector<std::size_t> idx(m);
            if (identity) {
                std::iota(idx.begin(), idx.end(), 0);
            } else {
                for (std::size_t j = 0; j < m; ++j)
                    idx[j] = static_cast<std::size_t>(rng() % n);
            }
            std::set<std::size_t> distinct(idx.begin(), idx.end());
            if (distinct.size() < 4) continue;

            std::vector<double> sa(m), sb(m), sd(m);
            for (std::size_t j = 0; j < m; ++j) {
                sa[j] = a[idx[j]];
                sb[j] = b[idx[j]];
                sd[j] = d[idx[j]];
            }
            try {
                const CorrelationReport ra = evaluate_aligned(sa, sd);
                const CorrelationReport rb = evaluate_aligned(sb, sd);
                report.metric_a[it] = {ra.plcc, ra.srcc, ra.krcc, ra.rmse};
                report.metric_b[it] = {rb.plcc, rb.srcc, rb.krcc, rb.rmse};
                done = true;
            } catch (const DegenerateFit&) {
            } catch (const ZeroVariance&) {
            }
        }
        if (!done)
            throw SubsetTooSmall("iteration " + std::to_string(it) +
                                 ": no usable subset after 10 resampling attempts");
    }

    std::vector<double> dp(iterations), ds(iterations), dk(iterations), dr(iterations);
    for (std::size_t it = 0; it < iterations; ++it) {
        dp[it] = report.metric_a[it].plcc - report.metric_b[it].plcc;
        ds[it] = report.metric_a[it].srcc - report.metric_b[it].srcc;
        dk[it] = report.metric_a[it].krcc - report.metric_b[it].krcc;
        dr[it] = report.metric_a[it].rmse - report.metric_b[it].rmse;
    }
    report.p_values = {paired_two_sided_p(dp), paired_two_sided_p(ds), paired_two_sided_p(dk),
                       paired_two_sided_p(dr)};
    return report;
}

} // namespace vfiqa
