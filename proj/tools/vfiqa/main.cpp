// vfiqa: full-reference quality toolkit for frame-interpolated video.
// Subcommands: score, eval, sweep, flow, time. Machine-readable payload goes
// to stdout (or --out); progress and diagnostics go to stderr. Exit codes:
// 0 success, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfiqa/divergence.hpp"
#include "vfiqa/harness.hpp"
#include "vfiqa/metrics.hpp"
#include "vfiqa/parallel.hpp"
#include "vfiqa/stats.hpp"
#include "vfiqa/video_io.hpp"

using json = nlohmann::ordered_json;

namespace {

// Bad arguments detected after CLI11 parsing; mapped to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string output = "json";
    std::string out_path;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--output", c.output, "payload format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_option("--out", c.out_path, "write payload to this file instead of stdout");
    cmd->add_option("--seed", c.seed, "seed for randomized procedures")->capture_default_str();
    cmd->add_option("--workers", c.workers,
                    "worker threads (0 = VFIQA_WORKERS env or hardware threads)")
        ->capture_default_str();
}

struct FlowOpts {
    vfiqa::FarnebackParams params;
};

void add_flow(CLI::App* cmd, FlowOpts& f) {
    cmd->add_option("--pyramid-levels", f.params.pyramid_levels)->capture_default_str();
    cmd->add_option("--pyramid-scale", f.params.pyramid_scale)->capture_default_str();
    cmd->add_option("--window-size", f.params.window_size)->capture_default_str();
    cmd->add_option("--flow-iterations", f.params.iterations_per_level)->capture_default_str();
    cmd->add_option("--poly-n", f.params.poly_neighborhood)->capture_default_str();
    cmd->add_option("--poly-sigma", f.params.poly_sigma)->capture_default_str();
}

void emit(const CommonOpts& c, const std::string& payload) {
    if (c.out_path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream out(c.out_path, std::ios::trunc);
    if (!out) throw vfiqa::IoError("cannot open " + c.out_path + " for writing");
    out << payload;
    if (!out) throw vfiqa::IoError("write failure on " + c.out_path);
}

std::string num(double v) { return nlohmann::json(v).dump(); }

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) parts.push_back(item);
    return parts;
}

std::vector<vfiqa::MetricKind> parse_metrics(const std::string& text) {
    static const std::vector<vfiqa::MetricKind> all = {
        vfiqa::MetricKind::psnr, vfiqa::MetricKind::ssim, vfiqa::MetricKind::gmsd,
        vfiqa::MetricKind::psnr_div, vfiqa::MetricKind::psnr_epe};
    if (text == "all") return all;
    std::vector<vfiqa::MetricKind> kinds;
    for (const std::string& name : split_list(text)) {
        try {
            kinds.push_back(vfiqa::metric_from_string(name));
        } catch (const vfiqa::InvalidSpec& e) {
            throw UsageError(e.what());
        }
    }
    if (kinds.empty()) throw UsageError("no metrics given");
    for (std::size_t i = 0; i < kinds.size(); ++i)
        for (std::size_t j = i + 1; j < kinds.size(); ++j)
            if (kinds[i] == kinds[j])
                throw UsageError("metric '" + to_string(kinds[i]) + "' listed twice");
    return kinds;
}

vfiqa::DivergenceThreshold parse_threshold(double t) {
    try {
        return vfiqa::DivergenceThreshold{t};
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
}

vfiqa::VideoSpec make_spec(int width, int height, const std::string& fps) {
    vfiqa::VideoSpec spec;
    spec.width = width;
    spec.height = height;
    try {
        spec.frame_rate = vfiqa::Rational::parse(fps);
        spec.validate();
    } catch (const vfiqa::Error& e) {
        throw UsageError(e.what());
    }
    return spec;
}

std::size_t stride_from_rates(const std::string& fps_in, const vfiqa::Rational& fps_out) {
    if (fps_in.empty())
        throw UsageError("--only-interpolated needs --fps-in to know which frames are synthetic");
    vfiqa::Rational in;
    try {
        in = vfiqa::Rational::parse(fps_in);
    } catch (const vfiqa::Error& e) {
        throw UsageError(e.what());
    }
    const long long n = fps_out.num * in.den;
    const long long d = fps_out.den * in.num;
    if (n <= 0 || d <= 0 || n % d != 0 || n / d < 2)
        throw UsageError("rate conversion " + in.str() + "->" + fps_out.str() +
                         " is not an integer upsampling factor >= 2");
    return static_cast<std::size_t>(n / d);
}

json correlation_json(const vfiqa::CorrelationReport& r) {
    return json{{"n", r.n},
                {"plcc", r.plcc},
                {"srcc", r.srcc},
                {"krcc", r.krcc},
                {"rmse", r.rmse},
                {"fit",
                 {{"beta1", r.fit.beta1},
                  {"beta2", r.fit.beta2},
                  {"beta3", r.fit.beta3},
                  {"beta4", r.fit.beta4}}}};
}

std::size_t degenerate_count(const vfiqa::SequenceScore& s) {
    std::size_t n = 0;
    for (const auto& f : s.per_frame)
        if (f.degenerate) ++n;
    return n;
}

// ---------------------------------------------------------------- score ---

struct ScoreArgs {
    CommonOpts common;
    FlowOpts flow;
    std::string ref_path, dist_path;
    int width = 0, height = 0;
    std::string fps = "30";
    std::string fps_in;
    std::string metric = "psnr-div";
    double threshold = 0.01;
    std::string flow_dir, ref_flow_dir;
    std::string dump_divergence;
    bool only_interpolated = false;
};

int cmd_score(const ScoreArgs& args) {
    const auto metrics = parse_metrics(args.metric);
    const auto thr = parse_threshold(args.threshold);
    const vfiqa::VideoSpec spec = make_spec(args.width, args.height, args.fps);
    try {
        args.flow.params.validate();
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
    vfiqa::ScoreOptions options;
    options.workers = args.common.workers;
    if (args.only_interpolated)
        options.interpolated_stride = stride_from_rates(args.fps_in, spec.frame_rate);

    std::unique_ptr<vfiqa::FlowSource> flow;
    if (!args.flow_dir.empty()) {
        std::optional<std::string> ref_dir;
        if (!args.ref_flow_dir.empty()) ref_dir = args.ref_flow_dir;
        for (const auto kind : metrics)
            if (vfiqa::metric_needs_reference_flow(kind) && !ref_dir)
                throw UsageError(to_string(kind) +
                                 " with --flow-dir also needs --ref-flow-dir (it compares "
                                 "fields from both sequences)");
        flow = std::make_unique<vfiqa::FloDirectorySource>("flo", args.flow_dir, ref_dir);
    } else {
        if (!args.ref_flow_dir.empty())
            throw UsageError("--ref-flow-dir is only meaningful together with --flow-dir");
        flow = std::make_unique<vfiqa::FarnebackSource>(args.flow.params);
    }

    const vfiqa::FrameSequence ref = vfiqa::read_yuv420(args.ref_path, spec);
    const vfiqa::FrameSequence dist = vfiqa::read_yuv420(args.dist_path, spec);

    std::vector<vfiqa::SequenceScore> scores;
    for (const auto kind : metrics) {
        if (kind == vfiqa::MetricKind::psnr_div && !args.dump_divergence.empty()) {
            // Manual pair loop so the normalized divergence maps can be
            // exported; scoring goes through the same per-frame function as
            // the library driver, so values are identical.
            if (dist.frame_count() < 2)
                throw vfiqa::EmptySequence("flow-weighted metrics need at least 2 frames");
            std::filesystem::create_directories(args.dump_divergence);
            std::vector<std::size_t> indices;
            for (std::size_t n = 0; n + 1 < dist.frame_count(); ++n)
                if (options.interpolated_stride <= 1 || n % options.interpolated_stride != 0)
                    indices.push_back(n);
            if (indices.empty())
                throw vfiqa::EmptySequence(
                    "interpolated-frame selection left no frames to score");
            std::vector<vfiqa::FrameScore> per_frame(indices.size());
            vfiqa::parallel_for(0, indices.size(), options.workers, [&](std::size_t slot) {
                const std::size_t n = indices[slot];
                const vfiqa::LumaFrame prev = dist.luma(n);
                const vfiqa::LumaFrame next = dist.luma(n + 1);
                const vfiqa::MotionField field =
                    flow->field(vfiqa::SequenceSide::distorted, n, prev, next);
                const vfiqa::DivergenceMap div =
                    vfiqa::normalize_divergence(vfiqa::raw_divergence(field));
                char name[32];
                std::snprintf(name, sizeof(name), "%06zu.pgm", n);
                vfiqa::write_pgm(div, (std::filesystem::path(args.dump_divergence) / name)
                                          .string());
                per_frame[slot] = vfiqa::score_frame_psnr_div(ref.luma(n), prev, div, thr, n);
            });
            vfiqa::SequenceScore seq;
            seq.metric_name = "psnr-div";
            seq.frames_total = dist.frame_count();
            seq.per_frame = std::move(per_frame);
            double sum = 0.0;
            for (const auto& f : seq.per_frame) sum += f.value;
            seq.aggregate = sum / static_cast<double>(seq.per_frame.size());
            scores.push_back(std::move(seq));
            continue;
        }
        scores.push_back(vfiqa::score_sequence(kind, ref, dist, flow.get(), thr, options));
    }

    if (args.common.output == "json") {
        json doc{{"command", "score"},
                 {"ref", args.ref_path},
                 {"dist", args.dist_path},
                 {"width", spec.width},
                 {"height", spec.height},
                 {"frame_rate", spec.frame_rate.str()},
                 {"frames", ref.frame_count()},
                 {"threshold", thr.t},
                 {"flow", flow->label()}};
        json blocks = json::array();
        for (const auto& s : scores) {
            json per_frame = json::array();
            for (const auto& f : s.per_frame)
                per_frame.push_back(
                    {{"frame", f.frame_index}, {"value", f.value}, {"degenerate", f.degenerate}});
            blocks.push_back({{"name", s.metric_name},
                              {"aggregate", s.aggregate},
                              {"frames_total", s.frames_total},
                              {"frames_scored", s.per_frame.size()},
                              {"degenerate_frames", degenerate_count(s)},
                              {"per_frame", std::move(per_frame)}});
        }
        doc["metrics"] = std::move(blocks);
        emit(args.common, doc.dump(2) + "\n");
    } else {
        std::string csv = "metric,record,frame_index,value,degenerate\n";
        for (const auto& s : scores) {
            for (const auto& f : s.per_frame)
                csv += s.metric_name + ",frame," + std::to_string(f.frame_index) + "," +
                       num(f.value) + "," + (f.degenerate ? "1" : "0") + "\n";
            csv += s.metric_name + ",aggregate,," + num(s.aggregate) + ",\n";
        }
        emit(args.common, csv);
    }
    return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalArgs {
    CommonOpts common;
    FlowOpts flow;
    std::string manifest_path;
    std::string opinions_path;
    std::string metrics = "psnr,ssim,gmsd,psnr-div";
    double threshold = 0.01;
    bool only_interpolated = false;
    std::string compare;
    std::size_t bootstrap_iterations = 2000;
    std::string bootstrap_fractions = "0.3,0.5,0.7";
};

int cmd_eval(const EvalArgs& args) {
    vfiqa::RunConfig config;
    config.metrics = parse_metrics(args.metrics);
    config.threshold = parse_threshold(args.threshold);
    config.flow_params = args.flow.params;
    try {
        config.flow_params.validate();
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
    config.workers = args.common.workers;
    config.only_interpolated = args.only_interpolated;

    std::pair<std::string, std::string> compare_pair;
    std::vector<double> fractions;
    if (!args.compare.empty()) {
        const auto parts = split_list(args.compare);
        if (parts.size() != 2) throw UsageError("--compare expects METRIC_A,METRIC_B");
        const auto known = [&](const std::string& name) {
            for (const auto kind : config.metrics)
                if (to_string(kind) == name) return true;
            return false;
        };
        for (const auto& name : parts)
            if (!known(name))
                throw UsageError("--compare metric '" + name + "' is not in --metrics");
        if (parts[0] == parts[1]) throw UsageError("--compare needs two distinct metrics");
        compare_pair = {parts[0], parts[1]};
        for (const auto& f : split_list(args.bootstrap_fractions)) {
            try {
                fractions.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw UsageError("bad bootstrap fraction '" + f + "'");
            }
            if (!(fractions.back() > 0.0 && fractions.back() <= 1.0))
                throw UsageError("bootstrap fractions must lie in (0, 1]");
        }
        if (fractions.empty()) throw UsageError("no bootstrap fractions given");
        if (args.bootstrap_iterations < 2)
            throw UsageError("bootstrap needs at least 2 iterations");
    }

    vfiqa::DatasetManifest manifest = vfiqa::read_manifest_csv(args.manifest_path);
    if (!args.opinions_path.empty()) {
        const vfiqa::DmosTable table =
            vfiqa::compute_dmos(vfiqa::read_opinion_csv(args.opinions_path));
        for (auto& entry : manifest.entries)
            entry.dmos = table.by_video(entry.video_id).dmos; // throws if missing
    }

    const vfiqa::RunResult result = vfiqa::run_dataset(manifest, config);
    for (const auto& err : result.errors)
        std::cerr << "warning: " << err.video_id << ": " << err.message << "\n";
    std::cerr << "scored " << result.scored.size() << "/" << manifest.entries.size()
              << " entries\n";

    std::vector<json> bootstrap_blocks;
    if (!args.compare.empty()) {
        std::map<std::string, double> a, b;
        vfiqa::DmosTable dmos;
        for (const auto& e : result.scored) {
            a[e.video_id] = e.by_metric.at(compare_pair.first).aggregate;
            b[e.video_id] = e.by_metric.at(compare_pair.second).aggregate;
            dmos.rows.push_back({e.video_id, e.dmos, 1});
        }
        std::sort(dmos.rows.begin(), dmos.rows.end(),
                  [](const auto& x, const auto& y) { return x.video_id < y.video_id; });
        for (const double fraction : fractions) {
            const vfiqa::BootstrapReport rep = vfiqa::bootstrap_compare(
                a, b, dmos, fraction, args.bootstrap_iterations, args.common.seed);
            const auto mean_of = [&](const std::vector<vfiqa::MeasureSet>& sets) {
                vfiqa::MeasureSet m;
                for (const auto& s : sets) {
                    m.plcc += s.plcc;
                    m.srcc += s.srcc;
                    m.krcc += s.krcc;
                    m.rmse += s.rmse;
                }
                const double k = static_cast<double>(sets.size());
                return vfiqa::MeasureSet{m.plcc / k, m.srcc / k, m.krcc / k, m.rmse / k};
            };
            const vfiqa::MeasureSet ma = mean_of(rep.metric_a);
            const vfiqa::MeasureSet mb = mean_of(rep.metric_b);
            bootstrap_blocks.push_back(
                {{"fraction", rep.subset_fraction},
                 {"iterations", rep.iterations},
                 {"seed", args.common.seed},
                 {"metric_a", compare_pair.first},
                 {"metric_b", compare_pair.second},
                 {"mean_a",
                  {{"plcc", ma.plcc}, {"srcc", ma.srcc}, {"krcc", ma.krcc}, {"rmse", ma.rmse}}},
                 {"mean_b",
                  {{"plcc", mb.plcc}, {"srcc", mb.srcc}, {"krcc", mb.krcc}, {"rmse", mb.rmse}}},
                 {"p_values",
                  {{"plcc", rep.p_values.plcc},
                   {"srcc", rep.p_values.srcc},
                   {"krcc", rep.p_values.krcc},
                   {"rmse", rep.p_values.rmse}}}});
        }
    }

    if (args.common.output == "json") {
        json doc{{"command", "eval"},
                 {"manifest", args.manifest_path},
                 {"threshold", config.threshold.t},
                 {"only_interpolated", config.only_interpolated}};
        json entries = json::array();
        for (const auto& e : result.scored) {
            json metrics_block;
            for (const auto& [name, seq] : e.by_metric)
                metrics_block[name] = {{"aggregate", seq.aggregate},
                                       {"frames_total", seq.frames_total},
                                       {"frames_scored", seq.per_frame.size()},
                                       {"degenerate_frames", degenerate_count(seq)}};
            entries.push_back({{"video_id", e.video_id},
                               {"dmos", e.dmos},
                               {"resolution", e.resolution_label},
                               {"rate", e.rate_label},
                               {"metrics", std::move(metrics_block)}});
        }
        doc["entries"] = std::move(entries);
        json errors = json::array();
        for (const auto& err : result.errors)
            errors.push_back({{"video_id", err.video_id}, {"message", err.message}});
        doc["errors"] = std::move(errors);
        json overall;
        for (const auto& [name, rep] : result.overall) overall[name] = correlation_json(rep);
        doc["overall"] = std::move(overall);
        json subsets = json::array();
        for (const auto& sub : result.subsets) {
            json by_metric;
            for (const auto& [name, rep] : sub.by_metric) by_metric[name] = correlation_json(rep);
            subsets.push_back({{"kind", sub.kind},
                               {"label", sub.label},
                               {"entries", sub.entries},
                               {"metrics", std::move(by_metric)}});
        }
        doc["subsets"] = std::move(subsets);
        if (!bootstrap_blocks.empty()) doc["bootstrap"] = bootstrap_blocks;
        emit(args.common, doc.dump(2) + "\n");
    } else {
        std::string csv = "slice_kind,slice_label,metric,n,plcc,srcc,krcc,rmse\n";
        const auto row = [&](const std::string& kind, const std::string& label,
                             const std::string& metric, const vfiqa::CorrelationReport& r) {
            csv += kind + "," + label + "," + metric + "," + std::to_string(r.n) + "," +
                   num(r.plcc) + "," + num(r.srcc) + "," + num(r.krcc) + "," + num(r.rmse) + "\n";
        };
        for (const auto& [name, rep] : result.overall) row("overall", "all", name, rep);
        for (const auto& sub : result.subsets)
            for (const auto& [name, rep] : sub.by_metric) row(sub.kind, sub.label, name, rep);
        if (!bootstrap_blocks.empty()) {
            csv += "\nfraction,iterations,metric_a,metric_b,p_plcc,p_srcc,p_krcc,p_rmse\n";
            for (const auto& blk : bootstrap_blocks)
                csv += num(blk["fraction"].get<double>()) + "," +
                       std::to_string(blk["iterations"].get<std::size_t>()) + "," +
                       blk["metric_a"].get<std::string>() + "," +
                       blk["metric_b"].get<std::string>() + "," +
                       num(blk["p_values"]["plcc"].get<double>()) + "," +
                       num(blk["p_values"]["srcc"].get<double>()) + "," +
                       num(blk["p_values"]["krcc"].get<double>()) + "," +
                       num(blk["p_values"]["rmse"].get<double>()) + "\n";
        }
        emit(args.common, csv);
    }
    return 0;
}

// ---------------------------------------------------------------- sweep ---

struct SweepArgs {
    CommonOpts common;
    FlowOpts flow;
    std::string manifest_path;
    std::string thresholds = "1e-4,1e-3,1e-2,1e-1,1";
    std::vector<std::string> flow_dirs; // LABEL=PATH
    bool only_interpolated = false;
};

int cmd_sweep(const SweepArgs& args) {
    std::vector<double> thresholds;
    for (const auto& t : split_list(args.thresholds)) {
        try {
            thresholds.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw UsageError("bad threshold '" + t + "'");
        }
        static_cast<void>(parse_threshold(thresholds.back()));
    }
    if (thresholds.empty()) throw UsageError("no thresholds given");
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
        if (!(thresholds[i] < thresholds[i + 1]))
            throw UsageError("thresholds must be strictly increasing");

    std::vector<vfiqa::EstimatorConfig> estimators;
    try {
        args.flow.params.validate();
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
    estimators.push_back({"farneback", true, args.flow.params, ""});
    for (const auto& spec : args.flow_dirs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw UsageError("--flow-dir expects LABEL=PATH, got '" + spec + "'");
        vfiqa::EstimatorConfig est;
        est.label = spec.substr(0, eq);
        est.builtin = false;
        est.flow_base_dir = spec.substr(eq + 1);
        for (const auto& other : estimators)
            if (other.label == est.label)
                throw UsageError("duplicate estimator label '" + est.label + "'");
        estimators.push_back(std::move(est));
    }

    vfiqa::RunConfig config;
    config.workers = args.common.workers;
    config.only_interpolated = args.only_interpolated;

    const vfiqa::DatasetManifest manifest = vfiqa::read_manifest_csv(args.manifest_path);
    const vfiqa::SweepResult result =
        vfiqa::sweep_threshold(manifest, thresholds, estimators, config);
    for (const auto& err : result.errors)
        std::cerr << "warning: " << err.video_id << ": " << err.message << "\n";

    if (args.common.output == "json") {
        json doc{{"command", "sweep"}, {"manifest", args.manifest_path}};
        doc["thresholds"] = thresholds;
        json cells = json::array();
        for (const auto& c : result.cells)
            cells.push_back({{"estimator", c.estimator},
                             {"threshold", c.threshold},
                             {"frames_scored", c.frames_scored},
                             {"frames_degenerate", c.frames_degenerate},
                             {"report", correlation_json(c.report)}});
        doc["cells"] = std::move(cells);
        json errors = json::array();
        for (const auto& err : result.errors)
            errors.push_back({{"video_id", err.video_id}, {"message", err.message}});
        doc["errors"] = std::move(errors);
        emit(args.common, doc.dump(2) + "\n");
    } else {
        // Long format for external plotting.
        std::string csv = "estimator,threshold,measure,value\n";
        for (const auto& c : result.cells) {
            const auto row = [&](const std::string& measure, double value) {
                csv += c.estimator + "," + num(c.threshold) + "," + measure + "," + num(value) +
                       "\n";
            };
            row("plcc", c.report.plcc);
            row("srcc", c.report.srcc);
            row("krcc", c.report.krcc);
            row("rmse", c.report.rmse);
            row("frames_scored", static_cast<double>(c.frames_scored));
            row("frames_degenerate", static_cast<double>(c.frames_degenerate));
        }
        emit(args.common, csv);
    }
    return 0;
}

// ----------------------------------------------------------------- flow ---

struct FlowCmdArgs {
    CommonOpts common;
    FlowOpts flow;
    std::string input_path;
    int width = 0, height = 0;
    std::string fps = "30";
    std::string out_dir;
};

int cmd_flow(const FlowCmdArgs& args) {
    const vfiqa::VideoSpec spec = make_spec(args.width, args.height, args.fps);
    try {
        args.flow.params.validate();
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
    const vfiqa::FrameSequence seq = vfiqa::read_yuv420(args.input_path, spec);
    if (seq.frame_count() < 2)
        throw vfiqa::EmptySequence("need at least 2 frames to estimate flow, got " +
                                   std::to_string(seq.frame_count()));
    std::filesystem::create_directories(args.out_dir);

    const std::size_t pairs = seq.frame_count() - 1;
    std::vector<std::string> files(pairs);
    vfiqa::parallel_for(0, pairs, args.common.workers, [&](std::size_t n) {
        const vfiqa::MotionField field =
            vfiqa::estimate_farneback(seq.luma(n), seq.luma(n + 1), args.flow.params);
        const std::string path = vfiqa::FloDirectorySource::flo_path(args.out_dir, n);
        vfiqa::write_flo(field, path);
        files[n] = path;
    });
    std::cerr << "wrote " << pairs << " flow fields to " << args.out_dir << "\n";

    if (args.common.output == "json") {
        json doc{{"command", "flow"},
                 {"input", args.input_path},
                 {"frames", seq.frame_count()},
                 {"fields", pairs},
                 {"dir", args.out_dir}};
        doc["files"] = files;
        emit(args.common, doc.dump(2) + "\n");
    } else {
        std::string csv = "pair_index,path\n";
        for (std::size_t n = 0; n < pairs; ++n)
            csv += std::to_string(n) + "," + files[n] + "\n";
        emit(args.common, csv);
    }
    return 0;
}

// ----------------------------------------------------------------- time ---

struct TimeArgs {
    CommonOpts common;
    FlowOpts flow;
    std::string ref_path, dist_path;
    int width = 0, height = 0;
    std::string fps = "30";
    std::string metric = "psnr-div";
    double threshold = 0.01;
    std::size_t samples = 20;
};

int cmd_time(const TimeArgs& args) {
    vfiqa::MetricKind kind;
    try {
        kind = vfiqa::metric_from_string(args.metric);
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
    const auto thr = parse_threshold(args.threshold);
    const vfiqa::VideoSpec spec = make_spec(args.width, args.height, args.fps);
    try {
        args.flow.params.validate();
    } catch (const vfiqa::InvalidSpec& e) {
        throw UsageError(e.what());
    }
    if (args.samples < 1) throw UsageError("--samples must be at least 1");

    const vfiqa::FrameSequence ref = vfiqa::read_yuv420(args.ref_path, spec);
    const vfiqa::FrameSequence dist = vfiqa::read_yuv420(args.dist_path, spec);
    const vfiqa::FarnebackSource flow(args.flow.params);
    const vfiqa::TimingReport report =
        vfiqa::time_metric(ref, dist, kind, args.samples, flow, thr);

    if (args.common.output == "json") {
        const json doc{{"command", "time"},
                       {"metric", report.metric_name},
                       {"width", report.width},
                       {"height", report.height},
                       {"samples", report.samples},
                       {"warmup_excluded", report.warmup},
                       {"median_ms", report.median_ms},
                       {"mean_ms", report.mean_ms}};
        emit(args.common, doc.dump(2) + "\n");
    } else {
        emit(args.common,
             "metric,width,height,samples,median_ms,mean_ms\n" + report.metric_name + "," +
                 std::to_string(report.width) + "," + std::to_string(report.height) + "," +
                 std::to_string(report.samples) + "," + num(report.median_ms) + "," +
                 num(report.mean_ms) + "\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"full-reference quality toolkit for frame-interpolated video"};
    app.require_subcommand(1);

    ScoreArgs score_args;
    CLI::App* score = app.add_subcommand(
        "score", "score one distorted sequence against its reference");
    score->add_option("--ref", score_args.ref_path, "reference .yuv (raw I420)")->required();
    score->add_option("--dist", score_args.dist_path, "distorted .yuv (raw I420)")->required();
    score->add_option("--width", score_args.width)->required();
    score->add_option("--height", score_args.height)->required();
    score->add_option("--fps", score_args.fps, "frame rate of the scored sequences")
        ->capture_default_str();
    score->add_option("--fps-in", score_args.fps_in,
                      "source rate before interpolation (for --only-interpolated)");
    score->add_option("--metric", score_args.metric,
                      "psnr, ssim, gmsd, psnr-div, psnr-epe, all, or a comma list")
        ->capture_default_str();
    score->add_option("--threshold", score_args.threshold, "divergence mask threshold in [0,1]")
        ->capture_default_str();
    score->add_option("--flow-dir", score_args.flow_dir,
                      "read distorted-side fields from DIR/%06d.flo instead of estimating");
    score->add_option("--ref-flow-dir", score_args.ref_flow_dir,
                      "reference-side fields for psnr-epe");
    score->add_option("--dump-divergence", score_args.dump_divergence,
                      "write per-pair normalized divergence maps as PGM into this directory");
    score->add_flag("--only-interpolated", score_args.only_interpolated,
                    "score only interpolated frames (needs --fps-in)");
    add_flow(score, score_args.flow);
    add_common(score, score_args.common);

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand(
        "eval", "score a manifest of sequences and correlate against DMOS");
    eval->add_option("--manifest", eval_args.manifest_path,
                     "CSV: video_id,ref_path,dist_path,width,height,fps_in,fps_out,dmos[,flow_dir]")
        ->required();
    eval->add_option("--opinions", eval_args.opinions_path,
                     "raw opinion CSV (subject_id,video_id,s_ref,s_dist); overrides manifest dmos");
    eval->add_option("--metrics", eval_args.metrics, "comma list or 'all'")->capture_default_str();
    eval->add_option("--threshold", eval_args.threshold)->capture_default_str();
    eval->add_flag("--only-interpolated", eval_args.only_interpolated,
                   "score only interpolated frames (per-entry fps ratio)");
    eval->add_option("--compare", eval_args.compare,
                     "METRIC_A,METRIC_B: bootstrap significance test between two metrics");
    eval->add_option("--bootstrap-iterations", eval_args.bootstrap_iterations)
        ->capture_default_str();
    eval->add_option("--bootstrap-fractions", eval_args.bootstrap_fractions)
        ->capture_default_str();
    add_flow(eval, eval_args.flow);
    add_common(eval, eval_args.common);

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "divergence-threshold sweep of the masked metric");
    sweep->add_option("--manifest", sweep_args.manifest_path)->required();
    sweep->add_option("--thresholds", sweep_args.thresholds, "strictly increasing comma list")
        ->capture_default_str();
    sweep->add_option("--flow-dir", sweep_args.flow_dirs,
                      "LABEL=PATH external estimator: PATH/<video_id>/%06d.flo (repeatable)");
    sweep->add_flag("--only-interpolated", sweep_args.only_interpolated);
    add_flow(sweep, sweep_args.flow);
    add_common(sweep, sweep_args.common);

    FlowCmdArgs flow_args;
    CLI::App* flowc = app.add_subcommand("flow", "estimate and export per-pair flow fields");
    flowc->add_option("--input", flow_args.input_path, "input .yuv (raw I420)")->required();
    flowc->add_option("--width", flow_args.width)->required();
    flowc->add_option("--height", flow_args.height)->required();
    flowc->add_option("--fps", flow_args.fps)->capture_default_str();
    flowc->add_option("--out-dir", flow_args.out_dir, "directory for %06d.flo files")->required();
    add_flow(flowc, flow_args.flow);
    add_common(flowc, flow_args.common);

    TimeArgs time_args;
    CLI::App* timec = app.add_subcommand("time", "per-frame wall-clock cost of one metric");
    timec->add_option("--ref", time_args.ref_path)->required();
    timec->add_option("--dist", time_args.dist_path)->required();
    timec->add_option("--width", time_args.width)->required();
    timec->add_option("--height", time_args.height)->required();
    timec->add_option("--fps", time_args.fps)->capture_default_str();
    timec->add_option("--metric", time_args.metric)->capture_default_str();
    timec->add_option("--threshold", time_args.threshold)->capture_default_str();
    timec->add_option("--samples", time_args.samples, "timed frame scores (median reported)")
        ->capture_default_str();
    add_flow(timec, time_args.flow);
    add_common(timec, time_args.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand(score)) return cmd_score(score_args);
        if (app.got_subcommand(eval)) return cmd_eval(eval_args);
        if (app.got_subcommand(sweep)) return cmd_sweep(sweep_args);
        if (app.got_subcommand(flowc)) return cmd_flow(flow_args);
        if (app.got_subcommand(timec)) return cmd_time(time_args);
        std::cerr << "usage error: no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
