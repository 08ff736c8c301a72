#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "vfiqa/harness.hpp"

using json = nlohmann::json;
using fixtures::TempDir;

namespace {

std::string binary_path() {
    const char* env = std::getenv("VFIQA_BIN");
    REQUIRE_MESSAGE(env != nullptr, "VFIQA_BIN must point at the vfiqa binary");
    return env;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CmdResult run_cli(const std::string& args) {
    static int invocation = 0;
    static TempDir io_dir;
    const std::string out_path = io_dir.file("out" + std::to_string(invocation));
    const std::string err_path = io_dir.file("err" + std::to_string(invocation));
    ++invocation;

    const std::string cmd =
        "\"" + binary_path() + "\" " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    CmdResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

// Two 4-frame 32x24 sequences on disk, slightly different content.
struct ScorePair {
    TempDir dir;
    std::string ref_path;
    std::string dist_path;
    std::string size_args;

    ScorePair() {
        const vfiqa::VideoSpec spec{32, 24, {30, 1}};
        const vfiqa::FrameSequence ref = fixtures::drifting_sequence(spec, 4, 20001, 1.0);
        const vfiqa::FrameSequence dist = fixtures::noisy_copy(ref, 20002, 6);
        ref_path = dir.file("ref.yuv");
        dist_path = dir.file("dist.yuv");
        write_yuv420(ref, ref_path);
        write_yuv420(dist, dist_path);
        size_args = " --width 32 --height 24 --fps 30 ";
    }

    std::string score_args(const std::string& extra) const {
        return "score --ref " + ref_path + " --dist " + dist_path + size_args + extra;
    }
};

// Manifest fixture shared by eval/sweep tests: six noisy pairs with DMOS an
// exact logistic of measured PSNR.
struct EvalFixture {
    TempDir dir;
    std::string manifest_path;

    EvalFixture() {
        manifest_path = dir.file("manifest.csv");
        std::ofstream manifest(manifest_path);
        manifest << "video_id,ref_path,dist_path,width,height,fps_in,fps_out,dmos\n";
        const vfiqa::VideoSpec spec{48, 36, {60, 1}};
        for (int e = 0; e < 6; ++e) {
            const std::string id = "clip" + std::to_string(e);
            const vfiqa::FrameSequence ref =
                fixtures::drifting_sequence(spec, 4, 21000 + 31 * e, 1.0);
            const vfiqa::FrameSequence dist = fixtures::noisy_copy(ref, 22000 + e, 2 + 3 * e);
            write_yuv420(ref, dir.file(id + "_ref.yuv"));
            write_yuv420(dist, dir.file(id + "_dist.yuv"));
            const double psnr_db = vfiqa::psnr(ref, dist).aggregate;
            const double dmos =
                5.0 + 80.0 / (1.0 + std::exp(-(psnr_db - 32.0) / 4.0));
            manifest << id << "," << id << "_ref.yuv," << id << "_dist.yuv,48,36,30,60,"
                     << dmos << "\n";
        }
    }
};

} // namespace

TEST_SUITE("cli") {

TEST_CASE("score on identical inputs reports the cap with degenerate flags") {
    const ScorePair fx;
    const CmdResult r = run_cli("score --ref " + fx.ref_path + " --dist " + fx.ref_path +
                                fx.size_args + "--metric psnr");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    REQUIRE(doc.at("metrics").size() == 1);
    const json& block = doc.at("metrics")[0];
    CHECK(block.at("name") == "psnr");
    CHECK(block.at("aggregate") == 100.0);
    for (const auto& f : block.at("per_frame")) CHECK(f.at("degenerate") == true);
}

TEST_CASE("score with --metric all emits one block per metric") {
    const ScorePair fx;
    const CmdResult r = run_cli(fx.score_args("--metric all"));
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    REQUIRE(doc.at("metrics").size() == 5);
    std::vector<std::string> names;
    for (const auto& block : doc.at("metrics")) names.push_back(block.at("name"));
    CHECK(names == std::vector<std::string>{"psnr", "ssim", "gmsd", "psnr-div", "psnr-epe"});
    // Flow-weighted metrics leave the last frame unscored.
    CHECK(doc.at("metrics")[0].at("per_frame").size() == 4);
    CHECK(doc.at("metrics")[3].at("per_frame").size() == 3);
}

TEST_CASE("usage errors exit with code 2") {
    const ScorePair fx;
    CHECK(run_cli(fx.score_args("--metric nope")).exit_code == 2);
    CHECK(run_cli("score --ref a.yuv --dist b.yuv --height 16 --fps 30").exit_code == 2);
    CHECK(run_cli("score").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli(fx.score_args("--metric psnr --output yaml")).exit_code == 2);
    CHECK(run_cli(fx.score_args("--metric psnr-div --threshold 1.5")).exit_code == 2);
    // The EPE ablation needs reference-side fields when flow comes from disk.
    CHECK(run_cli(fx.score_args("--metric psnr-epe --flow-dir /tmp/nowhere")).exit_code == 2);
}

TEST_CASE("runtime failures exit with code 1 and leave stdout clean") {
    const ScorePair fx;
    const CmdResult r =
        run_cli("score --ref /nonexistent.yuv --dist " + fx.dist_path + fx.size_args +
                "--metric psnr");
    CHECK(r.exit_code == 1);
    CHECK(r.out.empty());
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("help is not an error") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("score --help").exit_code == 0);
}

TEST_CASE("csv score output is one row per frame plus aggregates") {
    const ScorePair fx;
    const CmdResult r = run_cli(fx.score_args("--metric psnr,ssim --output csv"));
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "metric,record,frame_index,value,degenerate");
    std::size_t frame_rows = 0, aggregate_rows = 0;
    while (std::getline(lines, line)) {
        if (line.find(",frame,") != std::string::npos) ++frame_rows;
        if (line.find(",aggregate,") != std::string::npos) ++aggregate_rows;
    }
    CHECK(frame_rows == 8); // 4 frames x 2 metrics
    CHECK(aggregate_rows == 2);
}

TEST_CASE("--out writes the same payload stdout would carry") {
    const ScorePair fx;
    const std::string out_file = fx.dir.file("payload.json");
    const CmdResult direct = run_cli(fx.score_args("--metric psnr"));
    const CmdResult filed = run_cli(fx.score_args("--metric psnr --out " + out_file));
    REQUIRE(direct.exit_code == 0);
    REQUIRE(filed.exit_code == 0);
    CHECK(filed.out.empty());
    CHECK(slurp(out_file) == direct.out);
}

TEST_CASE("flow writes one field per consecutive pair, readable back") {
    const ScorePair fx;
    const std::string flow_dir = fx.dir.subdir("flows");
    const CmdResult r = run_cli("flow --input " + fx.dist_path + fx.size_args + "--out-dir " +
                                flow_dir);
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc.at("fields") == 3);
    REQUIRE(doc.at("files").size() == 3);
    CHECK(doc.at("files")[0] == flow_dir + "/000000.flo");
    for (const auto& f : doc.at("files")) {
        const vfiqa::MotionField field = vfiqa::read_flo(f.get<std::string>());
        CHECK(field.width == 32);
        CHECK(field.height == 24);
    }
}

TEST_CASE("precomputed flow reproduces in-process estimation bit for bit") {
    const ScorePair fx;
    const std::string flow_dir = fx.dir.subdir("flows");
    REQUIRE(run_cli("flow --input " + fx.dist_path + fx.size_args + "--out-dir " + flow_dir)
                .exit_code == 0);

    const CmdResult inprocess = run_cli(fx.score_args("--metric psnr-div"));
    const CmdResult fromdisk = run_cli(fx.score_args("--metric psnr-div --flow-dir " + flow_dir));
    REQUIRE(inprocess.exit_code == 0);
    REQUIRE(fromdisk.exit_code == 0);

    const json a = json::parse(inprocess.out);
    const json b = json::parse(fromdisk.out);
    CHECK(a.at("metrics")[0].at("aggregate") == b.at("metrics")[0].at("aggregate"));
    CHECK(a.at("metrics")[0].at("per_frame") == b.at("metrics")[0].at("per_frame"));
}

TEST_CASE("flow needs at least two frames") {
    TempDir dir;
    const vfiqa::VideoSpec spec{32, 24, {30, 1}};
    const auto path = dir.file("single.yuv");
    write_yuv420(vfiqa::FrameSequence::from_luma(
                     spec, {fixtures::textured_frame(32, 24, 20010)}),
                 path);
    const CmdResult r =
        run_cli("flow --input " + path + " --width 32 --height 24 --fps 30 --out-dir " +
                dir.subdir("flows"));
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("at least 2 frames") != std::string::npos);
}

TEST_CASE("divergence dump writes one pgm per scored frame") {
    const ScorePair fx;
    const std::string dump_dir = fx.dir.subdir("divergence");
    const CmdResult r = run_cli(fx.score_args("--metric psnr-div --dump-divergence " + dump_dir));
    REQUIRE(r.exit_code == 0);
    for (int n = 0; n < 3; ++n) {
        char name[16];
        std::snprintf(name, sizeof(name), "%06d.pgm", n);
        const std::string head = slurp(dump_dir + "/" + name).substr(0, 2);
        CHECK(head == "P5");
    }
}

TEST_CASE("eval correlates the synthetic manifest perfectly") {
    const EvalFixture fx;
    const CmdResult r = run_cli("eval --manifest " + fx.manifest_path + " --metrics psnr,ssim");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc.at("entries").size() == 6);
    CHECK(doc.at("errors").empty());
    CHECK(doc.at("overall").at("psnr").at("plcc").get<double>() > 0.999999);
    CHECK(doc.at("overall").at("psnr").at("n") == 6);
    CHECK(doc.at("overall").contains("ssim"));
    CHECK_FALSE(doc.at("overall").contains("gmsd"));
    // One resolution group and one rate group, each covering all entries.
    REQUIRE(doc.at("subsets").size() == 2);
    CHECK(doc.at("subsets")[0].at("label") == "36p");
    CHECK(doc.at("subsets")[1].at("label") == "30->60");
}

TEST_CASE("eval payloads are bit-identical across runs and worker counts") {
    const EvalFixture fx;
    const std::string base = "eval --manifest " + fx.manifest_path + " --metrics psnr,psnr-div";
    const CmdResult serial = run_cli(base + " --workers 1");
    const CmdResult wide = run_cli(base + " --workers 8");
    const CmdResult again = run_cli(base + " --workers 8");
    REQUIRE(serial.exit_code == 0);
    REQUIRE(wide.exit_code == 0);
    CHECK(serial.out == wide.out);
    CHECK(wide.out == again.out);
}

TEST_CASE("eval aborts on an empty manifest") {
    TempDir dir;
    const auto path = dir.file("empty.csv");
    std::ofstream(path) << "video_id,ref_path,dist_path,width,height,fps_in,fps_out,dmos\n";
    const CmdResult r = run_cli("eval --manifest " + path);
    CHECK(r.exit_code == 1);
}

TEST_CASE("eval derives dmos from raw opinions when given") {
    const EvalFixture fx;
    // Opinion file reproducing each manifest dmos as (80 - dmos) vs 80.
    const json before = json::parse(
        run_cli("eval --manifest " + fx.manifest_path + " --metrics psnr").out);
    const std::string opinions = fx.dir.file("opinions.csv");
    {
        std::ofstream out(opinions);
        out << "subject_id,video_id,s_ref,s_dist\n";
        for (const auto& e : before.at("entries"))
            out << "s1," << e.at("video_id").get<std::string>() << ",80,"
                << 80.0 - e.at("dmos").get<double>() << "\n";
    }
    const json after = json::parse(run_cli("eval --manifest " + fx.manifest_path +
                                           " --metrics psnr --opinions " + opinions)
                                       .out);
    // Signed correlation survives, so the per-video means were rebuilt with the
    // right orientation.
    CHECK(after.at("overall").at("psnr").at("plcc").get<double>() > 0.999999);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(after.at("entries")[i].at("dmos").get<double>() ==
              doctest::Approx(before.at("entries")[i].at("dmos").get<double>()).epsilon(1e-4));
}

TEST_CASE("eval bootstrap comparison reports p-values per fraction") {
    const EvalFixture fx;
    // Fraction 1.0 keeps the subset deterministic: every iteration scores the
    // full entry set, so only degenerate data could abort the comparison.
    const CmdResult r = run_cli("eval --manifest " + fx.manifest_path +
                                " --metrics psnr,gmsd --compare psnr,gmsd "
                                "--bootstrap-iterations 20 --bootstrap-fractions 1.0 "
                                "--seed 11");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    REQUIRE(doc.at("bootstrap").size() == 1);
    for (const auto& block : doc.at("bootstrap")) {
        CHECK(block.at("iterations") == 20);
        const double p = block.at("p_values").at("plcc").get<double>();
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    // Comparing a metric that was not scored is a usage error.
    CHECK(run_cli("eval --manifest " + fx.manifest_path +
                  " --metrics psnr --compare psnr,ssim")
              .exit_code == 2);
}

TEST_CASE("sweep emits the full estimator-threshold grid") {
    const EvalFixture fx;
    const CmdResult r = run_cli("sweep --manifest " + fx.manifest_path +
                                " --thresholds 1e-3,1e-2,1e-1");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    REQUIRE(doc.at("cells").size() == 3);
    for (const auto& cell : doc.at("cells")) {
        CHECK(cell.at("estimator") == "farneback");
        CHECK(cell.at("report").at("n") == 6);
    }

    const CmdResult csv = run_cli("sweep --manifest " + fx.manifest_path +
                                  " --thresholds 1e-3,1e-2,1e-1 --output csv");
    REQUIRE(csv.exit_code == 0);
    std::istringstream lines(csv.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "estimator,threshold,measure,value");
    std::size_t plcc_rows = 0;
    while (std::getline(lines, line))
        if (line.find(",plcc,") != std::string::npos) ++plcc_rows;
    CHECK(plcc_rows == 3); // one per threshold for the single estimator
}

TEST_CASE("sweep rejects duplicate estimator labels") {
    const EvalFixture fx;
    const CmdResult r = run_cli("sweep --manifest " + fx.manifest_path +
                                " --flow-dir farneback=/tmp/x");
    CHECK(r.exit_code == 2);
}

TEST_CASE("time reports positive medians for a cheap metric") {
    const ScorePair fx;
    const CmdResult r = run_cli("time --ref " + fx.ref_path + " --dist " + fx.dist_path +
                                fx.size_args + "--metric psnr --samples 5");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc.at("metric") == "psnr");
    CHECK(doc.at("samples") == 5);
    CHECK(doc.at("warmup_excluded") == 1);
    CHECK(doc.at("median_ms").get<double>() > 0.0);
}

} // TEST_SUITE
