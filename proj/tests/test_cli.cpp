#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "ddreg/cli.hpp"
#include "ddreg/io.hpp"
#include "helpers.hpp"

using namespace ddreg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string> &args) {
    std::ostringstream o, e;
    Run r;
    r.code = run_cli(args, o, e);
    r.out = o.str();
    r.err = e.str();
    return r;
}

const std::vector<std::string> kSmall{"--src-side", "128", "--out-side", "64", "--coarse-grid", "4",
                                      "--fine-grid", "8",  "--trans",    "8"};

Run synth(const fs::path &out, int n, std::uint64_t seed) {
    std::vector<std::string> a{"synth", "--out", out.string(), "-n", std::to_string(n), "--seed", std::to_string(seed)};
    a.insert(a.end(), kSmall.begin(), kSmall.end());
    return run(a);
}

bool same_tree(const fs::path &a, const fs::path &b) {
    for (const auto &e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path other = b / fs::relative(e.path(), a);
        if (!fs::exists(other) || read_text(e.path()) != read_text(other)) return false;
    }
    return true;
}

} // namespace

TEST_CASE("synth output is reproducible") {
    const fs::path d = testutil::scratch("cli_synth");
    REQUIRE(synth(d / "a", 3, 5).code == 0);
    REQUIRE(synth(d / "b", 3, 5).code == 0);
    REQUIRE(synth(d / "c", 3, 6).code == 0);
    CHECK(fs::exists(d / "a" / "pair_0002" / "pair.json"));
    CHECK(same_tree(d / "a", d / "b"));
    CHECK(read_text(d / "a" / "pair_0000" / "moving.f32") != read_text(d / "c" / "pair_0000" / "moving.f32"));
    const json m = json::parse(read_text(d / "a" / "manifest.json"));
    CHECK(m["pairs"].size() == 3);
    CHECK(m["config"]["synth"]["out_side"] == 64);
}

TEST_CASE("synth input errors exit with 2") {
    const fs::path d = testutil::scratch("cli_synth_err");
    std::vector<std::string> a{"synth", "--out", (d / "x").string(), "--trans", "200"};
    const Run r = run(a);
    CHECK(r.code == 2);
    CHECK(r.err.find("OutOfSupport") != std::string::npos);
    CHECK(run({"synth", "--out", (d / "y").string(), "--src-image", "/nope.pgm", "--src-mask", "/nope2.pgm"}).code == 2);
    CHECK(run({"synth"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("register writes results and replays from dumped scores") {
    const fs::path d = testutil::scratch("cli_register");
    REQUIRE(synth(d / "data", 3, 1).code == 0);
    const Run r = run({"register", "--data", (d / "data").string(), "--out", (d / "res").string(), "--dump",
                       (d / "dump").string(), "--jitter", "0.01", "--seed", "4"});
    REQUIRE(r.code == 0);
    for (const char *f : {"records.csv", "fits.json", "summary.json", "curve.csv", "manifest.json"}) {
        CHECK(fs::exists(d / "res" / f));
    }
    for (const char *f : {"coarse.map", "fine.map", "correspondences.csv", "angles.json"}) {
        CHECK(fs::exists(d / "dump" / "pair_0000" / f));
    }
    const std::vector<EvalRecord> recs = parse_records_csv(read_text(d / "res" / "records.csv"));
    REQUIRE(recs.size() == 3);
    for (const EvalRecord &e : recs) CHECK(e.corner_px < 2.0);

    const Run again = run({"register", "--data", (d / "data").string(), "--out", (d / "res2").string(), "--matcher",
                           "files", "--scores", (d / "dump").string()});
    REQUIRE(again.code == 0);
    CHECK(read_text(d / "res" / "records.csv") == read_text(d / "res2" / "records.csv"));

    CHECK(run({"register", "--data", (d / "missing").string(), "--out", (d / "r3").string()}).code == 2);
    CHECK(run({"register", "--data", (d / "data").string(), "--out", (d / "r4").string(), "--matcher", "files"}).code ==
          2);
    CHECK(run({"register", "--data", (d / "data").string(), "--out", (d / "r5").string(), "--coarse-tau", "1.5"})
              .code == 2);
}

TEST_CASE("eval counts by hand") {
    const fs::path d = testutil::scratch("cli_eval");
    std::vector<EvalRecord> rs(3);
    const double px[3] = {1, 10, 20};
    const double th[3] = {10, 30, 60};
    for (int k = 0; k < 3; ++k) {
        rs[k].case_id = "c" + std::to_string(k);
        rs[k].theta_gt_deg = th[k];
        rs[k].corner_px = px[k];
        rs[k].corner_pct = 100.0 * px[k] / 256;
    }
    write_text(d / "records.csv", records_csv(rs));
    REQUIRE(run({"eval", "--records", (d / "records.csv").string(), "--out", (d / "ev").string()}).code == 0);
    const json s = json::parse(read_text(d / "ev" / "summary.json"));
    CHECK(s["n"] == 3);
    CHECK(s["pct_under_1"].get<double>() == doctest::Approx(100.0 / 3));
    CHECK(s["pct_under_5"].get<double>() == doctest::Approx(200.0 / 3));
    CHECK(s["buckets"][0]["n"] == 2);
    CHECK(s["buckets"][1]["n"] == 1);

    REQUIRE(run({"eval", "--records", (d / "records.csv").string(), "--out", (d / "shg").string(), "--shg"}).code == 0);
    const json g = json::parse(read_text(d / "shg" / "summary.json"));
    CHECK(g["buckets"].size() == 4);
    CHECK(g["buckets"][2]["n"] == 0);
    CHECK(g["buckets"][2]["mean_corner_px"].is_null());

    write_text(d / "bad.csv", "case_id,theta_gt_deg\nfoo,bar\n");
    CHECK(run({"eval", "--records", (d / "bad.csv").string(), "--out", (d / "b").string()}).code == 2);
    CHECK(run({"eval", "--records", (d / "none.csv").string(), "--out", (d / "b").string()}).code == 2);
}

TEST_CASE("convert between roles") {
    const fs::path d = testutil::scratch("cli_convert");
    write_text(d / "p.json", R"({"theta_deg": 90, "scale": 1, "dx": 0, "dy": 0, "side": 256})");
    REQUIRE(run({"convert", "--in", (d / "p.json").string(), "--to", "coord", "--out", (d / "c.json").string()}).code ==
            0);
    const Mat3 c = mat3_from_json(json::parse(read_text(d / "c.json")));
    CHECK(c.role() == Role::Coord);
    CHECK(c(0, 2) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(c(1, 2) == doctest::Approx(255.0));

    const Run back = run({"convert", "--in", (d / "c.json").string(), "--to", "params"});
    REQUIRE(back.code == 0);
    const TransformParams p = params_from_json(json::parse(back.out));
    CHECK(rad2deg(p.theta) == doctest::Approx(90.0));

    const Run inv = run({"convert", "--in", (d / "c.json").string(), "--to", "params", "--inverse"});
    CHECK(rad2deg(params_from_json(json::parse(inv.out)).theta) == doctest::Approx(-90.0));

    write_text(d / "noside.json", R"({"theta_deg": 5, "scale": 1, "dx": 0, "dy": 0})");
    CHECK(run({"convert", "--in", (d / "noside.json").string()}).code == 2);
    CHECK(run({"convert", "--in", (d / "noside.json").string(), "--side", "64"}).code == 0);
    write_text(d / "junk.json", "{not json");
    CHECK(run({"convert", "--in", (d / "junk.json").string()}).code == 2);
    CHECK(run({"convert", "--in", (d / "p.json").string(), "--to", "euler"}).code == 2);
}

TEST_CASE("bench report is deterministic") {
    const fs::path d = testutil::scratch("cli_bench");
    std::vector<std::string> a{"bench-normalizers", "--trials", "3", "--seed", "2"};
    a.insert(a.end(), kSmall.begin(), kSmall.end());
    std::vector<std::string> a1 = a, a2 = a;
    a1.insert(a1.end(), {"--out", (d / "a").string()});
    a2.insert(a2.end(), {"--out", (d / "b").string()});
    REQUIRE(run(a1).code == 0);
    REQUIRE(run(a2).code == 0);
    CHECK(read_text(d / "a" / "report.json") == read_text(d / "b" / "report.json"));
    CHECK(fs::exists(d / "a" / "timings.json"));
    const json r = json::parse(read_text(d / "a" / "report.json"));
    CHECK(r["trials"].size() == 3);
}

TEST_CASE("config file with flag overrides") {
    const fs::path d = testutil::scratch("cli_config");
    write_text(d / "cfg.json", R"({"seed": 9, "synth": {"src_side": 128, "out_side": 64, "coarse_grid": 4,
        "fine_grid": 8, "trans_range": 8, "n_pairs": 2}})");
    REQUIRE(run({"--config", (d / "cfg.json").string(), "synth", "--out", (d / "a").string()}).code == 0);
    const json m = json::parse(read_text(d / "a" / "manifest.json"));
    CHECK(m["pairs"].size() == 2);
    CHECK(m["config"]["seed"] == 9);

    REQUIRE(run({"--config", (d / "cfg.json").string(), "synth", "--out", (d / "b").string(), "-n", "1", "--seed", "3"})
                .code == 0);
    const json m2 = json::parse(read_text(d / "b" / "manifest.json"));
    CHECK(m2["pairs"].size() == 1);
    CHECK(m2["config"]["seed"] == 3);
    CHECK(m2["config_hash"] != m["config_hash"]);

    write_text(d / "typo.json", R"({"synth": {"n_pair": 2}})");
    CHECK(run({"--config", (d / "typo.json").string(), "synth", "--out", (d / "c").string()}).code == 2);
    CHECK(run({"--config", (d / "nope.json").string(), "synth", "--out", (d / "c").string()}).code == 2);
}
