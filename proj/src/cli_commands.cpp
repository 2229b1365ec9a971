#include "ddreg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ddreg/io.hpp"

namespace ddreg {

namespace {

const char *zmode_name(ZMode m) { return m == ZMode::Robust ? "robust" : "classic"; }

ZMode zmode_from(const std::string &s) {
    if (s == "robust") return ZMode::Robust;
    if (s == "classic") return ZMode::Classic;
    throw Error(Errc::InvalidParam, "z-mode must be 'robust' or 'classic'");
}

json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

// Copies j[key] into dst when present; rejects keys the section does not know.
class Section {
  public:
    Section(const json &j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw Error(Errc::Format, "config section '" + name_ + "' must be an object");
    }

    template <typename T>
    Section &get(const char *key, T &dst) {
        known_.emplace_back(key);
        if (j_.contains(key)) {
            try {
                dst = j_.at(key).get<T>();
            } catch (const json::exception &e) {
                throw Error(Errc::Format, "config '" + name_ + "." + key + "': " + e.what());
            }
        }
        return *this;
    }

    Section &get_optional(const char *key, std::optional<double> &dst) {
        known_.emplace_back(key);
        if (j_.contains(key)) {
            if (j_.at(key).is_null()) {
                dst.reset();
            } else {
                double v = 0.0;
                get(key, v);
                dst = v;
            }
        }
        return *this;
    }

    Section &sub(const char *key, const std::function<void(const json &)> &fn) {
        known_.emplace_back(key);
        if (j_.contains(key)) fn(j_.at(key));
        return *this;
    }

    void finish() const {
        for (const auto &item : j_.items()) {
            if (std::find(known_.begin(), known_.end(), item.key()) == known_.end()) {
                throw Error(Errc::Format, "unknown config key '" + name_ + "." + item.key() + "'");
            }
        }
    }

  private:
    const json &j_;
    std::string name_;
    std::vector<std::string> known_;
};

std::string find_config_path(const std::vector<std::string> &args) {
    for (size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
    }
    return {};
}

std::vector<double> parse_edges(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception &) {
            throw Error(Errc::InvalidParam, "bad bucket edge '" + tok + "'");
        }
    }
    return out;
}

std::string config_hash(const std::string &command, const RunConfig &cfg) {
    return hex64(fnv1a64(command + "\n" + cfg.to_json().dump()));
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

json manifest(const std::string &command, const RunConfig &cfg) {
    return {{"command", command}, {"config", cfg.to_json()}, {"config_hash", config_hash(command, cfg)}};
}

json stats_json(const NormalizerStats &s) {
    return {{"count_gt_pos", s.count_gt_pos}, {"above_0.5", s.above_0_5}, {"above_0.8", s.above_0_8}, {"max", s.max}};
}

json summary_json(const std::vector<EvalRecord> &records, const std::vector<double> &edges) {
    json j;
    j["n"] = records.size();
    j["n_excluded"] = std::count_if(records.begin(), records.end(), [](const EvalRecord &r) { return r.excluded; });
    if (!records.empty()) {
        const SuccessRatios sr = success_ratios(records);
        j["pct_under_1"] = sr.pct_under_1;
        j["pct_under_5"] = sr.pct_under_5;
    }
    j["edges"] = edges;
    json buckets = json::array();
    for (const BucketSummary &b : bucket_by_rotation(records, edges)) {
        buckets.push_back({{"lo", b.lo},
                           {"hi", b.hi},
                           {"n", b.n},
                           {"mean_angle_err_deg", optional_json(b.mean_angle_err)},
                           {"mean_corner_px", optional_json(b.mean_corner_px)},
                           {"pct_under_1", optional_json(b.pct_under_1)},
                           {"pct_under_5", optional_json(b.pct_under_5)}});
    }
    j["buckets"] = buckets;
    return j;
}

std::string correspondences_csv(const CorrespondenceSet &c) {
    std::string out = "moving_cell,fixed_cell,pm_row,pm_col,pf_row,pf_col,w\n";
    for (const Correspondence &p : c.items) {
        out += std::to_string(p.moving_cell) + ',' + std::to_string(p.fixed_cell) + ',' +
               format_double(p.moving.row) + ',' + format_double(p.moving.col) + ',' + format_double(p.fixed.row) +
               ',' + format_double(p.fixed.col) + ',' + format_double(p.weight) + '\n';
    }
    return out;
}

// Runs fn(k) for k in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)> &fn) {
    const int workers = std::max(1, std::min(jobs, n));
    if (workers == 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int k = next++; k < n; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    errors[static_cast<size_t>(k)] = std::current_exception();
                }
            }
        });
    }
    for (std::thread &t : pool) t.join();
    for (const auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// ---------------------------------------------------------------------------

struct Synth {
    std::string out;
};

void cmd_synth(const RunConfig &cfg, const Synth &opt, std::ostream &log) {
    cfg.synth.check_support();
    if (cfg.n_pairs < 1) throw Error(Errc::InvalidParam, "n-pairs must be at least 1");
    if (cfg.src_image.empty() != cfg.src_mask.empty()) {
        throw Error(Errc::InvalidParam, "--src-image and --src-mask go together");
    }
    std::optional<Phantom> source;
    if (!cfg.src_image.empty()) {
        for (const std::string &p : {cfg.src_image, cfg.src_mask}) {
            if (!fs::exists(p)) throw Error(Errc::Io, "missing input " + p);
        }
        Phantom s{normalize(read_pnm(cfg.src_image)).raster, read_pnm(cfg.src_mask)};
        for (float &v : s.mask.values()) v = v > 0.5f ? 1.0f : 0.0f;
        source = std::move(s);
    }

    const fs::path out(opt.out);
    fs::create_directories(out);
    json pairs = json::array();
    for (int k = 0; k < cfg.n_pairs; ++k) {
        Rng rng(derive_seed(cfg.synth.seed, static_cast<std::uint64_t>(k)));
        Phantom ph = source ? *source : make_phantom(cfg.synth.src_side, rng);
        const SynthPair pair = synth_pair(ph.bright, ph.mask, cfg.synth, rng);
        char id[32];
        std::snprintf(id, sizeof(id), "pair_%04d", k);
        write_pair_bundle(out / id, pair);
        pairs.push_back({{"id", id},
                         {"gt_params", to_json(pair.gt_params)},
                         {"coarse_positives", std::count_if(pair.gt.coarse.conf.v.begin(), pair.gt.coarse.conf.v.end(),
                                                            [](double v) { return v > 0.0; })},
                         {"one_to_multi", has_one_to_multi(pair.gt.coarse)}});
    }
    json m = manifest("synth", cfg);
    m["pairs"] = pairs;
    write_json(out / "manifest.json", m);
    log << "wrote " << cfg.n_pairs << " pairs to " << out.string() << "\n";
}

struct Register {
    std::string data;
    std::string out;
    std::string matcher = "mock";
    std::string scores;
    std::string dump;
};

std::vector<std::string> list_cases(const fs::path &data) {
    if (!fs::is_directory(data)) throw Error(Errc::Io, "dataset directory " + data.string() + " not found");
    std::vector<std::string> ids;
    for (const auto &e : fs::directory_iterator(data)) {
        if (e.is_directory() && fs::exists(e.path() / "pair.json")) ids.push_back(e.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw Error(Errc::Io, "no pair directories under " + data.string());
    return ids;
}

void cmd_register(const RunConfig &cfg, const Register &opt, std::ostream &log) {
    cfg.pipeline.validate();
    cfg.corruption.validate();
    if (opt.matcher != "mock" && opt.matcher != "files") {
        throw Error(Errc::InvalidParam, "matcher must be 'mock' or 'files'");
    }
    if (opt.matcher == "files" && opt.scores.empty()) {
        throw Error(Errc::InvalidParam, "--matcher files needs --scores");
    }
    const fs::path data(opt.data);
    const std::vector<std::string> ids = list_cases(data);
    const int n = static_cast<int>(ids.size());

    std::vector<EvalRecord> records(static_cast<size_t>(n));
    std::vector<json> fits(static_cast<size_t>(n));

    parallel_for(n, cfg.jobs, [&](int k) {
        const std::string &id = ids[static_cast<size_t>(k)];
        const SynthPair pair = read_pair_bundle(data / id);
        MatcherOutput scores;
        if (opt.matcher == "mock") {
            Rng rng(derive_seed(cfg.synth.seed, static_cast<std::uint64_t>(k)));
            scores = mock_matcher(pair.gt.coarse, pair.gt.fine, cfg.corruption, rng);
        } else {
            const fs::path dir = fs::path(opt.scores) / id;
            scores.coarse = read_match_map(dir / "coarse.map");
            scores.fine = read_match_map(dir / "fine.map");
            if (scores.coarse.grid != pair.gt.coarse.grid || scores.fine.grid != pair.gt.fine.grid ||
                scores.coarse.side != pair.gt.coarse.side || scores.fine.side != pair.gt.fine.side) {
                throw Error(Errc::SizeMismatch, id + ": score maps do not match the pair geometry");
            }
        }
        const CaseResult res = register_case(id, scores, pair.gt_affine, cfg.pipeline);
        const LossBreakdown loss =
            total_loss(res.inter.coarse, pair.gt.coarse,
                       coarse_enhance_mask(pair.gt.coarse, pair.gt.cand_moving_coarse, pair.gt.cand_fixed_coarse),
                       res.inter.fine, pair.gt.fine, fine_enhance_mask(pair.gt.coarse, pair.gt.fine), cfg.loss);

        json f{{"case_id", id},
               {"fit", res.fit ? to_json(*res.fit) : json(nullptr)},
               {"failure", res.failure ? json(errc_name(*res.failure)) : json(nullptr)},
               {"n_coarse_selected", res.inter.coarse_selected.count()},
               {"n_angle_kept", res.inter.angles.kept.size()},
               {"loss", {{"total", loss.total}, {"coarse_conf", loss.coarse_conf}, {"fine_conf", loss.fine_conf},
                         {"angle", loss.angle}, {"trans", loss.trans}}}};
        fits[static_cast<size_t>(k)] = std::move(f);
        records[static_cast<size_t>(k)] = res.record;

        if (!opt.dump.empty()) {
            const fs::path dir = fs::path(opt.dump) / id;
            fs::create_directories(dir);
            write_match_map(dir / "coarse.map", scores.coarse);
            write_match_map(dir / "fine.map", scores.fine);
            write_match_map(dir / "coarse_conf.map", res.inter.coarse);
            write_match_map(dir / "fine_conf.map", res.inter.fine);
            write_text(dir / "correspondences.csv", correspondences_csv(res.inter.correspondences));
            json angles{{"center_deg", rad2deg(res.inter.angles.center)},
                        {"spread_deg", rad2deg(res.inter.angles.spread)},
                        {"kept", res.inter.angles.kept.size()},
                        {"removed", res.inter.angles.removed.size()}};
            write_json(dir / "angles.json", angles);
        }
    });

    const fs::path out(opt.out);
    fs::create_directories(out);
    write_text(out / "records.csv", records_csv(records));
    write_json(out / "fits.json", json(fits));
    write_json(out / "summary.json", summary_json(records, cfg.pipeline.edges));
    write_text(out / "curve.csv", curve_csv(success_ratios(records).curve));
    json m = manifest("register", cfg);
    m["matcher"] = opt.matcher;
    m["cases"] = ids;
    write_json(out / "manifest.json", m);
    const auto failed = std::count_if(records.begin(), records.end(), [](const EvalRecord &r) { return r.excluded; });
    log << "registered " << n << " cases (" << failed << " without a fit) into " << out.string() << "\n";
}

struct Bench {
    std::string out;
};

void cmd_bench(const RunConfig &cfg, const Bench &opt, std::ostream &log) {
    cfg.synth.check_support();
    if (cfg.bench_trials < 1) throw Error(Errc::InvalidParam, "trials must be at least 1");
    if (!(cfg.bench_noise >= 0.0)) throw Error(Errc::InvalidParam, "noise must be non-negative");
    json trials = json::array();
    json timings = json::array();
    int n_multi = 0, sk_low = 0, ds_more = 0;
    for (int t = 0; t < cfg.bench_trials; ++t) {
        Rng rng(derive_seed(cfg.synth.seed, static_cast<std::uint64_t>(t)));
        SynthPair pair;
        for (int attempt = 0; attempt < 20; ++attempt) {
            const Phantom ph = make_phantom(cfg.synth.src_side, rng);
            pair = synth_pair(ph.bright, ph.mask, cfg.synth, rng);
            if (has_one_to_multi(pair.gt.coarse)) break;
        }
        const ExperimentReport r = normalizer_experiment(pair.gt.coarse, cfg.bench_noise, rng, cfg.bench_margin);
        if (r.one_to_multi) {
            ++n_multi;
            if (r.sinkhorn.max <= 0.5) ++sk_low;
            if (r.dual_softmax.above_0_5 > r.sinkhorn.above_0_5) ++ds_more;
        }
        trials.push_back({{"trial", t},
                          {"one_to_multi", r.one_to_multi},
                          {"dual_softmax", stats_json(r.dual_softmax)},
                          {"sinkhorn", stats_json(r.sinkhorn)}});
        timings.push_back({{"trial", t},
                           {"dual_softmax_us", r.dual_softmax.micros},
                           {"sinkhorn_us", r.sinkhorn.micros}});
    }
    json report = manifest("bench-normalizers", cfg);
    report["summary"] = {{"trials", cfg.bench_trials},
                         {"one_to_multi_trials", n_multi},
                         {"sinkhorn_max_le_0.5", sk_low},
                         {"dual_softmax_more_above_0.5", ds_more}};
    report["trials"] = trials;
    const fs::path out(opt.out);
    fs::create_directories(out);
    write_json(out / "report.json", report);
    // Wall times differ between runs, so they live apart from the report.
    write_json(out / "timings.json", timings);
    log << "bench: " << n_multi << " one-to-multi trials, sinkhorn max <= 0.5 in " << sk_low
        << ", dual-softmax ahead in " << ds_more << "\n";
}

struct Eval {
    std::string records;
    std::string out;
    std::string edges;
    bool shg = false;
};

void cmd_eval(const Eval &opt, std::ostream &log) {
    if (!fs::exists(opt.records)) throw Error(Errc::Io, "missing records file " + opt.records);
    std::vector<double> edges = opt.shg ? shg_edges() : default_edges();
    if (!opt.edges.empty()) edges = parse_edges(opt.edges);
    const std::vector<EvalRecord> records = parse_records_csv(read_text(opt.records));
    if (records.empty()) throw Error(Errc::EmptyBatch, "records file has no rows");
    const fs::path out(opt.out);
    fs::create_directories(out);
    write_json(out / "summary.json", summary_json(records, edges));
    write_text(out / "curve.csv", curve_csv(success_ratios(records).curve));
    log << "evaluated " << records.size() << " records into " << out.string() << "\n";
}

struct Convert {
    std::string in;
    std::string out;
    std::string to = "coord";
    int side = 0;
    bool inverse = false;
};

void cmd_convert(const Convert &opt, std::ostream &stdout_stream) {
    json j;
    try {
        j = json::parse(read_text(opt.in));
    } catch (const json::exception &e) {
        throw Error(Errc::Format, opt.in + ": " + e.what());
    }
    Mat3 m;
    if (j.is_object() && j.contains("m")) {
        m = mat3_from_json(j);
    } else if (j.is_object() && j.contains("theta_deg")) {
        if (!j.contains("side")) {
            if (opt.side < 2) throw Error(Errc::InvalidParam, "params without 'side' need --side");
            j["side"] = opt.side;
        }
        m = build_affine(params_from_json(j));
    } else {
        throw Error(Errc::Format, "input is neither a matrix nor a parameter set");
    }
    if (opt.inverse) m = inverse(m);

    json result;
    if (opt.to == "affine") {
        result = to_json(m.role() == Role::Affine ? m : coord_to_affine(m));
    } else if (opt.to == "coord") {
        result = to_json(m.role() == Role::Coord ? m : affine_to_coord(m));
    } else if (opt.to == "params") {
        result = to_json(decompose_params(m));
    } else {
        throw Error(Errc::InvalidParam, "--to must be affine, coord or params");
    }
    const std::string text = result.dump(2) + "\n";
    if (opt.out.empty()) {
        stdout_stream << text;
    } else {
        write_text(opt.out, text);
    }
}

void add_synth_options(CLI::App &cmd, RunConfig &cfg) {
    cmd.add_option("--src-side", cfg.synth.src_side, "source image side");
    cmd.add_option("--out-side", cfg.synth.out_side, "cropped pair side");
    cmd.add_option("--theta-min", cfg.synth.theta_min_deg, "lowest rotation (deg)");
    cmd.add_option("--theta-max", cfg.synth.theta_max_deg, "highest rotation (deg)");
    cmd.add_option("--trans", cfg.synth.trans_range, "translation range (+/- px)");
    cmd.add_option("--coarse-grid", cfg.synth.coarse_grid, "coarse cells per side");
    cmd.add_option("--fine-grid", cfg.synth.fine_grid, "fine cells per side");
    cmd.add_option("--coarse-thresh", cfg.synth.coarse_thresh, "coarse candidate mask fraction");
    cmd.add_option("--fine-thresh", cfg.synth.fine_thresh, "fine candidate mask fraction");
}

} // namespace

// ---------------------------------------------------------------------------

json RunConfig::to_json() const {
    json j;
    j["seed"] = synth.seed;
    j["jobs"] = jobs;
    j["synth"] = {{"src_side", synth.src_side},           {"out_side", synth.out_side},
                  {"theta_min_deg", synth.theta_min_deg}, {"theta_max_deg", synth.theta_max_deg},
                  {"trans_range", synth.trans_range},     {"coarse_grid", synth.coarse_grid},
                  {"fine_grid", synth.fine_grid},         {"coarse_thresh", synth.coarse_thresh},
                  {"fine_thresh", synth.fine_thresh},     {"n_pairs", n_pairs},
                  {"src_image", src_image},               {"src_mask", src_mask}};
    j["corruption"] = {{"drop_rate", corruption.drop_rate},
                       {"spurious_rate", corruption.spurious_rate},
                       {"jitter_sigma", corruption.jitter_sigma},
                       {"score_margin", corruption.score_margin},
                       {"score_noise", corruption.score_noise},
                       {"spurious_angle_offset_deg", optional_json(corruption.spurious_angle_offset_deg)}};
    j["pipeline"] = {{"coarse_tau", pipeline.coarse_tau},
                     {"fine_tau", pipeline.fine_tau},
                     {"temperature", pipeline.temperature},
                     {"sinkhorn_iters", pipeline.sinkhorn_iters},
                     {"sinkhorn_eps", pipeline.sinkhorn_eps},
                     {"z_filter", pipeline.z_filter},
                     {"z_k", pipeline.z_k},
                     {"z_mode", zmode_name(pipeline.z_mode)},
                     {"z_min_dev_deg", pipeline.z_min_dev_deg},
                     {"score_threshold", optional_json(pipeline.score_threshold)},
                     {"weighted", pipeline.fit.weighted},
                     {"ransac", pipeline.fit.ransac},
                     {"edges", pipeline.edges}};
    j["loss"] = {{"coarse", {{"lambda1", loss.coarse.lambda1}, {"lambda2", loss.coarse.lambda2}, {"alpha", loss.coarse.aux}}},
                 {"fine", {{"lambda1", loss.fine.lambda1}, {"lambda2", loss.fine.lambda2}, {"beta", loss.fine.aux}}}};
    j["bench"] = {{"trials", bench_trials}, {"noise_sigma", bench_noise}, {"margin", bench_margin}};
    return j;
}

void RunConfig::merge(const json &j) {
    Section root(j, "config");
    root.get("seed", synth.seed).get("jobs", jobs);
    root.sub("synth", [&](const json &s) {
        Section(s, "synth")
            .get("src_side", synth.src_side)
            .get("out_side", synth.out_side)
            .get("theta_min_deg", synth.theta_min_deg)
            .get("theta_max_deg", synth.theta_max_deg)
            .get("trans_range", synth.trans_range)
            .get("coarse_grid", synth.coarse_grid)
            .get("fine_grid", synth.fine_grid)
            .get("coarse_thresh", synth.coarse_thresh)
            .get("fine_thresh", synth.fine_thresh)
            .get("n_pairs", n_pairs)
            .get("src_image", src_image)
            .get("src_mask", src_mask)
            .finish();
    });
    root.sub("corruption", [&](const json &s) {
        Section(s, "corruption")
            .get("drop_rate", corruption.drop_rate)
            .get("spurious_rate", corruption.spurious_rate)
            .get("jitter_sigma", corruption.jitter_sigma)
            .get("score_margin", corruption.score_margin)
            .get("score_noise", corruption.score_noise)
            .get_optional("spurious_angle_offset_deg", corruption.spurious_angle_offset_deg)
            .finish();
    });
    root.sub("pipeline", [&](const json &s) {
        std::string mode = zmode_name(pipeline.z_mode);
        Section(s, "pipeline")
            .get("coarse_tau", pipeline.coarse_tau)
            .get("fine_tau", pipeline.fine_tau)
            .get("temperature", pipeline.temperature)
            .get("sinkhorn_iters", pipeline.sinkhorn_iters)
            .get("sinkhorn_eps", pipeline.sinkhorn_eps)
            .get("z_filter", pipeline.z_filter)
            .get("z_k", pipeline.z_k)
            .get("z_mode", mode)
            .get("z_min_dev_deg", pipeline.z_min_dev_deg)
            .get_optional("score_threshold", pipeline.score_threshold)
            .get("weighted", pipeline.fit.weighted)
            .get("ransac", pipeline.fit.ransac)
            .get("edges", pipeline.edges)
            .finish();
        pipeline.z_mode = zmode_from(mode);
    });
    root.sub("loss", [&](const json &s) {
        Section sec(s, "loss");
        sec.sub("coarse", [&](const json &c) {
            Section(c, "loss.coarse")
                .get("lambda1", loss.coarse.lambda1)
                .get("lambda2", loss.coarse.lambda2)
                .get("alpha", loss.coarse.aux)
                .finish();
        });
        sec.sub("fine", [&](const json &f) {
            Section(f, "loss.fine")
                .get("lambda1", loss.fine.lambda1)
                .get("lambda2", loss.fine.lambda2)
                .get("beta", loss.fine.aux)
                .finish();
        });
        sec.finish();
    });
    root.sub("bench", [&](const json &s) {
        Section(s, "bench")
            .get("trials", bench_trials)
            .get("noise_sigma", bench_noise)
            .get("margin", bench_margin)
            .finish();
    });
    root.finish();
}

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    RunConfig cfg;
    try {
        const std::string config_path = find_config_path(args);
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw Error(Errc::Io, "missing config file " + config_path);
            try {
                cfg.merge(json::parse(read_text(config_path)));
            } catch (const json::exception &e) {
                throw Error(Errc::Format, config_path + ": " + e.what());
            }
        }
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    CLI::App app{"Dual-hierarchy matching registration toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config; flags override its values");

    auto add_common = [&](CLI::App &cmd) {
        cmd.add_option("--seed", cfg.synth.seed, "base RNG seed");
    };

    Synth synth_opt;
    CLI::App *synth = app.add_subcommand("synth", "generate synthetic registration pairs");
    add_common(*synth);
    add_synth_options(*synth, cfg);
    synth->add_option("--out", synth_opt.out, "dataset directory")->required();
    synth->add_option("-n,--n-pairs", cfg.n_pairs, "number of pairs");
    synth->add_option("--src-image", cfg.src_image, "aligned source image (PGM/PPM)");
    synth->add_option("--src-mask", cfg.src_mask, "aligned source mask (PGM)");

    Register reg_opt;
    std::string z_mode = zmode_name(cfg.pipeline.z_mode);
    double spurious_offset = 0.0;
    double score_threshold = 0.0;
    bool no_z = false;
    bool unweighted = false;
    std::string reg_edges;
    CLI::App *reg = app.add_subcommand("register", "register every pair of a dataset");
    add_common(*reg);
    reg->add_option("--data", reg_opt.data, "dataset directory from synth")->required();
    reg->add_option("--out", reg_opt.out, "output directory")->required();
    reg->add_option("--matcher", reg_opt.matcher, "mock or files");
    reg->add_option("--scores", reg_opt.scores, "score-map directory for --matcher files");
    reg->add_option("--dump", reg_opt.dump, "write intermediates here");
    reg->add_option("--jobs", cfg.jobs, "parallel cases");
    reg->add_option("--drop-rate", cfg.corruption.drop_rate);
    reg->add_option("--spurious-rate", cfg.corruption.spurious_rate);
    reg->add_option("--jitter", cfg.corruption.jitter_sigma, "angle (rad) and refinement (cells) sigma");
    reg->add_option("--score-margin", cfg.corruption.score_margin);
    reg->add_option("--score-noise", cfg.corruption.score_noise);
    CLI::Option *offset_opt = reg->add_option("--spurious-angle-offset", spurious_offset, "degrees");
    reg->add_option("--coarse-tau", cfg.pipeline.coarse_tau);
    reg->add_option("--fine-tau", cfg.pipeline.fine_tau);
    CLI::Option *score_opt = reg->add_option("--score-threshold", score_threshold, "select on raw logits");
    reg->add_option("--temperature", cfg.pipeline.temperature);
    reg->add_option("--sinkhorn-iters", cfg.pipeline.sinkhorn_iters);
    reg->add_option("--sinkhorn-eps", cfg.pipeline.sinkhorn_eps);
    reg->add_option("--z-k", cfg.pipeline.z_k);
    reg->add_option("--z-mode", z_mode, "robust or classic");
    reg->add_option("--z-min-dev", cfg.pipeline.z_min_dev_deg, "deviation (deg) always kept");
    reg->add_flag("--no-z-filter", no_z);
    reg->add_flag("--unweighted", unweighted);
    reg->add_flag("--ransac", cfg.pipeline.fit.ransac);
    reg->add_option("--edges", reg_edges, "comma-separated bucket edges (deg)");

    Bench bench_opt;
    CLI::App *bench = app.add_subcommand("bench-normalizers", "dual-softmax vs Sinkhorn on one-to-multi maps");
    add_common(*bench);
    add_synth_options(*bench, cfg);
    bench->add_option("--out", bench_opt.out, "output directory")->required();
    bench->add_option("--trials", cfg.bench_trials);
    bench->add_option("--noise", cfg.bench_noise, "Gaussian sigma on every score");
    bench->add_option("--margin", cfg.bench_margin, "positive minus negative score");

    Eval eval_opt;
    CLI::App *eval = app.add_subcommand("eval", "summarize a records CSV");
    eval->add_option("--records", eval_opt.records, "records.csv")->required();
    eval->add_option("--out", eval_opt.out, "output directory")->required();
    eval->add_option("--edges", eval_opt.edges, "comma-separated bucket edges (deg)");
    eval->add_flag("--shg", eval_opt.shg, "use (0,20,35,45,90] edges");

    Convert conv_opt;
    CLI::App *conv = app.add_subcommand("convert", "convert between matrix roles and parameters");
    conv->add_option("--in", conv_opt.in, "matrix or params JSON")->required()->check(CLI::ExistingFile);
    conv->add_option("--to", conv_opt.to, "affine, coord or params");
    conv->add_option("--side", conv_opt.side, "image side for params lacking one");
    conv->add_option("--out", conv_opt.out, "output file (default stdout)");
    conv->add_flag("--inverse", conv_opt.inverse, "invert before converting");

    std::vector<const char *> argv{"ddreg"};
    for (const std::string &a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (*reg) {
            cfg.pipeline.z_mode = zmode_from(z_mode);
            if (offset_opt->count() > 0) cfg.corruption.spurious_angle_offset_deg = spurious_offset;
            if (score_opt->count() > 0) cfg.pipeline.score_threshold = score_threshold;
            if (no_z) cfg.pipeline.z_filter = false;
            if (unweighted) cfg.pipeline.fit.weighted = false;
            if (!reg_edges.empty()) cfg.pipeline.edges = parse_edges(reg_edges);
            cmd_register(cfg, reg_opt, err);
        } else if (*synth) {
            cmd_synth(cfg, synth_opt, err);
        } else if (*bench) {
            cmd_bench(cfg, bench_opt, err);
        } else if (*eval) {
            cmd_eval(eval_opt, err);
        } else if (*conv) {
            cmd_convert(conv_opt, out);
        }
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const fs::filesystem_error &e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}

} // namespace ddreg
