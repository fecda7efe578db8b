// geodiag: command-line front end for bundles, markers, capacity, the
// separability oracle, probes and prognostics.
//
// Exit codes: 0 success, 1 analysis error, 2 usage error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geodiag/geodiag.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geodiag;

namespace {

#ifndef GEODIAG_VERSION
#define GEODIAG_VERSION "dev"
#endif

struct RunContext {
    std::string command_line;
    std::string subcommand;
    json config = json::object();
    json seeds = json::array();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    unsigned jobs = 1;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

std::string iso_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorCode::Io, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::MissingFile, path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

// Manifest next to a file output, or inside a directory output.
fs::path manifest_path(const fs::path& out, bool is_dir) {
    if (is_dir) return out / "manifest.json";
    return fs::path(out.string() + ".manifest.json");
}

void write_manifest(const RunContext& ctx, const fs::path& where) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.start).count();
    json m{{"command", ctx.command_line},
           {"subcommand", ctx.subcommand},
           {"config", ctx.config},
           {"seeds", ctx.seeds},
           {"inputs", ctx.inputs},
           {"outputs", ctx.outputs},
           {"jobs", ctx.jobs},
           {"version", GEODIAG_VERSION},
           {"finished_at", iso_now()},
           {"duration_seconds", secs}};
    write_json(where, m);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

FeatureBundle load_bundle(const std::string& path, RunContext& ctx) {
    ctx.inputs.push_back(path);
    auto b = read_bundle(path);
    for (const auto& w : bundle_warnings(b)) std::cerr << "warning: " << path << ": " << w << "\n";
    return b;
}

// Rows of one class, optionally reduced to `points` rows drawn with a stream
// keyed by (seed, class).
std::vector<ClassManifold> pick_classes(const FeatureBundle& b, const std::vector<std::uint32_t>& classes,
                                        std::size_t points, std::uint64_t seed) {
    const auto rows = class_rows(b);
    std::vector<ClassManifold> out;
    for (auto c : classes) {
        require(c < b.num_classes, ErrorCode::InvalidArgument, "class " + std::to_string(c) + " out of range");
        auto idx = rows[c];
        if (points > 0) {
            require(idx.size() >= points, ErrorCode::ClassTooSmall,
                    "class " + std::to_string(c) + " has " + std::to_string(idx.size()) + " points");
            CounterRng rng(seed, {stream::kSubsamplePoints, 0, c});
            auto pick = draw_without_replacement(idx.size(), points, rng);
            std::sort(pick.begin(), pick.end());
            std::vector<Eigen::Index> sel;
            for (auto p : pick) sel.push_back(idx[p]);
            idx = sel;
        }
        out.push_back({c, gather_rows(b.features, idx)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenSpheresOpts {
    SphereSpec spec;
    std::string out;
};

void run_gen_spheres(const GenSpheresOpts& o, RunContext& ctx) {
    const auto b = gen_spheres(o.spec);
    write_bundle(b, o.out);
    ctx.config = {{"kind", "spheres"},
                  {"dim", o.spec.dim},
                  {"radius", o.spec.radius},
                  {"ambient", o.spec.ambient},
                  {"classes", o.spec.num_classes},
                  {"points", o.spec.points_per_class},
                  {"shared_frame", o.spec.shared_frame}};
    ctx.seeds.push_back(o.spec.seed);
    ctx.outputs = {o.out};
    write_manifest(ctx, manifest_path(o.out, true));
}

struct GenPlantedOpts {
    PlantedSpec spec;
    std::string out;
};

void run_gen_planted(const GenPlantedOpts& o, RunContext& ctx) {
    const auto pair = gen_planted_pair(o.spec);
    const fs::path out(o.out);
    write_bundle(pair.id, out / "id");
    write_bundle(pair.ood, out / "ood");
    ctx.config = {{"kind", "planted"},
                  {"compression", o.spec.compression},
                  {"latent_dim", o.spec.latent_dim},
                  {"ambient_dim", o.spec.ambient_dim},
                  {"core_modes", o.spec.core_modes},
                  {"retained_modes", pair.retained},
                  {"id_classes", o.spec.id_classes},
                  {"id_points", o.spec.id_points},
                  {"ood_classes", o.spec.ood_classes},
                  {"ood_points", o.spec.ood_points}};
    ctx.seeds.push_back(o.spec.seed);
    ctx.outputs = {(out / "id").string(), (out / "ood").string()};
    write_manifest(ctx, manifest_path(out, true));
}

struct AnalysisOpts {
    std::string bundle;
    std::string out;
    std::size_t classes_per_draw = 2;
    std::size_t points = 50;
    std::size_t reps = 100;
    std::uint64_t seed = 0;
    std::size_t n_dirs = 200;
    double tol = 1e-8;
    std::string whiten = "zca";
    double ridge = 1e-6;
    std::string dichotomies = "one-vs-rest";
};

GlueConfig glue_config(const AnalysisOpts& o, unsigned jobs) {
    GlueConfig g;
    g.n_dirs = o.n_dirs;
    g.tol = o.tol;
    g.jobs = jobs;
    g.dichotomies = parse_dichotomy_mode(o.dichotomies);
    return g;
}

void run_capacity(const AnalysisOpts& o, RunContext& ctx) {
    const auto b = load_bundle(o.bundle, ctx);
    const SubsampleSpec spec{o.classes_per_draw, o.points, o.reps, o.seed};
    const WhitenConfig wc{parse_whiten_mode(o.whiten), o.ridge};
    const auto report = glue_pairwise(b, spec, wc, glue_config(o, ctx.jobs));
    const json j = to_json(report);
    write_json(o.out, j);
    std::printf("d_eff %s  r_eff %s  psi_eff %s  n_crit %s\n", j["aggregate"]["d_eff"]["mean"].dump().c_str(),
                j["aggregate"]["r_eff"]["mean"].dump().c_str(), j["aggregate"]["psi_eff"]["mean"].dump().c_str(),
                j["aggregate"]["n_crit"]["mean"].dump().c_str());
    ctx.config = j["config"];
    ctx.seeds.push_back(o.seed);
    ctx.outputs = {o.out};
    write_manifest(ctx, manifest_path(o.out, false));
}

struct MarkersOpts {
    AnalysisOpts a;
    std::string markers;
    bool subsample = false;
    double temperature = 1.0;
};

void run_markers(const MarkersOpts& o, RunContext& ctx) {
    const auto b = load_bundle(o.a.bundle, ctx);
    MarkerConfig cfg;
    const SubsampleSpec spec{o.a.classes_per_draw, o.a.points, o.a.reps, o.a.seed};
    if (o.subsample) cfg.subsample = spec;
    cfg.glue_subsample = spec;
    cfg.selected = split_list(o.markers);
    cfg.whiten = {parse_whiten_mode(o.a.whiten), o.a.ridge};
    cfg.glue = glue_config(o.a, ctx.jobs);
    cfg.energy_temperature = o.temperature;
    cfg.seed = o.a.seed;
    const auto report = compute_all(b, cfg);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    write_json(o.a.out, to_json(report));
    ctx.config = report.provenance;
    ctx.config.erase("bundle");
    ctx.seeds.push_back(o.a.seed);
    ctx.outputs = {o.a.out};
    write_manifest(ctx, manifest_path(o.a.out, false));
}

struct OracleOpts {
    std::string bundle;
    std::string pair = "0,1";
    std::string out;
    std::size_t points = 0;
    std::size_t trials = 500;
    std::size_t nmax = 64;
    std::uint64_t seed = 0;
    bool full_curve = false;
    std::string whiten = "none";
    double ridge = 1e-6;
};

void run_oracle(const OracleOpts& o, RunContext& ctx) {
    const auto b = load_bundle(o.bundle, ctx);
    std::vector<std::uint32_t> classes;
    for (const auto& s : split_list(o.pair)) {
        try {
            classes.push_back(static_cast<std::uint32_t>(std::stoul(s)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad class id '" + s + "' in --pair");
        }
    }
    require(classes.size() >= 2, ErrorCode::InvalidArgument, "--pair needs at least two class ids");
    auto ms = pick_classes(b, classes, o.points, o.seed);
    ms = unstack_points(ms, gaussianize(stack_points(ms), {parse_whiten_mode(o.whiten), o.ridge}));
    const auto dich = make_dichotomies(ms.size(), DichotomyMode::OneVsRest);
    OracleConfig cfg;
    cfg.n_trials = o.trials;
    cfg.seed = o.seed;
    cfg.jobs = ctx.jobs;
    const auto res = empirical_ncrit(ms, dich.front(), o.nmax, cfg, o.full_curve);
    std::string csv = "n_prime,p_hat,n_trials\n";
    for (const auto& [np, p] : res.p_curve)
        csv += std::to_string(np) + "," + format_double(p) + "," + std::to_string(res.n_projections) + "\n";
    write_text(o.out, csv);
    std::printf("n_crit %zu\n", res.n_crit);
    ctx.config = {{"pair", classes},      {"points", o.points},       {"trials", o.trials},
                  {"nmax", o.nmax},       {"full_curve", o.full_curve}, {"whiten", o.whiten},
                  {"ridge_fraction", o.ridge}, {"margin_tol", cfg.margin_tol}, {"n_crit", res.n_crit}};
    ctx.seeds.push_back(o.seed);
    ctx.outputs = {o.out};
    write_manifest(ctx, manifest_path(o.out, false));
}

struct ProbeOpts {
    std::string train;
    std::string test;
    double test_fraction = 0.0;
    std::string out;
    ProbeConfig cfg;
    bool no_bias = false;
    std::size_t repeats = 1;
};

void run_probe(const ProbeOpts& o, RunContext& ctx) {
    FeatureBundle train, test;
    if (!o.test.empty()) {
        train = load_bundle(o.train, ctx);
        test = load_bundle(o.test, ctx);
    } else {
        require(o.test_fraction > 0.0, ErrorCode::InvalidArgument, "give --test or --test-fraction");
        auto split = train_test_split(load_bundle(o.train, ctx), o.test_fraction, o.cfg.seed);
        train = std::move(split.first);
        test = std::move(split.second);
    }
    ProbeConfig cfg = o.cfg;
    cfg.bias = !o.no_bias;
    const auto summary = probe_repeats(train, test, cfg, o.repeats, ctx.jobs);
    json j = to_json(summary);
    j["repeats"] = o.repeats;
    if (o.test.empty()) j["test_fraction"] = o.test_fraction;
    write_json(o.out, j);
    std::printf("train_acc %s  test_acc %s\n", format_double(summary.train_acc).c_str(),
                format_double(summary.test_acc).c_str());
    ctx.config = j["config"];
    ctx.config["repeats"] = o.repeats;
    ctx.config["test_fraction"] = o.test_fraction;
    ctx.seeds.push_back(o.cfg.seed);
    ctx.outputs = {o.out};
    write_manifest(ctx, manifest_path(o.out, false));
}

struct CorrelateOpts {
    std::vector<std::string> runs;
    std::string out;
    std::string heatmap;
};

void run_correlate(const CorrelateOpts& o, RunContext& ctx) {
    std::vector<RunRecord> records;
    for (const auto& path : o.runs) {
        ctx.inputs.push_back(path);
        auto r = run_record_from_json(read_json(path));
        if (r.run_id.empty()) r.run_id = fs::path(path).stem().string();
        records.push_back(std::move(r));
    }
    const auto table = build_table(records);
    for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
    write_text(o.out, table_csv(table));
    ctx.outputs = {o.out};
    if (!o.heatmap.empty()) {
        write_json(o.heatmap, heatmap_json(table));
        ctx.outputs.push_back(o.heatmap);
    }
    ctx.config = {{"records", records.size()}, {"cells", table.cells.size()}, {"warnings", table.warnings.size()}};
    write_manifest(ctx, manifest_path(o.out, false));
}

struct PredictOpts {
    std::string a;
    std::string b;
    std::string markers = "d_eff,psi_eff";
    std::vector<std::string> lower_better;
    std::string out;
};

MarkerReport load_report(const std::string& path) {
    const json j = read_json(path);
    // Accept a plain marker report or a run record that embeds one.
    if (j.contains("markers") && j["markers"].is_object() && j["markers"].contains("markers"))
        return marker_report_from_json(j["markers"]);
    return marker_report_from_json(j);
}

void run_predict(const PredictOpts& o, RunContext& ctx) {
    ctx.inputs = {o.a, o.b};
    const auto a = load_report(o.a);
    const auto b = load_report(o.b);
    std::vector<DecisionMarker> decision;
    for (const auto& name : split_list(o.markers)) {
        const bool lower = std::find(o.lower_better.begin(), o.lower_better.end(), name) != o.lower_better.end();
        decision.push_back({name, lower ? Direction::LowerBetter : Direction::HigherBetter});
    }
    const auto v = predict_pair(a, b, decision);
    const json j = to_json(v);
    std::printf("verdict %s\n", to_string(v.outcome).c_str());
    std::printf("%s\n", j.dump(2).c_str());
    if (!o.out.empty()) {
        write_json(o.out, j);
        json dirs = json::object();
        for (const auto& d : decision) dirs[d.name] = to_string(d.direction);
        ctx.config = {{"decision_markers", dirs}};
        ctx.outputs = {o.out};
        write_manifest(ctx, manifest_path(o.out, false));
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric diagnostics for feature point clouds"};
    app.set_version_flag("--version", GEODIAG_VERSION);
    app.require_subcommand(1);
    unsigned jobs = jobs_from_env();
    app.add_option("--jobs,-j", jobs, "Worker threads (default: GEODIAG_JOBS or 1)")->check(CLI::PositiveNumber);

    RunContext ctx;
    for (int i = 0; i < argc; ++i) ctx.command_line += (i ? " " : "") + std::string(argv[i]);
    std::function<void()> action;

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic bundle");
    gen->require_subcommand(1);
    GenSpheresOpts gs;
    auto* sph = gen->add_subcommand("spheres", "Random spheres, one per class");
    sph->add_option("--dim", gs.spec.dim, "Intrinsic dimension D");
    sph->add_option("--radius", gs.spec.radius, "Radius R");
    sph->add_option("--ambient", gs.spec.ambient, "Ambient dimension N");
    sph->add_option("--classes", gs.spec.num_classes, "Number of spheres P");
    sph->add_option("--points", gs.spec.points_per_class, "Points per sphere");
    sph->add_option("--seed", gs.spec.seed);
    sph->add_flag("--shared-frame", gs.spec.shared_frame, "All spheres share one axis frame");
    sph->add_option("--out", gs.out, "Output bundle directory")->required();
    sph->callback([&] { action = [&] { ctx.subcommand = "gen spheres"; run_gen_spheres(gs, ctx); }; });

    GenPlantedOpts gp;
    auto* pl = gen->add_subcommand("planted", "Planted compression ID/OOD bundle pair");
    pl->add_option("--compression", gp.spec.compression, "Fraction of free latent modes discarded, in [0,1]");
    pl->add_option("--seed", gp.spec.seed);
    pl->add_option("--latent-dim", gp.spec.latent_dim);
    pl->add_option("--ambient-dim", gp.spec.ambient_dim);
    pl->add_option("--id-classes", gp.spec.id_classes);
    pl->add_option("--id-points", gp.spec.id_points);
    pl->add_option("--ood-classes", gp.spec.ood_classes);
    pl->add_option("--ood-points", gp.spec.ood_points);
    pl->add_option("--out", gp.out, "Output directory (gets id/ and ood/)")->required();
    pl->callback([&] { action = [&] { ctx.subcommand = "gen planted"; run_gen_planted(gp, ctx); }; });

    auto add_analysis = [](CLI::App* sc, AnalysisOpts& a) {
        sc->add_option("--bundle", a.bundle, "Input bundle directory")->required();
        sc->add_option("--out", a.out, "Output JSON path")->required();
        sc->add_option("--classes-per-draw", a.classes_per_draw);
        sc->add_option("--points", a.points, "Points per class per draw");
        sc->add_option("--reps", a.reps, "Repetitions");
        sc->add_option("--seed", a.seed);
        sc->add_option("--n-dirs", a.n_dirs, "Gaussian directions per estimate");
        sc->add_option("--qp-tol", a.tol);
        sc->add_option("--whiten", a.whiten)->check(CLI::IsMember({"zca", "none"}));
        sc->add_option("--ridge", a.ridge, "Whitening ridge fraction");
        sc->add_option("--dichotomies", a.dichotomies)->check(CLI::IsMember({"one-vs-rest", "all"}));
    };

    AnalysisOpts cap;
    auto* capc = app.add_subcommand("capacity", "GLUE effective geometry over repeated class draws");
    add_analysis(capc, cap);
    capc->callback([&] { action = [&] { ctx.subcommand = "capacity"; run_capacity(cap, ctx); }; });

    MarkersOpts mk;
    auto* mkc = app.add_subcommand("markers", "Marker report for a bundle");
    add_analysis(mkc, mk.a);
    mkc->add_option("--markers", mk.markers, "Comma-separated subset of the catalogue");
    mkc->add_flag("--subsample", mk.subsample, "Compute every marker per subsample and report std errors");
    mkc->add_option("--energy-temperature", mk.temperature);
    mkc->callback([&] { action = [&] { ctx.subcommand = "markers"; run_markers(mk, ctx); }; });

    OracleOpts orc;
    auto* orcc = app.add_subcommand("oracle", "Empirical N_crit by random projection");
    orcc->add_option("--bundle", orc.bundle)->required();
    orcc->add_option("--pair", orc.pair, "Comma-separated class ids (first is +1)");
    orcc->add_option("--out", orc.out, "Output CSV path")->required();
    orcc->add_option("--points", orc.points, "Points per class (0 = all)");
    orcc->add_option("--trials", orc.trials);
    orcc->add_option("--nmax", orc.nmax);
    orcc->add_option("--seed", orc.seed);
    orcc->add_flag("--full-curve", orc.full_curve, "Keep scanning after the crossing");
    orcc->add_option("--whiten", orc.whiten)->check(CLI::IsMember({"zca", "none"}));
    orcc->add_option("--ridge", orc.ridge);
    orcc->callback([&] { action = [&] { ctx.subcommand = "oracle"; run_oracle(orc, ctx); }; });

    ProbeOpts pr;
    auto* prc = app.add_subcommand("probe", "Train and evaluate a linear probe");
    prc->add_option("--train", pr.train, "Training bundle")->required();
    prc->add_option("--test", pr.test, "Test bundle");
    prc->add_option("--test-fraction", pr.test_fraction, "Stratified split of --train instead of --test");
    prc->add_option("--out", pr.out, "Output JSON path")->required();
    prc->add_option("--epochs", pr.cfg.epochs);
    prc->add_option("--lr", pr.cfg.learning_rate);
    prc->add_option("--batch-size", pr.cfg.batch_size);
    prc->add_option("--seed", pr.cfg.seed);
    prc->add_option("--repeats", pr.repeats);
    prc->add_flag("--no-bias", pr.no_bias);
    prc->callback([&] { action = [&] { ctx.subcommand = "probe"; run_probe(pr, ctx); }; });

    CorrelateOpts co;
    auto* coc = app.add_subcommand("correlate", "Pearson table of markers against OOD accuracy");
    coc->add_option("--runs", co.runs, "Run record JSON files")->required();
    coc->add_option("--out", co.out, "Output CSV path")->required();
    coc->add_option("--heatmap", co.heatmap, "Optional heatmap JSON path");
    coc->callback([&] { action = [&] { ctx.subcommand = "correlate"; run_correlate(co, ctx); }; });

    PredictOpts pd;
    auto* pdc = app.add_subcommand("predict", "Verdict between two marker reports");
    pdc->add_option("--a", pd.a, "Report A")->required();
    pdc->add_option("--b", pd.b, "Report B")->required();
    pdc->add_option("--markers", pd.markers, "Decision markers");
    pdc->add_option("--lower-better", pd.lower_better, "Decision markers where lower is better");
    pdc->add_option("--out", pd.out, "Optional verdict JSON path");
    pdc->callback([&] { action = [&] { ctx.subcommand = "predict"; run_predict(pd, ctx); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ctx.jobs = jobs;
    try {
        if (action) action();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
