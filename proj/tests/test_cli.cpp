#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "geodiag/featureio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::path(GEODIAG_TEST_TMP) / "cli";

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Result run(const std::string& args) {
    fs::create_directories(kRoot);
    const fs::path out = kRoot / "stdout.txt";
    const fs::path err = kRoot / "stderr.txt";
    const std::string cmd = std::string(GEODIAG_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh(const std::string& name) {
    const fs::path p = kRoot / name;
    fs::remove_all(p);
    return p;
}

json load(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

// Small sphere bundle shared by several tests.
fs::path spheres() {
    static const fs::path dir = [] {
        const fs::path d = fresh("spheres");
        const auto r = run("gen spheres --dim 3 --radius 0.5 --ambient 40 --classes 3 --points 20 --seed 1 --out " + d.string());
        EXPECT_EQ(r.code, 0) << r.err;
        return d;
    }();
    return dir;
}

} // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("gen spheres --dim 2").code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("markers --bundle x --out y --whiten pca").code, 2);
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("--version").code, 0);
}

TEST(Cli, AnalysisErrorsExitOne) {
    const auto r = run("markers --bundle " + (kRoot / "does-not-exist").string() + " --out " + (kRoot / "x.json").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("missing file"), std::string::npos) << r.err;
    const auto g = run("gen spheres --dim 5 --ambient 8 --out " + fresh("tight").string());
    EXPECT_EQ(g.code, 1);
    EXPECT_NE(g.err.find("not orthogonalizable"), std::string::npos) << g.err;
}

TEST(Cli, GenSpheresWritesValidBundleAndManifest) {
    const auto d = fresh("gen5");
    const auto r = run("gen spheres --dim 5 --radius 0.5 --ambient 200 --classes 2 --points 50 --seed 1 --out " + d.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto b = geodiag::read_bundle(d);
    EXPECT_EQ(b.num_samples(), 100);
    EXPECT_EQ(b.feature_dim(), 200);
    const auto m = load(d / "manifest.json");
    EXPECT_EQ(m["subcommand"], "gen spheres");
    EXPECT_TRUE(m.contains("duration_seconds"));
    EXPECT_TRUE(m.contains("version"));
    EXPECT_EQ(m["config"]["dim"], 5);
}

TEST(Cli, GenPlantedWritesPair) {
    const auto d = fresh("planted");
    const auto r = run("gen planted --compression 0.8 --seed 3 --out " + d.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto id = geodiag::read_bundle(d / "id");
    const auto ood = geodiag::read_bundle(d / "ood");
    EXPECT_EQ(id.feature_dim(), ood.feature_dim());
    EXPECT_TRUE(fs::exists(d / "manifest.json"));
}

TEST(Cli, MarkersSelectionAndFullCatalogue) {
    const auto out = kRoot / "sel.json";
    auto r = run("markers --bundle " + spheres().string() + " --markers d_eff,psi_eff --reps 3 --n-dirs 20 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = load(out);
    EXPECT_EQ(j["markers"].size(), 2u);
    EXPECT_TRUE(j["markers"]["d_eff"].contains("stderr"));
    EXPECT_TRUE(fs::exists(out.string() + ".manifest.json"));

    const auto full = kRoot / "full.json";
    r = run("markers --bundle " + spheres().string() + " --reps 2 --n-dirs 10 --out " + full.string());
    ASSERT_EQ(r.code, 0) << r.err;
    j = load(full);
    for (const char* n : {"sparsity", "mean_angle_per_class", "participation_ratio", "nc1", "numerical_rank", "d_eff",
                          "r_eff", "psi_eff", "n_crit"})
        EXPECT_TRUE(j["markers"].contains(n)) << n;
    EXPECT_FALSE(j["markers"].contains("energy"));

    const auto energy = kRoot / "energy.json";
    r = run("markers --bundle " + spheres().string() + " --markers energy --out " + energy.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_TRUE(load(energy)["markers"].empty());
}

TEST(Cli, CapacityReport) {
    const auto out = kRoot / "cap.json";
    const auto r = run("capacity --bundle " + spheres().string() + " --points 20 --reps 2 --n-dirs 20 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = load(out);
    EXPECT_EQ(j["repetitions"].size(), 2u);
    EXPECT_TRUE(j["aggregate"].contains("d_eff"));
}

TEST(Cli, OracleWritesCurve) {
    const auto out = kRoot / "curve.csv";
    const auto r = run("oracle --bundle " + spheres().string() + " --pair 0,1 --trials 50 --nmax 40 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(out);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_prime,p_hat,n_trials");
    EXPECT_NE(r.out.find("n_crit"), std::string::npos);
}

TEST(Cli, ProbeReport) {
    const auto out = kRoot / "probe.json";
    const auto r = run("probe --train " + spheres().string() + " --test-fraction 0.25 --epochs 5 --repeats 2 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = load(out);
    EXPECT_EQ(j["per_seed"].size(), 2u);
    EXPECT_TRUE(j.contains("test_acc"));
    EXPECT_EQ(j["config"]["weight_decay"], 0.0);
}

TEST(Cli, PredictAndCorrelate) {
    const auto a = kRoot / "a.json";
    const auto b = kRoot / "b.json";
    std::ofstream(a) << R"({"markers": {"d_eff": {"value": 10, "stderr": 0.1}, "psi_eff": {"value": 0.5, "stderr": 0.01}}})";
    std::ofstream(b) << R"({"markers": {"d_eff": {"value": 8, "stderr": 0.1}, "psi_eff": {"value": 0.4, "stderr": 0.01}}})";
    auto r = run("predict --a " + a.string() + " --b " + b.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "verdict A");
    r = run("predict --a " + b.string() + " --b " + a.string() + " --out " + (kRoot / "v.json").string());
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "verdict B");
    EXPECT_EQ(load(kRoot / "v.json")["outcome"], "B");

    std::string runs;
    for (int i = 0; i < 4; ++i) {
        const auto p = kRoot / ("run" + std::to_string(i) + ".json");
        json rec{{"run_id", "r" + std::to_string(i)},
                 {"markers", {{"markers", {{"d_eff", {{"value", 1.0 + i}}}}}}},
                 {"ood_accuracies", {{"ood", 0.1 * i + 0.01 * (i % 2)}}}};
        std::ofstream(p) << rec.dump();
        runs += " " + p.string();
    }
    const auto table = kRoot / "table.csv";
    r = run("correlate --runs" + runs + " --out " + table.string() + " --heatmap " + (kRoot / "heat.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(table);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "marker,setting,r,p,stars,n");
    EXPECT_NE(csv.find("d_eff,ood,"), std::string::npos);
    EXPECT_TRUE(fs::exists(table.string() + ".manifest.json"));
}

TEST(Cli, JobsDoNotChangeOutputs) {
    const auto one = kRoot / "j1.json";
    const auto four = kRoot / "j4.json";
    const std::string base = "markers --bundle " + spheres().string() + " --subsample --reps 4 --points 10 --n-dirs 20 --seed 5";
    ASSERT_EQ(run("--jobs 1 " + base + " --out " + one.string()).code, 0);
    ASSERT_EQ(run("--jobs 4 " + base + " --out " + four.string()).code, 0);
    EXPECT_EQ(slurp(one), slurp(four));
}
