#include "shearlab/runner.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shearlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("shearlab_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

RunRequest request(const std::string& sub, const std::string& ini, const fs::path& out) {
    RunRequest r;
    r.subcommand = sub;
    r.config = Config::parse(ini, "test.ini");
    r.out_dir = out.string();
    return r;
}

int quiet_run(const RunRequest& r, std::string* err_text = nullptr) {
    std::ostringstream log, err;
    const int code = run(r, log, err);
    if (err_text) *err_text = err.str();
    return code;
}

const char* kSin = "[profile]\nfamily = \"poly-crit\"\nN = 1\n";

} // namespace

TEST(ConfigParse, TypedAccess) {
    auto c = Config::parse("[profile]\nfamily = \"poly-crit\"\nN = 2\n[run]\nnu = 1e-3, 1e-4 1e-5\nflag = yes\n");
    EXPECT_EQ(c.get_string("profile.family"), "poly-crit");
    EXPECT_EQ(c.get_int("profile.N"), 2);
    EXPECT_EQ(c.get_list("run.nu"), (std::vector<double>{1e-3, 1e-4, 1e-5}));
    EXPECT_TRUE(c.get_bool("run.flag", false));
    EXPECT_DOUBLE_EQ(c.get_double("run.missing", 4.5), 4.5);
    EXPECT_EQ(profile_from_config(c).family(), Family::poly_crit);
}

TEST(ConfigParse, LineDiagnostics) {
    auto c = Config::parse("[profile]\nfamily = triangle\n\n[run]\nnu = 1e-3, oops\n", "exp.ini");
    try {
        c.get_list("run.nu");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("exp.ini:5"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("run.nu"), std::string::npos);
    }
    EXPECT_THROW(Config::parse("[profile\nfamily = x\n"), ConfigError);
    auto bad = Config::parse("[profile]\nfamily = wobbly\n", "f.ini");
    try {
        profile_from_config(bad);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("f.ini:2"), std::string::npos) << e.what();
    }
}

TEST(ConfigParse, OverridesAndCanonicalForm) {
    auto a = Config::parse("[run]\nseed = 3\nnu = 1e-3\n[profile]\nfamily = triangle\n");
    auto b = Config::parse("[profile]\nfamily = \"triangle\"\n[run]\nnu = 1e-3\nseed = 3\n");
    EXPECT_EQ(a.canonical(), b.canonical());
    b.set_override("run.seed=4");
    EXPECT_NE(a.canonical(), b.canonical());
    EXPECT_EQ(b.get_int("run.seed"), 4);
    EXPECT_THROW(b.set_override("seed=4"), ConfigError);
    EXPECT_THROW(b.set_override("run.seed"), ConfigError);
    EXPECT_EQ(Config::parse(a.to_ini()).canonical(), a.canonical());
}

TEST(Cli, TimescalePassthrough) {
    const auto out = scratch("timescale");
    auto r = request("timescale", std::string(kSin) + "[run]\nnu = 1e-4\n[timescale]\npoints = 32\n", out);
    ASSERT_EQ(quiet_run(r), 0);
    const auto rows = read_csv(out / "timescale_nu0.0001.csv");
    const auto prof = make_profile(Family::poly_crit, {{"N", 1}});
    const auto tab = timescale_table(prof, 1e-4, uniform_grid(prof, 32));
    ASSERT_EQ(rows.size(), tab.grid.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][0], tab.grid[i]);
        EXPECT_EQ(rows[i][1], tab.t_local[i]);
        EXPECT_EQ(rows[i][4], tab.rate_mod[i]);
        EXPECT_EQ(rows[i][6], tab.T_global);
    }
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Cli, RatefitTriangle) {
    const auto out = scratch("ratefit");
    auto r = request("ratefit", "[profile]\nfamily = triangle\n[run]\nnu = 1e-3, 1e-4, 1e-5\n", out);
    ASSERT_EQ(quiet_run(r), 0);
    const auto j = read_json(out / "ratefit.json");
    EXPECT_GE(j["gamma_fit"].get<double>(), 0.28);
    EXPECT_LE(j["gamma_fit"].get<double>(), 0.39);
    EXPECT_DOUBLE_EQ(j["gamma_pred"].get<double>(), 1.0 / 3);
    EXPECT_EQ(j["rates"].size(), 3u);
}

TEST(Cli, MissingFamilyNamesKey) {
    const auto out = scratch("missing");
    auto r = request("timescale", "[profile]\nN = 1\n[run]\nnu = 1e-4\n", out);
    std::string err;
    EXPECT_EQ(quiet_run(r, &err), ConfigError("x").code());
    EXPECT_NE(err.find("profile.family"), std::string::npos) << err;
    EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST(Cli, StochasticCommandsNeedSeed) {
    const auto out = scratch("noseed");
    auto r = request("couple", std::string(kSin) + "[run]\nnu = 1e-3\n[coupling]\ny0 = 0.25\nn_trials = 4\n", out);
    std::string err;
    EXPECT_NE(quiet_run(r, &err), 0);
    EXPECT_NE(err.find("seed"), std::string::npos) << err;
}

TEST(Cli, ModuleErrorsGiveTheirExitCode) {
    const auto out = scratch("moderr");
    auto r = request("couple", "[profile]\nfamily = triangle\n[run]\nnu = 1e-3\nseed = 1\n[coupling]\ny0 = 0.2\ndt = 10\n", out);
    EXPECT_EQ(quiet_run(r), ResolutionError("x").code());
    r.subcommand = "frobnicate";
    EXPECT_NE(quiet_run(r), 0);
}

TEST(Cli, BitIdenticalReruns) {
    const std::string ini = std::string(kSin) + "[run]\nnu = 1e-3\nseed = 21\n[mc]\nn_paths = 2000\ny0 = 0.25\n"
                                                "[coupling]\nn_trials = 50\ny0 = 0.25\n";
    for (const std::string sub : {"mc", "couple"}) {
        const auto a = scratch(sub + "_a"), b = scratch(sub + "_b");
        ASSERT_EQ(quiet_run(request(sub, ini, a)), 0);
        ASSERT_EQ(quiet_run(request(sub, ini, b)), 0);
        int compared = 0;
        for (const auto& e : fs::directory_iterator(a)) {
            EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
            ++compared;
        }
        EXPECT_GE(compared, 2);
    }
}

TEST(Cli, ManifestRoundTrip) {
    const auto a = scratch("manifest_a"), b = scratch("manifest_b");
    auto r = request("couple", "[profile]\nfamily = triangle\n[run]\nnu = 1e-3\nseed = 5\n[coupling]\ny0 = 0.2\nn_trials = 40\n",
                     a);
    r.config.set_override("coupling.gap=0.2");
    r.overrides.push_back("coupling.gap=0.2");
    ASSERT_EQ(quiet_run(r), 0);
    const auto m = read_json(a / "manifest.json");
    EXPECT_EQ(m["subcommand"], "couple");
    EXPECT_EQ(m["seed"].get<long>(), 5);
    EXPECT_EQ(m["config_hash"], hex64(fnv1a(r.config.canonical())));
    EXPECT_TRUE(m["versions"].contains("fftw"));

    auto replay = request_from_manifest(a / "manifest.json");
    replay.out_dir = b.string();
    EXPECT_DOUBLE_EQ(replay.config.get_double("coupling.gap"), 0.2);
    ASSERT_EQ(quiet_run(replay), 0);
    for (const auto& art : m["artifacts"]) {
        const auto f = art["file"].get<std::string>();
        EXPECT_EQ(hex64(fnv1a(slurp(b / f))), art["fnv1a"].get<std::string>()) << f;
    }
    EXPECT_EQ(read_json(b / "manifest.json")["config_hash"], m["config_hash"]);
}

TEST(Cli, OutputDirectoryPrecedence) {
    const auto env_dir = scratch("env"), cfg_dir = scratch("cfg");
    const std::string ini = std::string(kSin) + "[run]\nnu = 1e-3\n[timescale]\npoints = 8\n";
    ::setenv(kOutputEnv, env_dir.string().c_str(), 1);
    auto r = request("timescale", ini, "");
    ASSERT_EQ(quiet_run(r), 0);
    EXPECT_TRUE(fs::exists(env_dir / "manifest.json"));
    r.config.set("run.output", cfg_dir.string());
    ASSERT_EQ(quiet_run(r), 0);
    EXPECT_TRUE(fs::exists(cfg_dir / "manifest.json"));
    ::unsetenv(kOutputEnv);
}

TEST(Cli, TvCheckReportsExactSuite) {
    const auto out = scratch("tv");
    auto r = request("tv-check", "[run]\nseed = 2\n[tv]\ninstances = 20\nheat_paths = 20000\n", out);
    ASSERT_EQ(quiet_run(r), 0);
    const auto j = read_json(out / "tv_check.json");
    EXPECT_EQ(j["exact"]["contraction_failures"].get<int>(), 0);
    EXPECT_LT(j["exact"]["fiber_max_err"].get<double>(), 1e-12);
    for (const auto& h : j["heat_mass"]) EXPECT_TRUE(h["holds"].get<bool>());
}
