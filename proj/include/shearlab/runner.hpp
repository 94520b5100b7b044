#pragma once

// Config-driven subcommands behind the `shearlab` executable.

#include "shearlab/calibration.hpp"
#include "shearlab/config.hpp"
#include "shearlab/coupling.hpp"
#include "shearlab/experiments.hpp"
#include "shearlab/io.hpp"
#include "shearlab/measures.hpp"
#include "shearlab/parallel.hpp"
#include "shearlab/pde.hpp"
#include "shearlab/sde.hpp"
#include "shearlab/timescales.hpp"

#include <boost/version.hpp>
#include <fftw3.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace shearlab {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputEnv = "SHEARLAB_OUTPUT_DIR";

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"timescale", "evolve",      "mc",          "couple",  "ratefit",
                                               "tv-check",  "escape",      "local-rates", "baseline"};
    return s;
}

struct RunRequest {
    std::string subcommand;
    Config config;
    std::vector<std::string> overrides; ///< already applied to config; kept for the manifest
    std::string out_dir;                ///< empty: config [run] output, then $SHEARLAB_OUTPUT_DIR, then ./shearlab_out
    unsigned threads = 0;
};

namespace detail {

/// run.seed, or mc.seed as a fallback; empty when neither is set.
inline std::string seed_key(const Config& c) {
    if (c.has("run.seed")) return "run.seed";
    if (c.has("mc.seed")) return "mc.seed";
    return "";
}

struct Context {
    const Config& cfg;
    std::filesystem::path out;
    std::ostream& log;
    std::vector<std::string> artifacts;

    std::filesystem::path file(const std::string& name) {
        artifacts.push_back(name);
        return out / name;
    }
    std::uint64_t seed() const {
        const std::string key = seed_key(cfg);
        if (key.empty()) throw ConfigError(cfg.source() + ": missing required key 'run.seed'");
        const long s = cfg.get_int(key);
        if (s < 0) throw ConfigError(cfg.where(key) + "'" + key + "' must be >= 0");
        return static_cast<std::uint64_t>(s);
    }
    std::vector<double> nus() const {
        auto v = cfg.get_list("run.nu");
        for (double nu : v)
            if (!(nu > 0.0)) throw ConfigError(cfg.where("run.nu") + "'run.nu' entries must be > 0");
        return v;
    }
};

inline std::string nu_tag(double nu) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", nu);
    return buf;
}

inline RateRunOptions rate_options(const Config& c) {
    RateRunOptions o;
    o.K = static_cast<int>(c.get_int("solver.K", 1));
    o.M = static_cast<int>(c.get_int("solver.M", 0));
    o.dt = c.get_double("solver.dt", 0.0);
    o.t_max = c.get_double("solver.t_end", 0.0);
    o.t_max_mult = c.get_double("solver.t_max_mult", o.t_max_mult);
    o.records_per_T = static_cast<int>(c.get_int("solver.records_per_T", o.records_per_T));
    o.centre_layer = c.get_double("solver.centre_layer", 0.0);
    o.window.upper = c.get_double("fit.upper", o.window.upper);
    o.window.lower = c.get_double("fit.lower", o.window.lower);
    if (c.has("solver.probe_y")) o.probe_y = c.get_list("solver.probe_y");
    return o;
}

inline void cmd_timescale(Context& ctx) {
    const auto prof = profile_from_config(ctx.cfg);
    const auto grid = uniform_grid(prof, static_cast<int>(ctx.cfg.get_int("timescale.points", 64)));
    for (double nu : ctx.nus()) {
        const auto tab = timescale_table(prof, nu, grid);
        write_timescale_csv(ctx.file("timescale_nu" + nu_tag(nu) + ".csv"), tab);
        ctx.log << "nu=" << fmt(nu) << " T_global=" << fmt(tab.T_global) << " lambda_min=" << fmt(tab.lambda_min) << "\n";
    }
}

inline void cmd_evolve(Context& ctx) {
    const auto prof = profile_from_config(ctx.cfg);
    const auto& c = ctx.cfg;
    for (double nu : ctx.nus()) {
        auto opt = rate_options(c);
        const std::string tag = "_nu" + nu_tag(nu);
        const double T = detail::global_T(prof, nu);
        const double t_end = opt.t_max > 0.0 ? opt.t_max : c.get_double("solver.t_end_mult", 10.0) * T;
        if (!is_radial(prof.kind())) {
            const int M = opt.M > 0 ? opt.M : recommended_M(prof, nu, opt.min_points);
            const auto lim = torus_step_limits(prof, nu, opt.K, M, false);
            const double dt = opt.dt > 0.0 ? opt.dt : opt.dt_safety * std::min(lim.advection, lim.diffusion);
            TorusField f0 = c.get_string("solver.initial", "mode") == "random"
                                ? TorusField::random(opt.K, M, ctx.seed())
                                : TorusField::single_mode(opt.K, M, [](double) { return cplx(0.5, 0.0); });
            TorusOptions o;
            o.t_end = t_end;
            o.dt = dt;
            o.record_every = static_cast<int>(c.get_int("solver.record_every", steps_between(T / opt.records_per_T, dt)));
            o.probe_y = opt.probe_y;
            const auto run = evolve_torus(prof, nu, f0, o);
            write_decay_csv(ctx.file("decay" + tag + ".csv"), run.l2, run.linf);
            write_linf_y_csv(ctx.file("linf_y" + tag + ".csv"), run.field);
            if (!run.probes.empty()) write_probe_csv(ctx.file("probes" + tag + ".csv"), run.probe_y, run.probes);
            write_snapshot((ctx.file("final" + tag + ".snap")).string(), run.field, nu);
            ctx.log << "nu=" << fmt(nu) << " M=" << M << " dt=" << fmt(dt) << " t_end=" << fmt(run.field.t)
                    << " l2_ratio=" << fmt(run.l2.values.back() / run.l2.values.front()) << "\n";
        } else {
            int P = opt.M;
            if (P <= 0) {
                P = opt.min_points;
                const double ell = min_ell(prof, nu);
                while (std::isfinite(ell) && P < opt.disk_cells_per_ell / ell) P *= 2;
            }
            RateRunOptions ro = opt;
            ro.M = P;
            ro.t_max = t_end;
            ro.window = {1.0, 1e-300}; // never stop early
            const auto run = measure_disk_rate(prof, nu, ro);
            write_decay_csv(ctx.file("decay" + tag + ".csv"), run.curve, run.curve);
            ctx.log << "nu=" << fmt(nu) << " P=" << P << " dt=" << fmt(run.dt)
                    << " l2_ratio=" << fmt(run.curve.values.back() / run.curve.values.front()) << "\n";
        }
    }
}

inline void cmd_mc(Context& ctx) {
    const auto prof = profile_from_config(ctx.cfg);
    const auto& c = ctx.cfg;
    const auto seed = ctx.seed();
    const auto n = static_cast<std::size_t>(c.get_int("mc.n_paths", 10000));
    const int records = static_cast<int>(c.get_int("mc.records", 20));
    json summary = json::array();
    for (double nu : ctx.nus()) {
        const double T = detail::global_T(prof, nu);
        const double t_end = c.get_double("mc.t_end", T);
        const double dt = c.get_double("mc.dt", t_end / 400.0);
        const std::string tag = "_nu" + nu_tag(nu);
        TrajectoryEnsemble e;
        json row{{"nu", nu}, {"t_end", t_end}, {"dt", dt}, {"paths", n}};
        if (!is_radial(prof.kind())) {
            e = simulate_torus(prof, nu, c.get_double("mc.x0", 0.0), c.get_double("mc.y0", 0.0), t_end, dt, n, seed, records);
            const auto diag = variance_diagnostic(e, minimal_differential(prof));
            write_variance_csv(ctx.file("variance" + tag + ".csv"), diag);
            const auto fk = feynman_kac(e, [](double x, double) { return std::cos(2.0 * std::numbers::pi * x); });
            row["fk_cos2pix"] = fk.value;
            row["fk_se"] = fk.se;
        } else {
            const bool reflect = c.get_bool("mc.reflect", prof.kind() == DomainKind::radial_disk);
            e = simulate_radial(prof, nu, c.get_double("mc.r0", 0.5), c.get_double("mc.theta0", 0.0), t_end, dt, n, seed,
                                reflect, records);
            const auto fk = feynman_kac(e, [](double th, double r) { return r * std::cos(th); });
            row["fk_rcos"] = fk.value;
            row["fk_se"] = fk.se;
        }
        write_ensemble_csv(ctx.file("ensemble" + tag + ".csv"), e);
        summary.push_back(row);
        ctx.log << row.dump() << "\n";
    }
    write_json(ctx.file("mc_summary.json"), summary);
}

inline void cmd_couple(Context& ctx) {
    const auto prof = profile_from_config(ctx.cfg);
    const auto& c = ctx.cfg;
    const auto seed = ctx.seed();
    const auto trials = static_cast<std::size_t>(c.get_int("coupling.n_trials", 1000));
    CouplingOptions o;
    o.dt = c.get_double("coupling.dt", 0.0);
    o.cap_mult = c.get_double("coupling.cap", o.cap_mult);
    o.delta = c.get_double("coupling.delta", o.delta);
    o.reflect = c.get_bool("coupling.reflect", prof.kind() == DomainKind::radial_disk);
    const double gap = c.get_double("coupling.gap", 0.1);
    json summary = json::array();
    for (double nu : ctx.nus()) {
        CouplingBatch b;
        if (!is_radial(prof.kind())) {
            const double x0 = c.get_double("coupling.x0", 0.0);
            b = couple_torus_batch(prof, nu, x0, x0 + gap, c.get_double("coupling.y0"), trials, seed, o);
        } else {
            const double th = c.get_double("coupling.theta0", 0.0);
            b = couple_radial_batch(prof, nu, c.get_double("coupling.r0"), th, th + gap, trials, seed, o);
        }
        write_outcomes_csv(ctx.file("outcomes_nu" + nu_tag(nu) + ".csv"), b.outcomes);
        json row{{"nu", nu}};
        row.update(batch_summary_json(b));
        if (b.fraction.value > 0.0) row["certificate"] = girsanov_certificate(b.fraction.value, b.max_cost);
        summary.push_back(row);
        ctx.log << row.dump() << "\n";
    }
    write_json(ctx.file("coupling_summary.json"), summary);
}

inline void cmd_ratefit(Context& ctx) {
    const auto prof = profile_from_config(ctx.cfg);
    const auto nus = ctx.nus();
    const auto s = exponent_study(prof, nus, rate_options(ctx.cfg));
    for (const auto& r : s.runs) {
        CsvWriter w(ctx.file("decay_nu" + nu_tag(r.nu) + ".csv"), {"t", "l2"});
        for (std::size_t i = 0; i < r.curve.size(); ++i) w.row({r.curve.times[i], r.curve.values[i]});
    }
    auto j = ratefit_json(profile_label(prof), s);
    if (prof.family() == Family::flat_crit && s.fit.nus.size() >= 4) {
        const auto lc = logcorrection_check(s.fit.nus, s.fit.rates, prof.param("p"));
        j["logcorrection"] = {{"ratio", lc.ratio},
                              {"slope", lc.slope},
                              {"expected", lc.expected},
                              {"ratio_increasing", lc.ratio_increasing},
                              {"damped_decreasing", lc.damped_decreasing}};
    }
    write_json(ctx.file("ratefit.json"), j);
    ctx.log << "gamma_fit=" << fmt(s.fit.gamma) << " gamma_pred=" << fmt(s.predicted.gamma) << "\n";
}

inline void cmd_tv_check(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto seed = ctx.seed();
    json j;
    const auto suite = exact_tv_suite(static_cast<int>(c.get_int("tv.instances", 200)), seed);
    j["exact"] = {{"instances", suite.instances},
                  {"fiber_max_err", suite.fiber_max_err},
                  {"contraction_failures", suite.contraction_failures},
                  {"coupling_max_err", suite.coupling_max_err}};
    json toy = json::array();
    for (double gap : c.get_list("tv.toy_gaps", {0.1, 0.5, 1.0, 2.0, 4.0}))
        for (double T : c.get_list("tv.toy_T", {0.25, 4.0})) {
            GaussianToy g{gap, T};
            toy.push_back({{"gap", gap}, {"T", T}, {"tv", g.tv()}, {"certificate", g.certificate()}});
        }
    j["gaussian_toy"] = toy;
    json heat = json::array();
    const double nu = c.get_double("tv.heat_nu", 1e-3), t = c.get_double("tv.heat_t", 1.0);
    const auto paths = static_cast<std::size_t>(c.get_int("tv.heat_paths", 1000000));
    for (double R : c.get_list("tv.heat_R", {2.0, 3.0, 4.0})) {
        const auto h = heat_mass_bound_check(nu, t, 0.5, R, paths, seed);
        heat.push_back({{"R", R}, {"estimate", h.estimate.value}, {"se", h.estimate.se}, {"bound", h.bound}, {"holds", h.holds}});
    }
    j["heat_mass"] = heat;
    write_json(ctx.file("tv_check.json"), j);
    ctx.log << j["exact"].dump() << "\n";
}

inline void cmd_escape(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto seed = ctx.seed();
    const double nu = ctx.nus().front();
    const auto n = static_cast<std::size_t>(c.get_int("escape.n_paths", 20000));
    const double C = c.get_double("escape.C", 2.0), r0 = c.get_double("escape.r0", 1.0);
    CsvWriter w(ctx.file("escape.csv"), {"ell", "probability", "se", "T"});
    CsvWriter h(ctx.file("hitting.csv"), {"ell", "psi_bvp", "mc_mean", "mc_se"});
    for (double ell : c.get_list("escape.ell", {0.05, 0.1})) {
        const auto e = boundary_escape_test(nu, ell, n, seed, C, r0);
        w.row({ell, e.probability.value, e.probability.se, e.T});
        const auto hc = hitting_time_check(nu, ell, static_cast<int>(c.get_int("escape.P", 256)), r0,
                                           static_cast<std::size_t>(c.get_int("escape.hitting_paths", 20000)), seed);
        h.row({ell, hc.psi_r0, hc.mc.value, hc.mc.se});
        ctx.log << "ell=" << fmt(ell) << " escape=" << fmt(e.probability.value) << " psi=" << fmt(hc.psi_r0)
                << " mc=" << fmt(hc.mc.value) << "\n";
    }
}

inline void cmd_local_rates(Context& ctx) {
    const auto prof = profile_from_config(ctx.cfg);
    if (is_radial(prof.kind())) throw InvalidParams("local-rates runs on torus profiles");
    const auto& c = ctx.cfg;
    for (double nu : ctx.nus()) {
        auto o = rate_options(c);
        if (o.probe_y.empty()) o.probe_y = uniform_grid(prof, static_cast<int>(c.get_int("solver.probe_points", 16)));
        o.t_max_mult = c.get_double("solver.t_max_mult", 100.0);
        o.records_per_T = static_cast<int>(c.get_int("solver.records_per_T", 200));
        const auto run = measure_torus_rate(prof, nu, o);
        std::optional<TimescaleTable> tab;
        if (prof.family() != Family::constant) {
            try {
                tab = timescale_table(prof, nu, run.probe_y);
            } catch (const Error&) {
                tab.reset(); // predictions left blank where the table is undefined
            }
        }
        const auto rep = local_rate_profile(run.probe_y, run.probes, tab ? &*tab : nullptr, c.get_double("solver.floor", 0.1),
                                            o.window);
        write_local_rates_csv(ctx.file("local_rates_nu" + nu_tag(nu) + ".csv"), rep);
        ctx.log << "nu=" << fmt(nu) << " not_reached=" << rep.not_reached << " flagged=" << rep.flagged << "\n";
    }
}

inline void cmd_baseline(Context& ctx) {
    const auto& c = ctx.cfg;
    CalibrationSettings s;
    s.trials = static_cast<std::size_t>(c.get_int("baseline.trials", static_cast<long>(s.trials)));
    s.escape_paths = static_cast<std::size_t>(c.get_int("baseline.escape_paths", static_cast<long>(s.escape_paths)));
    s.se_margin = c.get_double("baseline.se_margin", s.se_margin);
    const auto seed = seed_key(c).empty() ? kBaselineSeed : ctx.seed();
    const auto doc = calibrate_floors(s, seed);
    write_json(ctx.file("floors.json"), doc);
    if (c.has("baseline.floors")) {
        const std::filesystem::path dest = c.get_string("baseline.floors");
        if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
        write_json(dest, doc);
        ctx.log << "floors written to " << dest.string() << "\n";
    }
    ctx.log << doc.dump() << "\n";
}

inline std::filesystem::path output_dir(const RunRequest& req) {
    if (!req.out_dir.empty()) return req.out_dir;
    if (req.config.has("run.output")) return req.config.get_string("run.output");
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return "shearlab_out";
}

inline json versions() {
    return json{{"shearlab", kVersion}, {"compiler", __VERSION__}, {"fftw", std::string(fftw_version)},
                {"boost", BOOST_LIB_VERSION}, {"cxx", __cplusplus}};
}

} // namespace detail

/// Runs one subcommand, writes its artifacts plus manifest.json into the
/// output directory, and returns the process exit status.
inline int run(const RunRequest& req, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        if (req.threads > 0) set_threads(req.threads);
        const auto out = detail::output_dir(req);
        std::filesystem::create_directories(out);
        detail::Context ctx{req.config, out, log, {}};
        const auto& s = req.subcommand;
        if (s == "timescale") detail::cmd_timescale(ctx);
        else if (s == "evolve") detail::cmd_evolve(ctx);
        else if (s == "mc") detail::cmd_mc(ctx);
        else if (s == "couple") detail::cmd_couple(ctx);
        else if (s == "ratefit") detail::cmd_ratefit(ctx);
        else if (s == "tv-check") detail::cmd_tv_check(ctx);
        else if (s == "escape") detail::cmd_escape(ctx);
        else if (s == "local-rates") detail::cmd_local_rates(ctx);
        else if (s == "baseline") detail::cmd_baseline(ctx);
        else throw ConfigError("unknown subcommand '" + s + "'");

        json m;
        m["subcommand"] = s;
        m["config_hash"] = hex64(fnv1a(req.config.canonical()));
        const auto sk = detail::seed_key(req.config);
        m["seed"] = sk.empty() ? json(nullptr) : json(req.config.get_int(sk));
        m["overrides"] = req.overrides;
        m["config"] = req.config.to_ini();
        m["versions"] = detail::versions();
        json arts = json::array();
        for (const auto& a : ctx.artifacts) {
            std::ifstream is(out / a, std::ios::binary);
            std::stringstream ss;
            ss << is.rdbuf();
            arts.push_back({{"file", a}, {"fnv1a", hex64(fnv1a(ss.str()))}});
        }
        m["artifacts"] = arts;
        write_json(out / "manifest.json", m);
        return 0;
    } catch (const Error& e) {
        err << "shearlab: " << e.what() << "\n";
        return e.code();
    } catch (const std::exception& e) {
        err << "shearlab: " << e.what() << "\n";
        return 2;
    }
}

/// Rebuilds the request stored in a manifest (config with overrides applied).
inline RunRequest request_from_manifest(const std::filesystem::path& path) {
    const auto m = read_json(path);
    RunRequest r;
    try {
        r.subcommand = m.at("subcommand").get<std::string>();
        r.config = Config::parse(m.at("config").get<std::string>(), path.string());
        r.overrides = m.at("overrides").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": not a manifest (" + e.what() + ")");
    }
    return r;
}

} // namespace shearlab
