#pragma once

// CSV / JSON artifact writers.

#include "shearlab/coupling.hpp"
#include "shearlab/decay_curve.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/experiments.hpp"
#include "shearlab/sde.hpp"
#include "shearlab/timescales.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace shearlab {

using json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : os_(path) {
        if (!os_) throw InvalidParams("cannot write " + path.string());
        row_strings(header);
    }
    CsvWriter& row(const std::vector<double>& v) {
        std::vector<std::string> s;
        s.reserve(v.size());
        for (double x : v) s.push_back(fmt(x));
        return row_strings(s);
    }
    CsvWriter& row_strings(const std::vector<std::string>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << v[i];
        os_ << '\n';
        return *this;
    }

private:
    std::ofstream os_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidParams("cannot write " + path.string());
    os << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InvalidParams("cannot read " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw InvalidParams(path.string() + ": " + e.what());
    }
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Module artifacts

/// Timescale table; the global columns are repeated on every row.
inline void write_timescale_csv(const std::filesystem::path& path, const TimescaleTable& t) {
    CsvWriter w(path, {"location", "t_local", "ell_local", "rate_bar", "rate_mod", "nu", "T_global", "lambda_min"});
    for (std::size_t i = 0; i < t.grid.size(); ++i)
        w.row({t.grid[i], t.t_local[i], t.ell_local[i], t.rate_bar[i], t.rate_mod[i], t.nu, t.T_global, t.lambda_min});
}

inline void write_decay_csv(const std::filesystem::path& path, const DecayCurve& l2, const DecayCurve& linf) {
    if (l2.size() != linf.size()) throw ShapeMismatch("l2 and linf curves differ in length");
    CsvWriter w(path, {"t", "l2", "linf"});
    for (std::size_t i = 0; i < l2.size(); ++i) w.row({l2.times[i], l2.values[i], linf.values[i]});
}

inline void write_linf_y_csv(const std::filesystem::path& path, const TorusField& f) {
    CsvWriter w(path, {"y", "linf_y"});
    for (int j = 0; j < f.M; ++j) w.row({f.y(j), linf_at(f, j)});
}

inline void write_probe_csv(const std::filesystem::path& path, const std::vector<double>& ys,
                            const std::vector<DecayCurve>& probes) {
    std::vector<std::string> head{"t"};
    for (double y : ys) head.push_back("linf_y=" + fmt(y));
    CsvWriter w(path, head);
    if (probes.empty()) return;
    for (std::size_t i = 0; i < probes.front().size(); ++i) {
        std::vector<double> r{probes.front().times[i]};
        for (const auto& p : probes) r.push_back(p.values[i]);
        w.row(r);
    }
}

inline void write_ensemble_csv(const std::filesystem::path& path, const TrajectoryEnsemble& e) {
    const bool radial = e.kind != DomainKind::torus;
    CsvWriter w(path, radial ? std::vector<std::string>{"t", "mean_theta", "var_theta", "mean_r", "var_r"}
                             : std::vector<std::string>{"t", "mean_x", "var_x", "mean_y", "var_y"});
    for (std::size_t k = 0; k < e.times.size(); ++k) {
        const auto ma = moments(e.a[k]), mb = moments(e.b[k]);
        w.row({e.times[k], ma.mean, ma.var, mb.mean, mb.var});
    }
}

inline void write_variance_csv(const std::filesystem::path& path, const VarianceDiagnostic& d) {
    CsvWriter w(path, {"t", "std_x", "reference"});
    for (std::size_t i = 0; i < d.times.size(); ++i) w.row({d.times[i], d.std_x[i], d.reference[i]});
}

inline void write_outcomes_csv(const std::filesystem::path& path, const std::vector<CouplingOutcome>& out) {
    CsvWriter w(path, {"seed", "coupled", "couple_time", "cost", "tau0", "tau1", "tau2", "flags"});
    for (const auto& o : out)
        w.row_strings({std::to_string(o.seed), o.coupled ? "1" : "0", fmt(o.couple_time), fmt(o.cost), fmt(o.tau0),
                       fmt(o.tau1), fmt(o.tau2), o.flag_string()});
}

inline json batch_summary_json(const CouplingBatch& b) {
    return json{{"trials", b.outcomes.size()},    {"fraction", b.fraction.value}, {"fraction_se", b.fraction.se},
                {"max_cost", b.max_cost},          {"median_time", b.median_time}, {"t_nu", b.t_nu}};
}

inline json ratefit_json(const std::string& profile, const ExponentStudy& s) {
    json j;
    j["profile"] = profile;
    j["nu_list"] = s.fit.nus;
    j["rates"] = s.fit.rates;
    j["gamma_fit"] = s.fit.gamma;
    j["gamma_pred"] = s.predicted.gamma;
    j["residual"] = s.fit.residual;
    if (s.predicted.log_power != 0.0) j["log_power_pred"] = s.predicted.log_power;
    j["complete"] = s.complete;
    return j;
}

inline void write_local_rates_csv(const std::filesystem::path& path, const LocalRateReport& r) {
    CsvWriter w(path, {"y", "rate", "predicted", "ratio", "reached", "flagged"});
    for (const auto& e : r.entries) w.row({e.y, e.rate, e.predicted, e.ratio, e.reached ? 1.0 : 0.0, e.flagged ? 1.0 : 0.0});
}

} // namespace shearlab
