#pragma once

// INI experiment configs. Keys are addressed as "section.key"; values may be
// quoted. A pre-scan records the line of every key so errors can point at it.

#include "shearlab/errors.hpp"
#include "shearlab/profiles.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace shearlab {

class Config {
public:
    static Config parse(const std::string& text, const std::string& source = "<config>") {
        Config c;
        c.source_ = source;
        std::istringstream is(text);
        try {
            boost::property_tree::ini_parser::read_ini(is, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
        }
        std::istringstream scan(text);
        std::string line, section;
        for (int n = 1; std::getline(scan, line); ++n) {
            const auto s = trim(line);
            if (s.empty() || s[0] == ';' || s[0] == '#') continue;
            if (s.front() == '[') {
                section = trim(s.substr(1, s.find(']') - 1));
                continue;
            }
            const auto eq = s.find('=');
            if (eq != std::string::npos) c.lines_[section + "." + trim(s.substr(0, eq))] = n;
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file " + path.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse(ss.str(), path.string());
    }

    /// Applies "section.key=value".
    void set_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not section.key=value");
        const auto key = trim(assignment.substr(0, eq));
        if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs a section");
        set(key, trim(assignment.substr(eq + 1)));
    }

    void set(const std::string& key, const std::string& value) {
        tree_.put(boost::property_tree::ptree::path_type(key, '.'), value);
        lines_.erase(key);
    }

    bool has(const std::string& key) const { return raw(key).has_value(); }

    std::string get_string(const std::string& key) const {
        auto v = raw(key);
        if (!v) throw ConfigError(source_ + ": missing required key '" + key + "'");
        return *v;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto v = raw(key);
        return v ? *v : fallback;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const {
        const double v = get_double(key);
        if (v != std::floor(v)) throw ConfigError(where(key) + "'" + key + "' must be an integer");
        return static_cast<long>(v);
    }
    long get_int(const std::string& key, long fallback) const { return has(key) ? get_int(key) : fallback; }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        auto s = get_string(key);
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
        if (s == "0" || s == "false" || s == "no" || s == "off") return false;
        throw ConfigError(where(key) + "'" + key + "' must be a boolean, got '" + s + "'");
    }

    /// Comma- or whitespace-separated numbers.
    std::vector<double> get_list(const std::string& key) const {
        std::string s = get_string(key);
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream is(s);
        std::vector<double> out;
        std::string tok;
        while (is >> tok) out.push_back(to_double(key, tok));
        if (out.empty()) throw ConfigError(where(key) + "'" + key + "' is empty");
        return out;
    }
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const {
        return has(key) ? get_list(key) : fallback;
    }

    /// Keys of a section in file order.
    std::vector<std::string> keys(const std::string& section) const {
        std::vector<std::string> out;
        auto child = tree_.get_child_optional(section);
        if (child)
            for (const auto& kv : *child) out.push_back(kv.first);
        return out;
    }

    /// Sorted "section.key = value" lines; the hash input of a manifest.
    std::string canonical() const {
        std::map<std::string, std::string> flat;
        for (const auto& sec : tree_)
            for (const auto& kv : sec.second) flat[sec.first + "." + kv.first] = unquote(kv.second.data());
        std::string out;
        for (const auto& [k, v] : flat) out += k + " = " + v + "\n";
        return out;
    }

    /// INI text equivalent to this config (sections and keys sorted).
    std::string to_ini() const {
        std::map<std::string, std::map<std::string, std::string>> s;
        for (const auto& sec : tree_)
            for (const auto& kv : sec.second) s[sec.first][kv.first] = unquote(kv.second.data());
        std::string out;
        for (const auto& [name, kv] : s) {
            out += "[" + name + "]\n";
            for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
            out += "\n";
        }
        return out;
    }

    const std::string& source() const { return source_; }

    std::string where(const std::string& key) const {
        auto it = lines_.find(key);
        return source_ + (it != lines_.end() ? ":" + std::to_string(it->second) : "") + ": ";
    }

private:
    boost::property_tree::ptree tree_;
    std::map<std::string, int> lines_;
    std::string source_;

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static std::string unquote(const std::string& s) {
        auto t = trim(s);
        if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) t = t.substr(1, t.size() - 2);
        return t;
    }

    std::optional<std::string> raw(const std::string& key) const {
        auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return unquote(*v);
    }

    double to_double(const std::string& key, const std::string& s) const {
        double v = 0.0;
        const auto* end = s.data() + s.size();
        auto [p, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc() || p != end) throw ConfigError(where(key) + "'" + key + "' is not a number: '" + s + "'");
        return v;
    }
};

/// [profile] section: family (required), optional domain, numeric parameters;
/// custom-table takes `table` (list of samples).
inline ShearProfile profile_from_config(const Config& c) {
    const auto fam_name = c.get_string("profile.family");
    Family fam;
    try {
        fam = family_from_string(fam_name);
    } catch (const UnsupportedFamily& e) {
        throw ConfigError(c.where("profile.family") + e.what());
    }
    std::optional<DomainKind> dom;
    if (c.has("profile.domain")) dom = domain_from_string(c.get_string("profile.domain"));
    if (fam == Family::custom_table) return make_custom_table(c.get_list("profile.table"), dom.value_or(DomainKind::torus));
    ProfileParams params;
    for (const auto& k : c.keys("profile")) {
        if (k == "family" || k == "domain") continue;
        params[k] = c.get_double("profile." + k);
    }
    return make_profile(fam, params, dom);
}

/// Short descriptor such as "poly-crit(N=1)".
inline std::string profile_label(const ShearProfile& p) {
    std::string s = to_string(p.family());
    if (!p.params().empty()) {
        s += "(";
        bool first = true;
        for (const auto& [k, v] : p.params()) {
            std::ostringstream os;
            os << (first ? "" : ",") << k << "=" << v;
            s += os.str();
            first = false;
        }
        s += ")";
    }
    return s;
}

} // namespace shearlab
