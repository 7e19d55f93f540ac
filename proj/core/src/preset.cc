// Copyright 2026 The qtransfer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qtransfer/preset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

namespace qtransfer {

namespace {

enum class Kind { Int, Real, Bool, Freq, Time, Rate, Word };

struct Unit {
    const char *suffix;
    Kind kind;
    double scale;
    bool inverse;
};

// Longest suffixes first so "_inv_us" wins over "_us".
const Unit kUnits[] = {
    {"_inv_us", Kind::Rate, 1e-6, true}, {"_inv_ns", Kind::Rate, 1e-9, true}, {"_per_s", Kind::Rate, 1.0, false},
    {"_ghz", Kind::Freq, kTwoPi * 1e9, false}, {"_mhz", Kind::Freq, kTwoPi * 1e6, false},
    {"_khz", Kind::Freq, kTwoPi * 1e3, false}, {"_hz", Kind::Freq, kTwoPi, false},
    {"_us", Kind::Time, 1e-6, false},          {"_ns", Kind::Time, 1e-9, false},
    {"_s", Kind::Time, 1.0, false},
};

const std::regex kCav("c[1-9][0-9]*p?");

bool is_cav(const std::string &s) {
    return std::regex_match(s, kCav);
}

struct KeyInfo {
    std::string base;
    Kind kind;
    double scale = 1.0;
    bool inverse = false;
};

Kind base_kind(const std::string &base) {
    static const std::map<std::string, Kind> fixed = {
        {"n", Kind::Int},
        {"m", Kind::Int},
        {"phi", Kind::Real},
        {"omega_eg", Kind::Freq},
        {"omega_fe", Kind::Freq},
        {"omega_fg", Kind::Freq},
        {"omega_c1p_shifted", Kind::Freq},
        {"omega_p", Kind::Freq},
        {"g_r", Kind::Freq},
        {"g_tilde", Kind::Freq},
        {"Omega_p", Kind::Freq},
        {"matching", Kind::Word},
        {"unwanted.enabled", Kind::Bool},
        {"unwanted.same_ratio", Kind::Real},
        {"unwanted.eg_ratio", Kind::Real},
        {"unwanted.drive_ratio", Kind::Real},
        {"unwanted.g_tilde_prime", Kind::Freq},
        {"unwanted.g_tilde_dprime", Kind::Freq},
        {"unwanted.Omega_p_prime", Kind::Freq},
        {"unwanted.Omega_p_dprime", Kind::Freq},
        {"crosstalk.enabled", Kind::Bool},
        {"crosstalk.ratio", Kind::Real},
        {"kappa.all", Kind::Rate},
        {"gamma_eg", Kind::Rate},
        {"gamma_fe", Kind::Rate},
        {"gamma_fg", Kind::Rate},
        {"gamma_e_phi", Kind::Rate},
        {"gamma_f_phi", Kind::Rate},
        {"T", Kind::Time},
        {"alpha", Kind::Real},
        {"alpha_im", Kind::Real},
        {"c_amp", Kind::Real},
        {"c_amp_im", Kind::Real},
        {"d_amp", Kind::Real},
        {"d_amp_im", Kind::Real},
        {"dead_times.tau_p", Kind::Time},
        {"dead_times.tau_alpha", Kind::Time},
        {"dead_times.tau_d", Kind::Time},
        {"dead_times.tau_c", Kind::Time},
        {"truncation.sps_dim", Kind::Int},
        {"truncation.c1p_dim", Kind::Int},
        {"truncation.csp_dim", Kind::Int},
    };
    auto it = fixed.find(base);
    if (it != fixed.end()) {
        return it->second;
    }
    auto dot = base.find('.');
    if (dot != std::string::npos) {
        std::string head = base.substr(0, dot);
        std::string tail = base.substr(dot + 1);
        if ((head == "omega_c" || head == "g" || head == "mu") && is_cav(tail)) {
            return Kind::Freq;
        }
        if (head == "kappa" && is_cav(tail)) {
            return Kind::Rate;
        }
        if (head == "unwanted") {
            auto d2 = tail.find('.');
            if (d2 != std::string::npos) {
                std::string which = tail.substr(0, d2);
                if ((which == "g_prime" || which == "g_dprime" || which == "mu_prime" || which == "mu_dprime") &&
                    is_cav(tail.substr(d2 + 1))) {
                    return Kind::Freq;
                }
            }
        }
        if (head == "crosstalk") {
            auto d2 = tail.find('.');
            if (d2 != std::string::npos && is_cav(tail.substr(0, d2)) && is_cav(tail.substr(d2 + 1))) {
                return Kind::Freq;
            }
        }
    }
    throw ConfigError("unknown parameter '" + base + "'");
}

KeyInfo classify(const std::string &key) {
    for (const auto &u : kUnits) {
        std::string suf = u.suffix;
        if (key.size() > suf.size() && key.compare(key.size() - suf.size(), suf.size(), suf) == 0) {
            std::string base = key.substr(0, key.size() - suf.size());
            Kind k;
            try {
                k = base_kind(base);
            } catch (const ConfigError &) {
                continue;
            }
            if (k != u.kind) {
                throw ConfigError("unit suffix '" + suf + "' does not fit parameter '" + base + "'");
            }
            return {base, k, u.scale, u.inverse};
        }
    }
    Kind k = base_kind(key);
    if (k == Kind::Freq || k == Kind::Time || k == Kind::Rate) {
        // Bare physical keys are allowed only for symbolic values such as `auto` or `matched`.
        return {key, k, 0.0, false};
    }
    return {key, k, 1.0, false};
}

std::string trim(const std::string &s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_plain(const std::string &s, double &out) {
    const char *b = s.data();
    const char *e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

// number | pi | <number>*pi | pi/<number> | sqrt(<number>) | 1/sqrt(<number>), optional leading '-'.
bool parse_number(std::string s, double &out) {
    s = trim(s);
    double sign = 1.0;
    if (!s.empty() && s[0] == '-') {
        sign = -1.0;
        s = s.substr(1);
    }
    double v;
    if (s == "pi") {
        out = sign * kPi;
        return true;
    }
    if (s.size() > 3 && s.compare(s.size() - 3, 3, "*pi") == 0 && parse_plain(s.substr(0, s.size() - 3), v)) {
        out = sign * v * kPi;
        return true;
    }
    if (s.rfind("pi/", 0) == 0 && parse_plain(s.substr(3), v) && v != 0.0) {
        out = sign * kPi / v;
        return true;
    }
    bool inv = false;
    if (s.rfind("1/sqrt(", 0) == 0) {
        inv = true;
        s = s.substr(2);
    }
    if (s.rfind("sqrt(", 0) == 0 && s.back() == ')' && parse_plain(s.substr(5, s.size() - 6), v) && v >= 0.0) {
        double r = std::sqrt(v);
        if (inv && r == 0.0) {
            return false;
        }
        out = sign * (inv ? 1.0 / r : r);
        return true;
    }
    if (inv) {
        return false;
    }
    if (parse_plain(s, v)) {
        out = sign * v;
        return true;
    }
    return false;
}

class Resolver {
   public:
    explicit Resolver(const std::vector<PresetEntry> &entries) {
        for (const auto &e : entries) {
            KeyInfo info;
            try {
                info = classify(e.key);
            } catch (const ConfigError &err) {
                throw ConfigError(err.what(), e.line, e.column);
            }
            if (by_base_.count(info.base)) {
                const auto &prev = *by_base_.at(info.base).entry;
                throw ConfigError("parameter '" + info.base + "' set twice (first at line " +
                                      std::to_string(prev.line) + ")",
                                  e.line, e.column);
            }
            by_base_[info.base] = {&e, info};
            order_.push_back(info.base);
        }
    }

    bool has(const std::string &base) const {
        return by_base_.count(base) > 0;
    }

    std::string word(const std::string &base) const {
        return trim(by_base_.at(base).entry->value);
    }

    double number(const std::string &base) const {
        const auto &[e, info] = by_base_.at(base);
        double v;
        if (!parse_number(e->value, v)) {
            throw ConfigError("'" + e->key + "': cannot parse number '" + e->value + "'", e->line, e->column);
        }
        if (info.kind == Kind::Freq || info.kind == Kind::Time || info.kind == Kind::Rate) {
            if (info.scale == 0.0) {
                throw ConfigError("'" + e->key + "' needs a unit suffix", e->line, e->column);
            }
            if (info.inverse) {
                if (v == 0.0) {
                    throw ConfigError("'" + e->key + "': lifetime must be nonzero (use 'inf' for no loss)",
                                      e->line, e->column);
                }
                return 1.0 / (v * info.scale);
            }
            return v * info.scale;
        }
        return v;
    }

    double rate(const std::string &base) const {
        const auto &[e, info] = by_base_.at(base);
        std::string v = trim(e->value);
        if (v == "inf" && info.inverse) {
            return 0.0;
        }
        return number(base);
    }

    int integer(const std::string &base) const {
        double v = number(base);
        if (v != std::floor(v) || std::abs(v) > 1e9) {
            const auto &e = by_base_.at(base).entry;
            throw ConfigError("'" + e->key + "' must be an integer", e->line, e->column);
        }
        return static_cast<int>(v);
    }

    bool boolean(const std::string &base) const {
        std::string v = word(base);
        if (v == "true" || v == "1" || v == "on") {
            return true;
        }
        if (v == "false" || v == "0" || v == "off") {
            return false;
        }
        const auto &e = by_base_.at(base).entry;
        throw ConfigError("'" + e->key + "' must be true or false", e->line, e->column);
    }

    const PresetEntry &entry(const std::string &base) const {
        return *by_base_.at(base).entry;
    }

    std::vector<std::string> with_prefix(const std::string &prefix) const {
        std::vector<std::string> out;
        for (const auto &b : order_) {
            if (b.rfind(prefix, 0) == 0) {
                out.push_back(b);
            }
        }
        return out;
    }

   private:
    struct Item {
        const PresetEntry *entry;
        KeyInfo info;
    };
    std::map<std::string, Item> by_base_;
    std::vector<std::string> order_;
};

}  // namespace

void check_preset_key(const std::string &key, int line, int column) {
    try {
        classify(key);
    } catch (const ConfigError &e) {
        throw ConfigError(e.what(), line, column);
    }
}

std::string fnv1a_hex(const std::string &data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

Preset Preset::parse(std::istream &in, std::string source) {
    Preset p;
    p.source_ = std::move(source);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        line++;
        std::string text = raw.substr(0, raw.find('#'));
        if (trim(text).empty()) {
            continue;
        }
        auto eq = text.find('=');
        int key_col = static_cast<int>(text.find_first_not_of(" \t")) + 1;
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value'", line, key_col);
        }
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("missing key before '='", line, static_cast<int>(eq) + 1);
        }
        if (value.empty()) {
            throw ConfigError("missing value for '" + key + "'", line, static_cast<int>(eq) + 2);
        }
        check_preset_key(key, line, key_col);
        for (const auto &e : p.entries_) {
            if (e.key == key) {
                throw ConfigError("duplicate key '" + key + "' (first at line " + std::to_string(e.line) + ")", line,
                                  key_col);
            }
        }
        int val_col = static_cast<int>(text.find_first_not_of(" \t", eq + 1)) + 1;
        p.entries_.push_back({key, value, line, val_col});
    }
    return p;
}

Preset Preset::parse_string(const std::string &text, std::string source) {
    std::istringstream in(text);
    return parse(in, std::move(source));
}

Preset Preset::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open preset '" + path + "'");
    }
    try {
        return parse(in, path);
    } catch (const ConfigError &e) {
        throw ConfigError(path + ": " + e.message(), e.line(), e.column());
    }
}

void Preset::set(const std::string &key, const std::string &value) {
    check_preset_key(key);
    std::string base = classify(key).base;
    // An override replaces whichever unit spelling the file used.
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const PresetEntry &e) { return classify(e.key).base == base; }),
                   entries_.end());
    entries_.push_back({key, trim(value), 0, 0});
}

void Preset::set_assignment(const std::string &assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Preset::erase(const std::string &key) {
    entries_.erase(
        std::remove_if(entries_.begin(), entries_.end(), [&](const PresetEntry &e) { return e.key == key; }),
        entries_.end());
}

std::optional<std::string> Preset::get(const std::string &key) const {
    for (const auto &e : entries_) {
        if (e.key == key) {
            return e.value;
        }
    }
    return std::nullopt;
}

std::string Preset::canonical() const {
    std::vector<std::string> lines;
    for (const auto &e : entries_) {
        lines.push_back(e.key + "=" + e.value);
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto &l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::string Preset::hash() const {
    return fnv1a_hex(canonical());
}

DeviceParams Preset::resolve() const {
    Resolver r(entries_);
    DeviceParams p;
    p.g.clear();
    p.mu.clear();
    p.omega_c.clear();
    if (r.has("n")) {
        p.n = r.integer("n");
        if (p.n < 1) {
            const auto &e = r.entry("n");
            throw ConfigError("n must be >= 1", e.line, e.column);
        }
    }
    auto require = [&](const std::string &base) {
        if (!r.has(base)) {
            throw ConfigError("preset is missing '" + base + "'");
        }
        return r.number(base);
    };
    p.omega_eg = require("omega_eg");
    p.omega_fe = require("omega_fe");
    p.omega_fg = require("omega_fg");
    for (const auto &b : r.with_prefix("omega_c.")) {
        p.omega_c[b.substr(8)] = r.number(b);
    }
    for (const auto &l : p.cavity_labels()) {
        if (!p.omega_c.count(l)) {
            throw ConfigError("preset is missing 'omega_c." + l + "'");
        }
    }
    p.omega_c1p_shifted = require("omega_c1p_shifted");
    p.g_r = require("g_r");
    p.g_tilde = require("g_tilde");
    if (r.has("omega_p")) {
        p.omega_p = r.number("omega_p");
    }
    if (r.has("phi")) {
        p.phi = r.number("phi");
    }
    if (r.has("m")) {
        p.m = r.integer("m");
    }
    p.sync_detunings();

    std::string matching = r.has("matching") ? r.word("matching") : "none";
    if (matching != "from_g2" && matching != "none") {
        const auto &e = r.entry("matching");
        throw ConfigError("matching must be 'from_g2' or 'none'", e.line, e.column);
    }
    for (const auto &b : r.with_prefix("g.")) {
        p.g[b.substr(2)] = r.number(b);
    }
    if (matching == "from_g2") {
        if (p.n >= 2 && !p.g.count("c2")) {
            throw ConfigError("matching = from_g2 needs g.c2");
        }
        std::map<std::string, double> explicit_g = p.g;
        apply_matching_from_g2(p);
        for (const auto &[l, v] : explicit_g) {
            p.g[l] = v;
        }
    }
    for (const auto &b : r.with_prefix("mu.")) {
        p.mu[b.substr(3)] = r.number(b);
    }

    if (!r.has("Omega_p") || r.word("Omega_p") == "auto") {
        p.Omega_p = omega_p_required(p, p.m);
    } else {
        p.Omega_p = r.number("Omega_p");
    }

    auto &u = p.unwanted;
    if (r.has("unwanted.enabled")) {
        u.enabled = r.boolean("unwanted.enabled");
    }
    if (r.has("unwanted.same_ratio")) {
        u.same_ratio = r.number("unwanted.same_ratio");
    }
    if (r.has("unwanted.eg_ratio")) {
        u.eg_ratio = r.number("unwanted.eg_ratio");
    }
    if (r.has("unwanted.drive_ratio")) {
        u.drive_ratio = r.number("unwanted.drive_ratio");
    }
    for (auto [prefix, target] : {std::pair{"unwanted.g_prime.", &u.g_prime}, std::pair{"unwanted.g_dprime.", &u.g_dprime},
                                  std::pair{"unwanted.mu_prime.", &u.mu_prime},
                                  std::pair{"unwanted.mu_dprime.", &u.mu_dprime}}) {
        std::string pre = prefix;
        for (const auto &b : r.with_prefix(pre)) {
            (*target)[b.substr(pre.size())] = r.number(b);
        }
    }
    if (r.has("unwanted.g_tilde_prime")) {
        u.g_tilde_prime = r.number("unwanted.g_tilde_prime");
    }
    if (r.has("unwanted.g_tilde_dprime")) {
        u.g_tilde_dprime = r.number("unwanted.g_tilde_dprime");
    }
    if (r.has("unwanted.Omega_p_prime")) {
        u.Omega_p_prime = r.number("unwanted.Omega_p_prime");
    }
    if (r.has("unwanted.Omega_p_dprime")) {
        u.Omega_p_dprime = r.number("unwanted.Omega_p_dprime");
    }
    if (r.has("crosstalk.enabled")) {
        p.crosstalk.enabled = r.boolean("crosstalk.enabled");
    }
    if (r.has("crosstalk.ratio")) {
        p.crosstalk.ratio = r.number("crosstalk.ratio");
    }
    for (const auto &b : r.with_prefix("crosstalk.")) {
        if (b == "crosstalk.enabled" || b == "crosstalk.ratio") {
            continue;
        }
        std::string tail = b.substr(10);
        auto d = tail.find('.');
        p.crosstalk.overrides[{tail.substr(0, d), tail.substr(d + 1)}] = r.number(b);
    }

    p.kappa.clear();
    if (r.has("kappa.all")) {
        apply_uniform_kappa(p, r.rate("kappa.all"));
    }
    for (const auto &b : r.with_prefix("kappa.")) {
        if (b != "kappa.all") {
            p.kappa[b.substr(6)] = r.rate(b);
        }
    }
    p.gamma_eg = p.gamma_fe = p.gamma_fg = p.gamma_e_phi = p.gamma_f_phi = 0.0;
    if (r.has("T")) {
        apply_coherence_time(p, r.number("T"));
    }
    for (auto [name, target] : {std::pair{"gamma_eg", &p.gamma_eg}, std::pair{"gamma_fe", &p.gamma_fe},
                                std::pair{"gamma_fg", &p.gamma_fg}, std::pair{"gamma_e_phi", &p.gamma_e_phi},
                                std::pair{"gamma_f_phi", &p.gamma_f_phi}}) {
        if (r.has(name)) {
            *target = r.rate(name);
        }
    }

    double are = r.has("alpha") ? r.number("alpha") : 0.0;
    double aim = r.has("alpha_im") ? r.number("alpha_im") : 0.0;
    p.alpha = cplx(are, aim);
    p.c_amp = cplx(r.has("c_amp") ? r.number("c_amp") : 1.0, r.has("c_amp_im") ? r.number("c_amp_im") : 0.0);
    p.d_amp = cplx(r.has("d_amp") ? r.number("d_amp") : 0.0, r.has("d_amp_im") ? r.number("d_amp_im") : 0.0);
    // Amplitudes written with ~16 digits rarely normalize to 1e-12; fix them up when they are close.
    double nrm = std::norm(p.c_amp) + std::norm(p.d_amp);
    if (std::abs(nrm - 1.0) <= 1e-9) {
        p.c_amp /= std::sqrt(nrm);
        p.d_amp /= std::sqrt(nrm);
    }

    auto &dt = p.dead_times;
    for (auto [name, target] : {std::pair{"dead_times.tau_p", &dt.tau_p}, std::pair{"dead_times.tau_alpha", &dt.tau_alpha},
                                std::pair{"dead_times.tau_d", &dt.tau_d}, std::pair{"dead_times.tau_c", &dt.tau_c}}) {
        if (r.has(name)) {
            *target = r.number(name);
        }
    }
    p.validate();
    return p;
}

Truncation Preset::truncation() const {
    Resolver r(entries_);
    Truncation t;
    if (r.has("truncation.sps_dim")) {
        t.sps_dim = r.integer("truncation.sps_dim");
    }
    if (r.has("truncation.c1p_dim")) {
        t.c1p_dim = r.integer("truncation.c1p_dim");
    }
    if (r.has("truncation.csp_dim")) {
        t.csp_dim = r.integer("truncation.csp_dim");
    }
    return t;
}

}  // namespace qtransfer
