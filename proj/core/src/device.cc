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

#include "qtransfer/device.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qtransfer {

namespace {

double lookup(const std::map<std::string, double> &m, const std::string &key, const char *what) {
    auto it = m.find(key);
    if (it == m.end()) {
        throw ConfigError(std::string("missing ") + what + " for '" + key + "'");
    }
    return it->second;
}

double ratio(double num, double den) {
    if (den == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::abs(num) / std::abs(den);
}

}  // namespace

std::vector<std::string> DeviceParams::sps_labels() const {
    std::vector<std::string> out;
    for (int j = 1; j <= n; j++) {
        out.push_back("c" + std::to_string(j));
    }
    return out;
}

std::vector<std::string> DeviceParams::cs_labels() const {
    std::vector<std::string> out;
    for (int j = 1; j <= n; j++) {
        out.push_back("c" + std::to_string(j) + "p");
    }
    return out;
}

std::vector<std::string> DeviceParams::cavity_labels() const {
    auto out = sps_labels();
    auto cs = cs_labels();
    out.insert(out.end(), cs.begin(), cs.end());
    return out;
}

double DeviceParams::drive_frequency() const {
    if (omega_p) {
        return *omega_p;
    }
    return omega_eg + g_tilde * g_tilde / Delta_tilde;
}

void DeviceParams::sync_detunings() {
    Delta.clear();
    Delta_p.clear();
    auto sps = sps_labels();
    for (std::size_t k = 1; k < sps.size(); k++) {
        Delta[sps[k]] = omega_fg - lookup(omega_c, sps[k], "cavity frequency");
    }
    for (const auto &l : cs_labels()) {
        Delta_p[l] = omega_fe - lookup(omega_c, l, "cavity frequency");
    }
    Delta_tilde = omega_eg - omega_c1p_shifted;
}

void DeviceParams::validate() const {
    if (n < 1) {
        throw ConfigError("n must be >= 1");
    }
    auto nonneg = [](double v, const std::string &name) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ConfigError(name + " must be finite and >= 0");
        }
    };
    for (const auto &l : cavity_labels()) {
        lookup(omega_c, l, "cavity frequency");
    }
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({std::abs(a), std::abs(b), 1.0}); };
    auto sps = sps_labels();
    for (std::size_t k = 1; k < sps.size(); k++) {
        nonneg(lookup(g, sps[k], "coupling g"), "g." + sps[k]);
        double d = lookup(Delta, sps[k], "detuning");
        if (!close(d, omega_fg - omega_c.at(sps[k]))) {
            throw ConfigError("detuning of " + sps[k] + " inconsistent with omega_fg - omega_c");
        }
    }
    for (const auto &l : cs_labels()) {
        nonneg(lookup(mu, l, "coupling mu"), "mu." + l);
        double d = lookup(Delta_p, l, "detuning");
        if (!close(d, omega_fe - omega_c.at(l))) {
            throw ConfigError("detuning of " + l + " inconsistent with omega_fe - omega_c");
        }
    }
    if (!close(Delta_tilde, omega_eg - omega_c1p_shifted)) {
        throw ConfigError("Delta_tilde inconsistent with omega_eg - shifted c1p frequency");
    }
    nonneg(g_r, "g_r");
    nonneg(g_tilde, "g_tilde");
    nonneg(Omega_p, "Omega_p");
    nonneg(gamma_eg, "gamma_eg");
    nonneg(gamma_fe, "gamma_fe");
    nonneg(gamma_fg, "gamma_fg");
    nonneg(gamma_e_phi, "gamma_e_phi");
    nonneg(gamma_f_phi, "gamma_f_phi");
    for (const auto &[l, k] : kappa) {
        nonneg(k, "kappa." + l);
    }
    nonneg(dead_times.tau_p, "tau_p");
    nonneg(dead_times.tau_alpha, "tau_alpha");
    nonneg(dead_times.tau_d, "tau_d");
    nonneg(dead_times.tau_c, "tau_c");
    nonneg(crosstalk.ratio, "crosstalk.ratio");
    for (const auto &[pair, v] : crosstalk.overrides) {
        nonneg(v, "crosstalk." + pair.first + "." + pair.second);
    }
    if (m < 1) {
        throw ConfigError("m must be a positive integer");
    }
    double norm = std::norm(c_amp) + std::norm(d_amp);
    if (std::abs(norm - 1.0) > 1e-12) {
        throw ConfigError("|c|^2 + |d|^2 must equal 1 (got " + std::to_string(norm) + ")");
    }
}

DeviceParams reference_device() {
    DeviceParams p;
    p.n = 2;
    p.omega_eg = ghz(8.0);
    p.omega_fe = ghz(12.0);
    p.omega_fg = ghz(20.0);
    p.omega_c = {{"c1", ghz(5.0)}, {"c2", ghz(20.25)}, {"c1p", ghz(12.125)}, {"c2p", ghz(11.875)}};
    p.g_r = mhz(50.0);
    p.g = {{"c2", mhz(12.03)}};
    p.g_tilde = mhz(24.1);
    p.omega_c1p_shifted = ghz(7.84);
    p.sync_detunings();
    apply_matching_from_g2(p);
    p.m = 2;
    p.Omega_p = omega_p_required(p, p.m);
    p.phi = kPi;
    apply_uniform_kappa(p, 1.0 / us(100.0));
    apply_coherence_time(p, us(15.0));
    p.alpha = 1.86;
    p.c_amp = 1.0 / std::sqrt(2.0);
    p.d_amp = 1.0 / std::sqrt(2.0);
    return p;
}

void apply_coherence_time(DeviceParams &p, double T) {
    if (!(T > 0.0)) {
        throw ConfigError("coherence time T must be positive");
    }
    p.gamma_eg = 1.0 / (4.0 * T);
    p.gamma_fe = 1.0 / (2.0 * T);
    p.gamma_fg = 1.0 / T;
    p.gamma_e_phi = 1.0 / T;
    p.gamma_f_phi = 1.0 / T;
}

void apply_uniform_kappa(DeviceParams &p, double kappa) {
    if (!(kappa >= 0.0)) {
        throw ConfigError("kappa must be >= 0");
    }
    p.kappa.clear();
    for (const auto &l : p.cavity_labels()) {
        p.kappa[l] = kappa;
    }
}

void apply_matching_from_g2(DeviceParams &p) {
    if (p.n < 2) {
        return;
    }
    double g2 = lookup(p.g, "c2", "coupling g");
    double lam = g2 * g2 / std::abs(lookup(p.Delta, "c2", "detuning"));
    auto sps = p.sps_labels();
    for (std::size_t k = 2; k < sps.size(); k++) {
        p.g[sps[k]] = std::sqrt(lam * std::abs(lookup(p.Delta, sps[k], "detuning")));
    }
    for (const auto &l : p.cs_labels()) {
        p.mu[l] = std::sqrt(lam * std::abs(lookup(p.Delta_p, l, "detuning")));
    }
}

double omega_p_required(const DeviceParams &p, int m) {
    if (m < 1) {
        throw ConfigError("m must be a positive integer");
    }
    if (p.Delta_tilde == 0.0) {
        throw ConfigError("Delta_tilde is zero");
    }
    return p.g_tilde * p.g_tilde / (4.0 * m * std::abs(p.Delta_tilde));
}

DerivedParams derive(const DeviceParams &p) {
    DerivedParams d;
    auto sps = p.sps_labels();
    for (std::size_t k = 1; k < sps.size(); k++) {
        double gj = lookup(p.g, sps[k], "coupling g");
        d.lambda[sps[k]] = gj * gj / lookup(p.Delta, sps[k], "detuning");
    }
    for (const auto &l : p.cs_labels()) {
        double mj = lookup(p.mu, l, "coupling mu");
        d.lambda_p[l] = mj * mj / lookup(p.Delta_p, l, "detuning");
    }
    if (p.n >= 2) {
        d.lambda_common = std::abs(d.lambda.at("c2"));
    } else {
        d.lambda_common = std::abs(d.lambda_p.at("c1p"));
    }
    d.omega_tilde = p.Delta_tilde == 0.0 ? 0.0 : p.g_tilde * p.g_tilde / (2.0 * p.Delta_tilde);
    d.nbar = 4.0 * std::norm(p.alpha);
    d.Omega_p = p.Omega_p;
    d.Omega_p_required = p.Delta_tilde == 0.0 ? 0.0 : omega_p_required(p, p.m);
    const double inf = std::numeric_limits<double>::infinity();
    double t3 = d.lambda_common > 0.0 ? kPi / d.lambda_common : inf;
    double t2 = p.g_r > 0.0 ? kPi / (2.0 * p.g_r) : inf;
    double t5 = p.Omega_p > 0.0 ? kPi / (2.0 * p.Omega_p) : inf;
    const auto &dt = p.dead_times;
    d.t_op = t3 + t2 + t5 + dt.tau_p + 2.0 * dt.tau_alpha + 4.0 * dt.tau_d + 2.0 * dt.tau_c;
    return d;
}

bool DispersiveReport::all_pass() const {
    return std::all_of(margins.begin(), margins.end(), [](const Margin &m) { return m.pass; });
}

const Margin &DispersiveReport::find(const std::string &name) const {
    for (const auto &m : margins) {
        if (m.name == name) {
            return m;
        }
    }
    throw UnknownLabel("no margin named '" + name + "'");
}

DispersiveReport validate_dispersive(const DeviceParams &p, double threshold) {
    DispersiveReport r;
    r.threshold = threshold;
    auto add = [&](std::string name, double value) { r.margins.push_back({std::move(name), value, value >= threshold}); };
    struct Arm {
        std::string label;
        double delta;
        double coupling;
    };
    std::vector<Arm> j_arms, jp_arms;
    auto sps = p.sps_labels();
    for (std::size_t k = 1; k < sps.size(); k++) {
        j_arms.push_back({sps[k], p.Delta.at(sps[k]), p.g.at(sps[k])});
    }
    for (const auto &l : p.cs_labels()) {
        jp_arms.push_back({l, p.Delta_p.at(l), p.mu.at(l)});
    }
    for (const auto &a : j_arms) {
        add("|Delta_" + a.label + "|/g_" + a.label, ratio(a.delta, a.coupling));
    }
    for (const auto &a : jp_arms) {
        add("|Delta_" + a.label + "|/mu_" + a.label, ratio(a.delta, a.coupling));
    }
    auto cross = [&](const Arm &a, const Arm &b) {
        double lhs = std::abs(a.delta - b.delta) / (std::abs(1.0 / a.delta) + std::abs(1.0 / b.delta));
        add("cross(" + a.label + "," + b.label + ")", ratio(lhs, a.coupling * b.coupling));
    };
    for (std::size_t i = 0; i < j_arms.size(); i++) {
        for (std::size_t k = i + 1; k < j_arms.size(); k++) {
            cross(j_arms[i], j_arms[k]);
        }
    }
    for (std::size_t i = 0; i < jp_arms.size(); i++) {
        for (std::size_t k = i + 1; k < jp_arms.size(); k++) {
            cross(jp_arms[i], jp_arms[k]);
        }
    }
    for (const auto &a : j_arms) {
        for (const auto &b : jp_arms) {
            cross(a, b);
        }
    }
    double wt = p.Delta_tilde == 0.0 ? 0.0 : p.g_tilde * p.g_tilde / (2.0 * p.Delta_tilde);
    add("|Delta_tilde|/g_tilde", ratio(p.Delta_tilde, p.g_tilde));
    add("|Delta_tilde|/Omega_p", ratio(p.Delta_tilde, p.Omega_p));
    add("4|omega_tilde|nbar/Omega_p", ratio(4.0 * wt * 4.0 * std::norm(p.alpha), p.Omega_p));
    return r;
}

MatchingReport check_matching(const DeviceParams &p, double rel_tol) {
    DerivedParams d = derive(p);
    MatchingReport r;
    r.lambda_ref = d.lambda_common;
    r.matched = true;
    auto check = [&](const std::string &label, double lam) {
        double res = r.lambda_ref == 0.0 ? (lam == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                         : std::abs(lam) / r.lambda_ref - 1.0;
        r.residuals.emplace_back(label, res);
        if (!(std::abs(res) <= rel_tol)) {
            r.matched = false;
        }
    };
    for (const auto &[l, lam] : d.lambda) {
        check(l, lam);
    }
    for (const auto &[l, lam] : d.lambda_p) {
        check(l, lam);
    }
    return r;
}

std::map<std::string, double> quality_factors(const DeviceParams &p) {
    std::map<std::string, double> out;
    for (const auto &l : p.cavity_labels()) {
        double w = lookup(p.omega_c, l, "cavity frequency");
        auto it = p.kappa.find(l);
        double k = it == p.kappa.end() ? 0.0 : it->second;
        out[l] = k == 0.0 ? std::numeric_limits<double>::infinity() : w / k;
    }
    return out;
}

ResolvedUnwanted resolve_unwanted(const DeviceParams &p) {
    ResolvedUnwanted r;
    const auto &u = p.unwanted;
    auto pick = [&](const std::map<std::string, double> &over, const std::string &l, double dflt) {
        if (!u.enabled) {
            return 0.0;
        }
        auto it = over.find(l);
        return it == over.end() ? dflt : it->second;
    };
    auto sps = p.sps_labels();
    for (std::size_t k = 1; k < sps.size(); k++) {
        double gj = p.g.at(sps[k]);
        r.g_prime[sps[k]] = pick(u.g_prime, sps[k], u.same_ratio * gj);
        r.g_dprime[sps[k]] = pick(u.g_dprime, sps[k], u.eg_ratio * gj);
    }
    for (const auto &l : p.cs_labels()) {
        double mj = p.mu.at(l);
        r.mu_prime[l] = pick(u.mu_prime, l, u.same_ratio * mj);
        r.mu_dprime[l] = pick(u.mu_dprime, l, u.eg_ratio * mj);
    }
    auto opt = [&](const std::optional<double> &v, double dflt) { return u.enabled ? v.value_or(dflt) : 0.0; };
    r.g_tilde_prime = opt(u.g_tilde_prime, u.drive_ratio * p.g_tilde);
    r.g_tilde_dprime = opt(u.g_tilde_dprime, u.drive_ratio * p.g_tilde);
    r.Omega_p_prime = opt(u.Omega_p_prime, u.drive_ratio * p.Omega_p);
    r.Omega_p_dprime = opt(u.Omega_p_dprime, u.drive_ratio * p.Omega_p);
    return r;
}

std::map<std::pair<std::string, std::string>, double> resolve_crosstalk(const DeviceParams &p) {
    std::map<std::pair<std::string, std::string>, double> out;
    double gm = 0.0;
    for (const auto &[l, v] : p.g) {
        gm = std::max(gm, v);
    }
    for (const auto &[l, v] : p.mu) {
        gm = std::max(gm, v);
    }
    auto cav = p.cavity_labels();
    for (std::size_t a = 0; a < cav.size(); a++) {
        for (std::size_t b = a + 1; b < cav.size(); b++) {
            auto key = std::make_pair(cav[a], cav[b]);
            double v = p.crosstalk.ratio * gm;
            auto it = p.crosstalk.overrides.find(key);
            if (it != p.crosstalk.overrides.end()) {
                v = it->second;
            }
            out[key] = p.crosstalk.enabled ? v : 0.0;
        }
    }
    return out;
}

HilbertSpace protocol_space(const DeviceParams &p, const Truncation &trunc) {
    std::vector<int> dims{3};
    std::vector<std::string> labels{"qutrit"};
    for (const auto &l : p.sps_labels()) {
        dims.push_back(trunc.sps_dim);
        labels.push_back(l);
    }
    double a2 = std::norm(p.alpha);
    auto cs = p.cs_labels();
    for (std::size_t k = 0; k < cs.size(); k++) {
        int d = k == 0 ? trunc.c1p_dim.value_or(default_truncation(4.0 * a2))
                       : trunc.csp_dim.value_or(default_truncation(a2));
        dims.push_back(d);
        labels.push_back(cs[k]);
    }
    return HilbertSpace(dims, labels);
}

}  // namespace qtransfer
