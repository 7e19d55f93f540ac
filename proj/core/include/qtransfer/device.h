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

#ifndef QTRANSFER_DEVICE_H
#define QTRANSFER_DEVICE_H

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtransfer/hilbert.h"

namespace qtransfer {

/// Couplings that the ideal protocol ignores: a cavity coupled to the "wrong" qutrit transitions.
/// Unset entries follow the dipole rule: same-type factor on the fg/fe channel, eg factor on the
/// eg channel, drive factor on the step-(v) fg/fe channels.
struct UnwantedCouplings {
    bool enabled = true;
    double same_ratio = 1.0;
    double eg_ratio = 0.25;
    double drive_ratio = 4.0;
    std::map<std::string, double> g_prime;   // c2..cn on f<->e
    std::map<std::string, double> g_dprime;  // c2..cn on e<->g
    std::map<std::string, double> mu_prime;  // c1p..cnp on f<->g
    std::map<std::string, double> mu_dprime; // c1p..cnp on e<->g
    std::optional<double> g_tilde_prime;     // shifted c1p on f<->g
    std::optional<double> g_tilde_dprime;    // shifted c1p on f<->e
    std::optional<double> Omega_p_prime;     // drive on f<->g
    std::optional<double> Omega_p_dprime;    // drive on f<->e
};

struct Crosstalk {
    bool enabled = true;
    /// g_kl = ratio * max(g, mu) unless overridden.
    double ratio = 0.01;
    std::map<std::pair<std::string, std::string>, double> overrides;
};

struct DeadTimes {
    double tau_p = 0.0;
    double tau_alpha = 0.0;
    double tau_d = 0.0;
    double tau_c = 0.0;
};

struct DeviceParams {
    int n = 2;
    double omega_eg = 0.0;
    double omega_fe = 0.0;
    double omega_fg = 0.0;
    std::map<std::string, double> omega_c;
    double g_r = 0.0;
    std::map<std::string, double> g;   // c2..cn
    std::map<std::string, double> mu;  // c1p..cnp
    std::map<std::string, double> Delta;    // ω_fg − ω_cj
    std::map<std::string, double> Delta_p;  // ω_fe − ω_cj'
    double g_tilde = 0.0;
    double Delta_tilde = 0.0;
    double omega_c1p_shifted = 0.0;
    double Omega_p = 0.0;
    double phi = kPi;
    std::optional<double> omega_p;
    int m = 2;
    UnwantedCouplings unwanted;
    Crosstalk crosstalk;
    std::map<std::string, double> kappa;
    double gamma_eg = 0.0;
    double gamma_fe = 0.0;
    double gamma_fg = 0.0;
    double gamma_e_phi = 0.0;
    double gamma_f_phi = 0.0;
    cplx alpha = 0.0;
    cplx c_amp = 1.0;
    cplx d_amp = 0.0;
    DeadTimes dead_times;

    std::vector<std::string> sps_labels() const;  // c1..cn
    std::vector<std::string> cs_labels() const;   // c1p..cnp
    std::vector<std::string> cavity_labels() const;
    /// ω_p, defaulting to ω_eg + g̃²/Δ̃.
    double drive_frequency() const;

    /// Recomputes Delta/Delta_p from omega_c (the frequencies are authoritative).
    void sync_detunings();
    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// Section-IV device. Ω_p is the m = 2 solution of the return condition.
DeviceParams reference_device();

/// Decoherence rule used in the sweeps: γ_eg = 1/(4T), γ_fe = 1/(2T), γ_fg = γ_eφ = γ_fφ = 1/T.
void apply_coherence_time(DeviceParams &p, double T);
void apply_uniform_kappa(DeviceParams &p, double kappa);
/// Re-derives every g_j (j >= 3) and μ_j' from g_2 so that all |λ| coincide.
void apply_matching_from_g2(DeviceParams &p);

struct DerivedParams {
    std::map<std::string, double> lambda;
    std::map<std::string, double> lambda_p;
    double lambda_common = 0.0;
    double omega_tilde = 0.0;
    double nbar = 0.0;
    double Omega_p = 0.0;
    double Omega_p_required = 0.0;
    double t_op = 0.0;
};

DerivedParams derive(const DeviceParams &p);
/// g̃²/(4mΔ̃).
double omega_p_required(const DeviceParams &p, int m);

struct Margin {
    std::string name;
    double ratio = 0.0;
    bool pass = true;
};

struct DispersiveReport {
    double threshold = 10.0;
    std::vector<Margin> margins;
    bool all_pass() const;
    const Margin &find(const std::string &name) const;
};

DispersiveReport validate_dispersive(const DeviceParams &p, double threshold = 10.0);

struct MatchingReport {
    bool matched = false;
    double lambda_ref = 0.0;
    std::vector<std::pair<std::string, double>> residuals;
};

MatchingReport check_matching(const DeviceParams &p, double rel_tol = 1e-6);

/// Q = ω_c/κ; infinity when κ = 0.
std::map<std::string, double> quality_factors(const DeviceParams &p);

/// Resolved unwanted coupling values (zero when disabled).
struct ResolvedUnwanted {
    std::map<std::string, double> g_prime, g_dprime, mu_prime, mu_dprime;
    double g_tilde_prime = 0.0, g_tilde_dprime = 0.0, Omega_p_prime = 0.0, Omega_p_dprime = 0.0;
};
ResolvedUnwanted resolve_unwanted(const DeviceParams &p);

/// Resolved crosstalk couplings for every cavity pair (k before l in canonical order).
std::map<std::pair<std::string, std::string>, double> resolve_crosstalk(const DeviceParams &p);

/// Truncation used for a protocol run.
struct Truncation {
    int sps_dim = 3;
    std::optional<int> c1p_dim;
    std::optional<int> csp_dim;
};

/// Canonical space (qutrit, c1..cn, c1p..cnp) with Poisson-tail cutoffs unless overridden.
HilbertSpace protocol_space(const DeviceParams &p, const Truncation &trunc = {});

}  // namespace qtransfer

#endif
