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

#include "qtransfer/hamiltonian.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qtransfer {

namespace {

SpMat local(const Operator &op, const HilbertSpace &space, const std::string &label) {
    if (!space.contains(label)) {
        throw UnknownLabel("Hamiltonian builder: subsystem '" + label + "' missing from " + space.describe());
    }
    return embed_matrix(op.matrix(), space, label);
}

SpMat ladder(const HilbertSpace &space, const std::string &label) {
    if (!space.contains(label)) {
        throw UnknownLabel("Hamiltonian builder: subsystem '" + label + "' missing from " + space.describe());
    }
    return embed_matrix(annihilation(space.dim(label)).matrix(), space, label);
}

SpMat qutrit_op(const HilbertSpace &space, Level from, Level to) {
    return local(qutrit_transition(from, to), space, "qutrit");
}

void guard_detuning(double delta, double coupling, const std::string &what) {
    if (coupling > 0.0 && std::abs(delta) < 1e-3 * coupling) {
        throw ConfigError(what + ": detuning is effectively zero (resonant regime)");
    }
}

double get(const std::map<std::string, double> &m, const std::string &key) {
    auto it = m.find(key);
    if (it == m.end()) {
        throw ConfigError("missing parameter for '" + key + "'");
    }
    return it->second;
}

}  // namespace

TimeDependentHamiltonian::TimeDependentHamiltonian(HilbertSpace space) : space_(std::move(space)) {
}

void TimeDependentHamiltonian::add_term(SpMat A, double nu, std::string tag) {
    if (A.rows() != space_.dimension() || A.cols() != space_.dimension()) {
        throw InvalidDimension("add_term: operator shape does not match space");
    }
    A.makeCompressed();
    terms_.push_back({std::move(A), nu, std::move(tag)});
}

void TimeDependentHamiltonian::add_term(const Operator &A, double nu, std::string tag) {
    if (!(A.space() == space_)) {
        throw SpaceMismatch("add_term: operator space differs");
    }
    add_term(A.matrix(), nu, std::move(tag));
}

void TimeDependentHamiltonian::add_static(SpMat H, std::string tag) {
    if (H.rows() != space_.dimension() || H.cols() != space_.dimension()) {
        throw InvalidDimension("add_static: operator shape does not match space");
    }
    SpMat diff = H - SpMat(H.adjoint());
    if (diff.norm() > 1e-12 * std::max(1.0, H.norm())) {
        throw Error("add_static: static term '" + tag + "' is not Hermitian");
    }
    H.makeCompressed();
    statics_.push_back({std::move(H), std::move(tag)});
}

void TimeDependentHamiltonian::add(const TimeDependentHamiltonian &other) {
    if (!(other.space_ == space_)) {
        throw SpaceMismatch("TimeDependentHamiltonian::add: spaces differ");
    }
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    statics_.insert(statics_.end(), other.statics_.begin(), other.statics_.end());
}

SpMat TimeDependentHamiltonian::at(double t) const {
    SpMat out(space_.dimension(), space_.dimension());
    for (const auto &s : statics_) {
        out += s.H;
    }
    for (const auto &k : terms_) {
        cplx ph = std::exp(kI * (k.nu * t));
        SpMat a = k.A * ph;
        out += a;
        out += SpMat(a.adjoint());
    }
    out.makeCompressed();
    return out;
}

double TimeDependentHamiltonian::max_frequency() const {
    double out = 0.0;
    for (const auto &k : terms_) {
        out = std::max(out, std::abs(k.nu));
    }
    return out;
}

bool TimeDependentHamiltonian::is_hermitian_at(double t, double rel_tol) const {
    SpMat h = at(t);
    SpMat diff = h - SpMat(h.adjoint());
    return diff.norm() <= rel_tol * std::max(h.norm(), 1e-300);
}

TimeDependentHamiltonian build_H1(const DeviceParams &p, const HilbertSpace &space) {
    TimeDependentHamiltonian H(space);
    SpMat a1 = ladder(space, "c1");
    SpMat sp = qutrit_op(space, Level::g, Level::e);
    SpMat term = p.g_r * SpMat(a1 * sp);
    H.add_static(SpMat(term + SpMat(term.adjoint())), "g_r a1 s+eg");
    return H;
}

TimeDependentHamiltonian build_H2(const DeviceParams &p, const HilbertSpace &space) {
    TimeDependentHamiltonian H(space);
    SpMat s_fg = qutrit_op(space, Level::g, Level::f);
    SpMat s_fe = qutrit_op(space, Level::e, Level::f);
    auto sps = p.sps_labels();
    for (std::size_t k = 1; k < sps.size(); k++) {
        const auto &l = sps[k];
        double gj = get(p.g, l);
        double dj = get(p.Delta, l);
        guard_detuning(dj, gj, "build_H2 " + l);
        if (gj != 0.0) {
            H.add_term(SpMat(gj * SpMat(ladder(space, l) * s_fg)), dj, "g " + l + " fg");
        }
    }
    for (const auto &l : p.cs_labels()) {
        double mj = get(p.mu, l);
        double dj = get(p.Delta_p, l);
        guard_detuning(dj, mj, "build_H2 " + l);
        if (mj != 0.0) {
            H.add_term(SpMat(mj * SpMat(ladder(space, l) * s_fe)), dj, "mu " + l + " fe");
        }
    }
    return H;
}

TimeDependentHamiltonian build_H_eff_dispersive(const DeviceParams &p, const HilbertSpace &space, bool include_f) {
    TimeDependentHamiltonian H(space);
    DerivedParams d = derive(p);
    SpMat sg = qutrit_op(space, Level::g, Level::g);
    SpMat se = qutrit_op(space, Level::e, Level::e);
    SpMat sf = qutrit_op(space, Level::f, Level::f);
    SpMat total(space.dimension(), space.dimension());
    auto add_mode = [&](const std::string &l, double lam, const SpMat &branch) {
        if (lam == 0.0) {
            return;
        }
        SpMat a = ladder(space, l);
        SpMat n = SpMat(a.adjoint()) * a;
        total -= lam * SpMat(branch * n);
        if (include_f) {
            SpMat nn = a * SpMat(a.adjoint());
            total += lam * SpMat(sf * nn);
        }
    };
    for (const auto &[l, lam] : d.lambda) {
        add_mode(l, lam, sg);
    }
    for (const auto &[l, lam] : d.lambda_p) {
        add_mode(l, lam, se);
    }
    total.prune(cplx(0.0));
    H.add_static(std::move(total), "dispersive");
    return H;
}

TimeDependentHamiltonian build_H3(const DeviceParams &p, const HilbertSpace &space) {
    TimeDependentHamiltonian H(space);
    SpMat s_eg = qutrit_op(space, Level::g, Level::e);
    SpMat b = ladder(space, "c1p");
    if (p.g_tilde != 0.0) {
        guard_detuning(p.Delta_tilde, p.g_tilde, "build_H3");
        H.add_term(SpMat(p.g_tilde * SpMat(b * s_eg)), p.Delta_tilde, "g~ c1p eg");
    }
    if (p.Omega_p != 0.0) {
        cplx amp = p.Omega_p * std::exp(-kI * p.phi);
        H.add_term(SpMat(amp * s_eg), -(p.drive_frequency() - p.omega_eg), "drive eg");
    }
    return H;
}

TimeDependentHamiltonian build_H_eff_drive(const DeviceParams &p, const HilbertSpace &space) {
    TimeDependentHamiltonian H(space);
    if (p.Omega_p == 0.0) {
        return H;
    }
    double wt = derive(p).omega_tilde;
    int dim = space.dim("c1p");
    SpMat s_eg = qutrit_op(space, Level::g, Level::e);
    cplx amp = p.Omega_p * std::exp(-kI * p.phi);
    for (int n = 0; n < dim; n++) {
        SpMat proj = local(fock_projector(n, dim), space, "c1p");
        H.add_term(SpMat(amp * SpMat(proj * s_eg)), 4.0 * wt * n, "drive n=" + std::to_string(n));
    }
    return H;
}

TimeDependentHamiltonian build_crosstalk(const DeviceParams &p, const HilbertSpace &space, Warnings *warnings) {
    TimeDependentHamiltonian H(space);
    for (const auto &[pair, gkl] : resolve_crosstalk(p)) {
        const auto &[k, l] = pair;
        if (gkl == 0.0 || !space.contains(k) || !space.contains(l)) {
            continue;
        }
        double dkl = get(p.omega_c, k) - get(p.omega_c, l);
        if (dkl == 0.0 && warnings) {
            warnings->push_back("resonant crosstalk between " + k + " and " + l);
        }
        SpMat op = SpMat(ladder(space, k).adjoint()) * ladder(space, l);
        H.add_term(SpMat(gkl * op), dkl, "xt " + k + "-" + l);
    }
    return H;
}

TimeDependentHamiltonian build_H2_full(const DeviceParams &p, const HilbertSpace &space, Warnings *warnings) {
    if (p.n != 2) {
        throw UnsupportedConfiguration("build_H2_full is defined for n = 2 only");
    }
    TimeDependentHamiltonian H = build_H2(p, space);
    ResolvedUnwanted u = resolve_unwanted(p);
    SpMat s_fe = qutrit_op(space, Level::e, Level::f);
    SpMat s_eg = qutrit_op(space, Level::g, Level::e);
    SpMat s_fg = qutrit_op(space, Level::g, Level::f);
    auto add = [&](double c, const SpMat &a, const SpMat &s, double nu, const std::string &tag) {
        if (c != 0.0) {
            guard_detuning(nu, c, "build_H2_full " + tag);
            H.add_term(SpMat(c * SpMat(a * s)), nu, tag);
        }
    };
    SpMat a2 = ladder(space, "c2");
    double w2 = get(p.omega_c, "c2");
    add(u.g_prime.at("c2"), a2, s_fe, p.omega_fe - w2, "g' c2 fe");
    add(u.g_dprime.at("c2"), a2, s_eg, p.omega_eg - w2, "g'' c2 eg");
    for (const auto &l : p.cs_labels()) {
        SpMat b = ladder(space, l);
        double w = get(p.omega_c, l);
        add(u.mu_prime.at(l), b, s_fg, p.omega_fg - w, "mu' " + l + " fg");
        add(u.mu_dprime.at(l), b, s_eg, p.omega_eg - w, "mu'' " + l + " eg");
    }
    H.add(build_crosstalk(p, space, warnings));
    return H;
}

TimeDependentHamiltonian build_H3_full(const DeviceParams &p, const HilbertSpace &space) {
    if (p.omega_c1p_shifted <= 0.0) {
        throw ConfigError("build_H3_full: shifted cavity-1' frequency not set");
    }
    TimeDependentHamiltonian H = build_H3(p, space);
    ResolvedUnwanted u = resolve_unwanted(p);
    SpMat b = ladder(space, "c1p");
    SpMat s_fg = qutrit_op(space, Level::g, Level::f);
    SpMat s_fe = qutrit_op(space, Level::e, Level::f);
    double wc = p.omega_c1p_shifted;
    if (u.g_tilde_prime != 0.0) {
        H.add_term(SpMat(u.g_tilde_prime * SpMat(b * s_fg)), p.omega_fg - wc, "g~' c1p fg");
    }
    if (u.g_tilde_dprime != 0.0) {
        H.add_term(SpMat(u.g_tilde_dprime * SpMat(b * s_fe)), p.omega_fe - wc, "g~'' c1p fe");
    }
    double wp = p.drive_frequency();
    cplx ph = std::exp(-kI * p.phi);
    if (u.Omega_p_prime != 0.0) {
        H.add_term(SpMat((u.Omega_p_prime * ph) * s_fg), -(wp - p.omega_fg), "drive fg");
    }
    if (u.Omega_p_dprime != 0.0) {
        H.add_term(SpMat((u.Omega_p_dprime * ph) * s_fe), -(wp - p.omega_fe), "drive fe");
    }
    return H;
}

DriveFrame::DriveFrame(const DeviceParams &p, const HilbertSpace &space) {
    double c = p.Delta_tilde == 0.0 ? 0.0 : p.g_tilde * p.g_tilde / p.Delta_tilde;
    std::size_t pq = space.position("qutrit");
    std::size_t pc = space.position("c1p");
    h0_.resize(space.dimension());
    for (Index k = 0; k < space.dimension(); k++) {
        int q = static_cast<int>((k / space.stride(pq)) % 3);
        int n = static_cast<int>((k / space.stride(pc)) % space.dims()[pc]);
        double sz = q == 1 ? 1.0 : (q == 0 ? -1.0 : 0.0);
        h0_[k] = c * (n + 0.5) * sz;
    }
}

CVec DriveFrame::to_rotating(const CVec &psi, double t) const {
    return (kI * t * h0_.cast<cplx>()).array().exp() * psi.array();
}

CVec DriveFrame::from_rotating(const CVec &psi, double t) const {
    return (-kI * t * h0_.cast<cplx>()).array().exp() * psi.array();
}

std::vector<CollapseOperator> collapse_operators(const DeviceParams &p, const HilbertSpace &space) {
    std::vector<CollapseOperator> out;
    auto push = [&](SpMat m, double rate, std::string tag) {
        if (rate < 0.0) {
            throw ConfigError("collapse_operators: negative rate for " + tag);
        }
        if (rate > 0.0) {
            out.push_back({Operator(space, std::move(m)), rate, std::move(tag)});
        }
    };
    for (const auto &[l, k] : p.kappa) {
        if (k < 0.0) {
            throw ConfigError("collapse_operators: negative kappa for " + l);
        }
        if (space.contains(l)) {
            push(ladder(space, l), k, "kappa " + l);
        }
    }
    if (space.contains("qutrit")) {
        push(qutrit_op(space, Level::e, Level::g), p.gamma_eg, "gamma eg");
        push(qutrit_op(space, Level::f, Level::e), p.gamma_fe, "gamma fe");
        push(qutrit_op(space, Level::f, Level::g), p.gamma_fg, "gamma fg");
        push(qutrit_op(space, Level::e, Level::e), p.gamma_e_phi, "dephasing e");
        push(qutrit_op(space, Level::f, Level::f), p.gamma_f_phi, "dephasing f");
    }
    return out;
}

TimeDependentHamiltonian average_fast_terms(const TimeDependentHamiltonian &H, double nu_cut) {
    TimeDependentHamiltonian out(H.space());
    for (const auto &s : H.static_terms()) {
        out.add_static(s.H, s.tag);
    }
    // Each term is rewritten as h e^{−iωt} + h† e^{iωt} with ω = |ν| > 0.
    struct Fast {
        SpMat h;
        double w;
        std::string tag;
    };
    std::vector<Fast> fast;
    for (const auto &k : H.terms()) {
        if (std::abs(k.nu) < nu_cut) {
            out.add_term(k.A, k.nu, k.tag);
        } else if (k.nu > 0.0) {
            fast.push_back({SpMat(k.A.adjoint()), k.nu, k.tag});
        } else {
            fast.push_back({k.A, -k.nu, k.tag});
        }
    }
    // H_eff = Σ_{k,l} (1/ω̄_kl) [h_k†, h_l] e^{i(ω_k − ω_l)t}, ω̄_kl = 2ω_kω_l/(ω_k + ω_l).
    SpMat diag(H.space().dimension(), H.space().dimension());
    for (std::size_t k = 0; k < fast.size(); k++) {
        for (std::size_t l = k; l < fast.size(); l++) {
            double dw = fast[k].w - fast[l].w;
            if (std::abs(dw) >= nu_cut) {
                continue;
            }
            double wbar = 2.0 * fast[k].w * fast[l].w / (fast[k].w + fast[l].w);
            SpMat hk_dag = fast[k].h.adjoint();
            SpMat c = SpMat(hk_dag * fast[l].h) - SpMat(fast[l].h * hk_dag);
            c.prune(cplx(0.0), 1e-300);
            if (c.nonZeros() == 0) {
                continue;
            }
            c *= 1.0 / wbar;
            if (k == l) {
                diag += c;
            } else {
                // The (k,l) and (l,k) entries together form c e^{iΔt} + h.c.
                out.add_term(c, dw, "avg " + fast[k].tag + " x " + fast[l].tag);
            }
        }
    }
    diag = 0.5 * (diag + SpMat(diag.adjoint()));
    diag.prune(cplx(0.0), 1e-300);
    if (diag.nonZeros() > 0) {
        out.add_static(std::move(diag), "averaged shifts");
    }
    return out;
}

TimeDependentHamiltonian drop_negligible_terms(const TimeDependentHamiltonian &H, double tol, Warnings *dropped) {
    TimeDependentHamiltonian out(H.space());
    for (const auto &s : H.static_terms()) {
        out.add_static(s.H, s.tag);
    }
    for (const auto &k : H.terms()) {
        double amax = 0.0;
        for (Index r = 0; r < k.A.outerSize(); r++) {
            for (SpMat::InnerIterator it(k.A, r); it; ++it) {
                amax = std::max(amax, std::abs(it.value()));
            }
        }
        if (k.nu != 0.0 && amax / std::abs(k.nu) < tol) {
            if (dropped) {
                std::ostringstream msg;
                msg << "dropped term '" << k.tag << "' (excursion " << amax / std::abs(k.nu) << ")";
                dropped->push_back(msg.str());
            }
            continue;
        }
        out.add_term(k.A, k.nu, k.tag);
    }
    return out;
}

}  // namespace qtransfer
