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

#include "qtransfer/protocol.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace qtransfer {

const char *step_kind_name(StepKind kind) {
    switch (kind) {
        case StepKind::PrepPlusMinus:
            return "PrepPlusMinus";
        case StepKind::ResonantSwap:
            return "ResonantSwap";
        case StepKind::DispersivePhase:
            return "DispersivePhase";
        case StepKind::Displace:
            return "Displace";
        case StepKind::ConditionalDrive:
            return "ConditionalDrive";
    }
    return "?";
}

const ProtocolStep &ProtocolPlan::step(const std::string &label) const {
    for (const auto &s : steps) {
        if (s.label == label) {
            return s;
        }
    }
    throw UnknownLabel("no protocol step '" + label + "'");
}

ProtocolPlan plan(const DeviceParams &p) {
    p.validate();
    MatchingReport mr = check_matching(p);
    if (!mr.matched) {
        std::ostringstream msg;
        msg << "plan: Stark shifts are not matched:";
        for (const auto &[l, r] : mr.residuals) {
            msg << ' ' << l << '=' << r;
        }
        throw PreconditionError(msg.str());
    }
    DerivedParams d = derive(p);
    if (!(p.g_r > 0.0) || !(d.lambda_common > 0.0) || !(p.Omega_p > 0.0)) {
        throw PreconditionError("plan: g_r, lambda and Omega_p must be positive");
    }
    double t5 = kPi / (2.0 * p.Omega_p);
    double cycles = d.omega_tilde * t5 / kPi;
    double k = std::round(cycles);
    if (k == 0.0 || std::abs(cycles - k) > 1e-6 * std::abs(k)) {
        std::ostringstream msg;
        msg << std::setprecision(10) << "plan: conditional drive time leaves a frame phase (omega~ t / pi = " << cycles
            << "); set Omega_p = " << to_mhz(omega_p_required(p, p.m)) << " MHz for m = " << p.m;
        throw PreconditionError(msg.str());
    }
    const auto &dt = p.dead_times;
    auto sps = p.sps_labels();
    auto cs = p.cs_labels();
    ProtocolPlan pl;
    pl.frame_cycles = cycles;
    std::vector<std::string> rest(sps.begin() + 1, sps.end());
    std::vector<std::string> disp_actors = cs;
    disp_actors.insert(disp_actors.begin(), "qutrit");
    disp_actors.insert(disp_actors.end(), rest.begin(), rest.end());
    pl.steps.push_back({StepKind::PrepPlusMinus, "i", dt.tau_p, rest, 0.0});
    pl.steps.push_back({StepKind::ResonantSwap, "ii", kPi / (2.0 * p.g_r), {"qutrit", "c1"}, 0.0});
    pl.steps.push_back({StepKind::DispersivePhase, "iii", kPi / d.lambda_common, disp_actors, 0.0});
    pl.steps.push_back({StepKind::Displace, "iv", dt.tau_alpha, {"c1p"}, p.alpha});
    pl.steps.push_back({StepKind::ConditionalDrive, "v", t5, {"qutrit", "c1p"}, 0.0});
    pl.steps.push_back({StepKind::Displace, "vi", dt.tau_alpha, {"c1p"}, -p.alpha});
    pl.dead_time = 4.0 * dt.tau_d + 2.0 * dt.tau_c;
    pl.total_time = pl.dead_time;
    for (const auto &s : pl.steps) {
        pl.total_time += s.duration;
    }
    return pl;
}

namespace {

CVec kron_vec(const CVec &a, const CVec &b) {
    CVec out(a.size() * b.size());
    for (Index i = 0; i < a.size(); i++) {
        out.segment(i * b.size(), b.size()) = a[i] * b;
    }
    return out;
}

struct Factor {
    CVec v;
    double leakage = 0.0;
};

Factor fock(int n, int dim) {
    CVec v = CVec::Zero(dim);
    v[n] = 1.0;
    return {v, 0.0};
}

Factor plus_minus(int sign, int dim) {
    CVec v = CVec::Zero(dim);
    v[0] = 1.0 / std::sqrt(2.0);
    v[1] = sign / std::sqrt(2.0);
    return {v, 0.0};
}

Factor coherent(cplx beta, int dim, double bound) {
    StateVector s = coherent_state(beta, dim, bound);
    return {s.amplitudes(), s.leakage()};
}

// One term of a branch superposition, factors in space order.
struct Branch {
    cplx amp;
    std::vector<Factor> factors;
};

StateVector assemble(const HilbertSpace &space, const std::vector<Branch> &branches) {
    CVec total = CVec::Zero(space.dimension());
    double leak = 0.0;
    for (const auto &b : branches) {
        if (b.amp == cplx(0.0)) {
            continue;
        }
        CVec v = b.factors[0].v;
        double keep = 1.0 - b.factors[0].leakage;
        for (std::size_t k = 1; k < b.factors.size(); k++) {
            v = kron_vec(v, b.factors[k].v);
            keep *= 1.0 - b.factors[k].leakage;
        }
        total += b.amp * v;
        leak = std::max(leak, 1.0 - keep);
    }
    double nrm = total.norm();
    if (!(nrm > 0.0)) {
        throw PreconditionError("state has zero norm (c = d = 0?)");
    }
    return StateVector(space, total / nrm, leak);
}

void check_amplitudes(const DeviceParams &p) {
    double s = std::norm(p.c_amp) + std::norm(p.d_amp);
    if (std::abs(s - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "|c|^2 + |d|^2 = " << s << ", expected 1";
        throw PreconditionError(msg.str());
    }
}

void check_space(const DeviceParams &p, const HilbertSpace &space) {
    std::vector<std::string> want{"qutrit"};
    for (const auto &l : p.cavity_labels()) {
        want.push_back(l);
    }
    if (space.labels() != want) {
        throw SpaceMismatch("protocol space must be (qutrit, c1..cn, c1p..cnp), got " + space.describe());
    }
}

// Per-branch description: qutrit level, c1 level, c2..cn factor kind, c1p amplitude, c2p..cnp sign.
struct BranchSpec {
    cplx amp;
    Level q;
    int n1;
    int rest;  // 0, 1 (Fock) or '+' / '-'
    cplx beta1;
    double sign_rest;
    bool c1p_vacuum = false;
};

StateVector build(const DeviceParams &p, const HilbertSpace &space, const std::vector<BranchSpec> &specs,
                  double bound) {
    check_amplitudes(p);
    check_space(p, space);
    auto sps = p.sps_labels();
    auto cs = p.cs_labels();
    std::vector<Branch> branches;
    for (const auto &s : specs) {
        Branch b{s.amp, {}};
        b.factors.push_back(fock(static_cast<int>(s.q), 3));
        b.factors.push_back(fock(s.n1, space.dim(sps[0])));
        for (std::size_t k = 1; k < sps.size(); k++) {
            int dim = space.dim(sps[k]);
            if (s.rest == '+') {
                b.factors.push_back(plus_minus(1, dim));
            } else if (s.rest == '-') {
                b.factors.push_back(plus_minus(-1, dim));
            } else {
                b.factors.push_back(fock(s.rest, dim));
            }
        }
        if (s.c1p_vacuum) {
            b.factors.push_back(fock(0, space.dim(cs[0])));
        } else {
            b.factors.push_back(coherent(s.beta1, space.dim(cs[0]), bound));
        }
        for (std::size_t k = 1; k < cs.size(); k++) {
            b.factors.push_back(coherent(s.sign_rest * p.alpha, space.dim(cs[k]), bound));
        }
        branches.push_back(std::move(b));
    }
    return assemble(space, branches);
}

}  // namespace

StateVector step_target(const DeviceParams &p, const HilbertSpace &space, const std::string &label, double bound) {
    const cplx c = p.c_amp, d = p.d_amp, a = p.alpha;
    const cplx mi(0.0, -1.0);
    std::vector<BranchSpec> s;
    if (label == "0") {
        s = {{c, Level::g, 0, 0, a, 1.0}, {d, Level::g, 1, 1, a, 1.0}};
    } else if (label == "i") {
        s = {{c, Level::g, 0, '+', a, 1.0}, {d, Level::g, 1, '-', a, 1.0}};
    } else if (label == "ii") {
        s = {{c, Level::g, 0, '+', a, 1.0}, {mi * d, Level::e, 0, '-', a, 1.0}};
    } else if (label == "iii") {
        s = {{c, Level::g, 0, '-', a, 1.0}, {mi * d, Level::e, 0, '-', -a, -1.0}};
    } else if (label == "iv") {
        s = {{c, Level::g, 0, '-', 2.0 * a, 1.0}, {mi * d, Level::e, 0, '-', 0.0, -1.0, true}};
    } else if (label == "v") {
        s = {{c, Level::g, 0, '-', 2.0 * a, 1.0}, {d, Level::g, 0, '-', 0.0, -1.0, true}};
    } else if (label == "vi") {
        s = {{c, Level::g, 0, '-', a, 1.0}, {d, Level::g, 0, '-', -a, -1.0}};
    } else {
        throw UnknownLabel("no protocol step '" + label + "'");
    }
    return build(p, space, s, bound);
}

StateVector initial_state(const DeviceParams &p, const HilbertSpace &space, double bound) {
    return step_target(p, space, "0", bound);
}

StateVector target_state(const DeviceParams &p, const HilbertSpace &space, double bound) {
    return step_target(p, space, "vi", bound);
}

double overlap_penalty(const DeviceParams &p) {
    return std::exp(-4.0 * std::norm(p.alpha));
}

CMat plus_minus_unitary(int dim) {
    CMat u = CMat::Identity(dim, dim);
    double r = 1.0 / std::sqrt(2.0);
    u(0, 0) = r;
    u(1, 0) = r;
    u(0, 1) = r;
    u(1, 1) = -r;
    return u;
}

CMat rabi_unitary(const DeviceParams &p, const HilbertSpace &space, double t) {
    int dc = space.dim("c1");
    int dim = 3 * dc;
    CMat h = CMat::Zero(dim, dim);
    // g_r (a σ+_eg + h.c.): |g,n> <-> |e,n−1> with amplitude g_r √n.
    for (int n = 1; n < dc; n++) {
        Index g = n;
        Index e = dc + n - 1;
        h(e, g) = p.g_r * std::sqrt(static_cast<double>(n));
        h(g, e) = h(e, g);
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    CVec ph = (-kI * t * es.eigenvalues().cast<cplx>()).array().exp();
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

StepOutcome outcome(const ProtocolStep &step, const StateVector &s, const StateVector &target) {
    StepOutcome o;
    o.label = step.label;
    o.kind = step.kind;
    o.duration = step.duration;
    o.fidelity = fidelity(target, s);
    o.leakage = s.leakage();
    o.f_population = s.population("qutrit", 2);
    o.state = s;
    return o;
}

void require_normalized(const StateVector &s, const std::string &where) {
    if (std::abs(s.norm() - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << where << ": norm drifted to " << std::setprecision(12) << s.norm();
        throw IntegrationError(msg.str());
    }
}

StateVector displace(const StateVector &s, const std::string &label, cplx beta) {
    CMat u = displacement_matrix(beta, s.space().dim(label));
    std::vector<std::string> l{label};
    return apply_local(s, u, l);
}

}  // namespace

ProtocolResult run_ideal(const DeviceParams &p, const HilbertSpace &space) {
    ProtocolResult r;
    r.plan = plan(p);
    r.solver = "ideal";
    DerivedParams d = derive(p);
    StateVector s = initial_state(p, space);
    r.leakage = s.leakage();
    auto sps = p.sps_labels();
    for (const auto &step : r.plan.steps) {
        if (step.label == "i") {
            for (std::size_t k = 1; k < sps.size(); k++) {
                std::vector<std::string> l{sps[k]};
                s = apply_local(s, plus_minus_unitary(space.dim(sps[k])), l);
            }
        } else if (step.label == "ii") {
            s = evolve_rabi(s, p.g_r, step.duration);
        } else if (step.label == "iii") {
            s = evolve_dispersive_map(s, d, step.duration);
        } else if (step.label == "iv" || step.label == "vi") {
            s = displace(s, "c1p", step.amount);
        } else if (step.label == "v") {
            s = evolve_conditional_drive_map(s, d, step.duration, p.phi);
        }
        require_normalized(s, "run_ideal step " + step.label);
        r.steps.push_back(outcome(step, s, step_target(p, space, step.label)));
    }
    r.fidelity = r.steps.back().fidelity;
    r.final_state = s;
    return r;
}

ProtocolResult run_reverse(const DeviceParams &p, const HilbertSpace &space, const std::optional<StateVector> &input) {
    ProtocolResult r;
    r.plan = plan(p);
    r.solver = "ideal-reverse";
    DerivedParams d = derive(p);
    StateVector s = input ? *input : target_state(p, space);
    if (!(s.space() == space)) {
        throw SpaceMismatch("run_reverse: input lives in another space");
    }
    r.leakage = s.leakage();
    auto sps = p.sps_labels();
    // Undoing step k leaves the state expected after step k − 1.
    static const char *before[] = {"0", "i", "ii", "iii", "iv", "v"};
    for (int k = 5; k >= 0; k--) {
        const ProtocolStep &step = r.plan.steps[static_cast<std::size_t>(k)];
        if (step.label == "i") {
            for (std::size_t j = 1; j < sps.size(); j++) {
                std::vector<std::string> l{sps[j]};
                s = apply_local(s, plus_minus_unitary(space.dim(sps[j])).adjoint(), l);
            }
        } else if (step.label == "ii") {
            s = evolve_rabi(s, p.g_r, -step.duration);
        } else if (step.label == "iii") {
            s = evolve_dispersive_map(s, d, -step.duration);
        } else if (step.label == "iv" || step.label == "vi") {
            s = displace(s, "c1p", -step.amount);
        } else if (step.label == "v") {
            s = invert_conditional_drive_map(s, d, step.duration, p.phi);
        }
        require_normalized(s, "run_reverse step " + step.label);
        r.steps.push_back(outcome(step, s, step_target(p, space, before[k])));
    }
    r.fidelity = r.steps.back().fidelity;
    r.final_state = s;
    return r;
}

ProtocolResult run_numeric(const DeviceParams &p, const HilbertSpace &space, const NumericOptions &opt) {
    if (opt.full_hamiltonian && p.n != 2) {
        throw UnsupportedConfiguration("run_numeric: the full Hamiltonian path is written for n = 2");
    }
    if (!opt.lossless && p.n > 4) {
        throw UnsupportedConfiguration("run_numeric: lossy runs support n <= 4");
    }
    ProtocolResult r;
    r.plan = plan(p);
    StateVector psi0 = initial_state(p, space, opt.leakage_bound);
    r.leakage = psi0.leakage();
    auto sps = p.sps_labels();

    auto H_iii = std::make_shared<TimeDependentHamiltonian>(opt.full_hamiltonian ? build_H2_full(p, space, &r.warnings)
                                                                                 : build_H2(p, space));
    auto H_v = std::make_shared<TimeDependentHamiltonian>(opt.full_hamiltonian ? build_H3_full(p, space)
                                                                               : build_H3(p, space));
    if (opt.fast_cutoff > 0.0) {
        H_iii = std::make_shared<TimeDependentHamiltonian>(average_fast_terms(*H_iii, opt.fast_cutoff));
        H_v = std::make_shared<TimeDependentHamiltonian>(average_fast_terms(*H_v, opt.fast_cutoff));
    }
    if (opt.negligible_excursion > 0.0) {
        H_iii = std::make_shared<TimeDependentHamiltonian>(drop_negligible_terms(*H_iii, opt.negligible_excursion));
        H_v = std::make_shared<TimeDependentHamiltonian>(drop_negligible_terms(*H_v, opt.negligible_excursion));
    }
    std::vector<CollapseOperator> collapse;
    if (!opt.lossless) {
        collapse = collapse_operators(p, space);
    }

    Observable f_pop = Observable::population(space, "qutrit", 2);
    std::vector<Stage> stages;
    for (const auto &step : r.plan.steps) {
        Stage st;
        st.name = step.label;
        st.at_end = {Observable::projector(step_target(p, space, step.label, opt.leakage_bound)), f_pop};
        if (step.label == "i") {
            std::vector<std::string> rest(sps.begin() + 1, sps.end());
            st.unitary = [space, rest](const CVec &v) {
                CVec out = v;
                for (const auto &l : rest) {
                    std::vector<std::string> one{l};
                    out = apply_local(space, out, plus_minus_unitary(space.dim(l)), one);
                }
                return out;
            };
        } else if (step.label == "ii") {
            CMat u = rabi_unitary(p, space, step.duration);
            st.unitary = [space, u](const CVec &v) {
                std::vector<std::string> l{"qutrit", "c1"};
                return apply_local(space, v, u, l);
            };
        } else if (step.label == "iv" || step.label == "vi") {
            CMat u = displacement_matrix(step.amount, space.dim("c1p"));
            st.unitary = [space, u](const CVec &v) {
                std::vector<std::string> l{"c1p"};
                return apply_local(space, v, u, l);
            };
        } else {
            st.H = step.label == "iii" ? H_iii : H_v;
            st.collapse = collapse;
            st.duration = step.duration;
            for (int k = 1; k <= opt.f_samples; k++) {
                st.sample_times.push_back(k == opt.f_samples ? step.duration : step.duration * k / opt.f_samples);
            }
        }
        stages.push_back(std::move(st));
    }

    std::vector<Observable> tracked{f_pop};
    PipelineResult pr;
    Index dim = space.dimension();
    double dense_bytes = 14.0 * 16.0 * static_cast<double>(dim) * static_cast<double>(dim);
    bool dense = !opt.lossless && (opt.solver == Solver::Dense ||
                                   (opt.solver == Solver::Auto && dense_bytes <= opt.memory_budget_bytes));
    if (opt.lossless) {
        r.solver = "schrodinger";
        pr = run_pipeline_pure(stages, psi0, tracked, opt.integration);
    } else if (dense) {
        r.solver = "lindblad";
        pr = run_pipeline_density(stages, DensityMatrix::pure(psi0), tracked, opt.integration);
    } else {
        r.solver = "trajectories";
        pr = run_pipeline_trajectories(stages, psi0, tracked, opt.integration, opt.trajectories);
    }

    for (std::size_t k = 0; k < stages.size(); k++) {
        const auto &est = pr.stages[k];
        const auto &step = r.plan.steps[k];
        StepOutcome o;
        o.label = step.label;
        o.kind = step.kind;
        o.duration = step.duration;
        o.fidelity = std::sqrt(std::clamp(est.end_mean[0], 0.0, 1.0));
        o.f_population = est.end_mean[1];
        o.leakage = r.leakage;
        r.f_pop_max = std::max(r.f_pop_max, o.f_population);
        for (const auto &row : est.tracked) {
            r.f_pop_max = std::max(r.f_pop_max, row[0]);
        }
        r.steps.push_back(std::move(o));
    }
    StateVector target = target_state(p, space, opt.leakage_bound);
    if (pr.final_state) {
        r.fidelity = fidelity(target, *pr.final_state);
        r.final_state = pr.final_state;
        r.steps.back().state = pr.final_state;
    } else if (r.solver == "lindblad") {
        r.fidelity = fidelity(target, *pr.final_rho, &r.warnings);
        r.final_rho = pr.final_rho;
    } else {
        const auto &last = pr.stages.back();
        double f2 = std::clamp(last.end_mean[0], 0.0, 1.0);
        r.fidelity = std::sqrt(f2);
        r.fidelity_stderr = r.fidelity > 0.0 ? last.end_stderr[0] / (2.0 * r.fidelity) : 0.0;
        r.final_rho = pr.final_rho;
    }
    r.trace_error = pr.trace_error;
    r.norm_drift = pr.norm_drift;
    r.no_jump_probability = pr.no_jump_probability;
    r.trajectories = pr.trajectories;
    return r;
}

void write_outcome_text(std::ostream &out, const ProtocolResult &r) {
    auto flags = out.flags();
    out << std::setprecision(10);
    out << "solver " << r.solver << '\n';
    out << "total_time_us " << to_us(r.plan.total_time) << '\n';
    for (const auto &s : r.steps) {
        out << "step " << s.label << " kind " << step_kind_name(s.kind) << " duration_us " << to_us(s.duration)
            << " fidelity " << s.fidelity << " leakage " << s.leakage << " f_pop " << s.f_population << '\n';
    }
    out << "fidelity " << r.fidelity << '\n';
    if (r.fidelity_stderr > 0.0) {
        out << "fidelity_stderr " << r.fidelity_stderr << '\n';
    }
    out << "f_pop_max " << r.f_pop_max << '\n';
    out << "trace_error " << r.trace_error << '\n';
    if (r.solver == "trajectories") {
        out << "no_jump_probability " << r.no_jump_probability << '\n';
        out << "trajectories " << r.trajectories << '\n';
    }
    for (const auto &w : r.warnings) {
        out << "warning " << w << '\n';
    }
    out.flags(flags);
}

void write_outcome_csv(std::ostream &out, const ProtocolResult &r) {
    auto flags = out.flags();
    out << std::setprecision(10);
    out << "step,kind,duration_us,fidelity,leakage,f_pop\n";
    for (const auto &s : r.steps) {
        out << s.label << ',' << step_kind_name(s.kind) << ',' << to_us(s.duration) << ',' << s.fidelity << ','
            << s.leakage << ',' << s.f_population << '\n';
    }
    out.flags(flags);
}

}  // namespace qtransfer
