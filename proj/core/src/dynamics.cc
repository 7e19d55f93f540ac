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

#include "qtransfer/dynamics.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "integrator.h"
#include "qtransfer/kernels.h"

namespace qtransfer {

using detail::Stepper;

void PropagationConfig::validate() const {
    if (!(t_final > 0.0)) {
        throw ConfigError("PropagationConfig: t_final must be > 0");
    }
    if (!(rtol > 0.0) || !(atol > 0.0)) {
        throw ConfigError("PropagationConfig: tolerances must be > 0");
    }
    if (max_step < 0.0) {
        throw ConfigError("PropagationConfig: max_step must be >= 0");
    }
    for (double s : sample_times) {
        if (s < 0.0 || s > t_final) {
            throw ConfigError("PropagationConfig: sample time outside [0, t_final]");
        }
    }
}

void TrajectoryConfig::validate() const {
    if (n_trajectories < 1) {
        throw ConfigError("TrajectoryConfig: n_trajectories must be >= 1");
    }
    if (!(jump_tolerance > 0.0)) {
        throw ConfigError("TrajectoryConfig: jump_tolerance must be > 0");
    }
}

int default_workers() {
    const char *env = std::getenv("QTRANSFER_WORKERS");
    if (env) {
        int w = std::atoi(env);
        if (w >= 1) {
            return w;
        }
    }
    return 1;
}

namespace {

double auto_max_step(double nu_max, double span) {
    // 20 samples per period of the fastest term.
    if (nu_max <= 0.0) {
        return span;
    }
    return kTwoPi / (20.0 * nu_max);
}

double weight_where(const StateVector &s, const std::function<bool(const std::vector<int> &)> &pred) {
    double w = 0.0;
    const auto &amps = s.amplitudes();
    for (Index k = 0; k < amps.size(); k++) {
        if (amps[k] != cplx(0.0) && pred(s.space().levels_of(k))) {
            w += std::norm(amps[k]);
        }
    }
    return w;
}

}  // namespace

StateVector evolve_rabi(const StateVector &state, double g_r, double t, double tol) {
    const HilbertSpace &sp = state.space();
    std::size_t pq = sp.position("qutrit");
    std::size_t pc = sp.position("c1");
    double outside = weight_where(state, [&](const std::vector<int> &lv) {
        int q = lv[pq], n = lv[pc];
        return !((q == 1 && n == 0) || (q == 0 && n == 1) || (q == 0 && n == 0));
    });
    if (outside > tol) {
        std::ostringstream msg;
        msg << "evolve_rabi: weight " << outside << " outside span{|e,0>, |g,1>, |g,0>}";
        throw PreconditionError(msg.str());
    }
    int dc = sp.dims()[pc];
    CMat u = CMat::Identity(3 * dc, 3 * dc);
    Index e0 = 1 * dc + 0;
    Index g1 = 0 * dc + 1;
    double c = std::cos(g_r * t), s = std::sin(g_r * t);
    u(e0, e0) = c;
    u(g1, g1) = c;
    u(g1, e0) = -kI * s;
    u(e0, g1) = -kI * s;
    std::vector<std::string> labels{"qutrit", "c1"};
    return apply_local(state, u, labels);
}

StateVector evolve_dispersive_map(const StateVector &state, const DerivedParams &d, double t, double tol) {
    const HilbertSpace &sp = state.space();
    std::size_t pq = sp.position("qutrit");
    double pf = state.population("qutrit", 2);
    if (pf > tol) {
        std::ostringstream msg;
        msg << "evolve_dispersive_map: |f> population " << pf << " above tolerance";
        throw PreconditionError(msg.str());
    }
    std::vector<std::pair<std::size_t, double>> g_modes, e_modes;
    for (const auto &[l, lam] : d.lambda) {
        g_modes.emplace_back(sp.position(l), lam);
    }
    for (const auto &[l, lam] : d.lambda_p) {
        e_modes.emplace_back(sp.position(l), lam);
    }
    CVec out = state.amplitudes();
    for (Index k = 0; k < out.size(); k++) {
        if (out[k] == cplx(0.0)) {
            continue;
        }
        int q = static_cast<int>((k / sp.stride(pq)) % 3);
        const auto *modes = q == 0 ? &g_modes : (q == 1 ? &e_modes : nullptr);
        if (!modes) {
            continue;
        }
        double phase = 0.0;
        for (const auto &[p, lam] : *modes) {
            int n = static_cast<int>((k / sp.stride(p)) % sp.dims()[p]);
            phase += lam * n * t;
        }
        out[k] *= std::exp(kI * phase);
    }
    return state.with_amplitudes(std::move(out));
}

namespace {

// Forward: rotation on the n = 0 block, then the frame phase. Inverse: the reverse order with negated angles.
CVec conditional_drive(const StateVector &state, const DerivedParams &d, double t, double phi, bool inverse) {
    const HilbertSpace &sp = state.space();
    std::size_t pq = sp.position("qutrit");
    std::size_t pc = sp.position("c1p");
    int dc = sp.dims()[pc];
    auto frame = [&](CVec &v, double sign) {
        for (Index k = 0; k < v.size(); k++) {
            int q = static_cast<int>((k / sp.stride(pq)) % 3);
            if (q == 2) {
                continue;
            }
            int n = static_cast<int>((k / sp.stride(pc)) % dc);
            double sz = q == 1 ? 1.0 : -1.0;
            v[k] *= std::exp(-kI * (sign * 2.0 * d.omega_tilde * (n + 0.5) * sz * t));
        }
    };
    double th = d.Omega_p * t * (inverse ? -1.0 : 1.0);
    double c = std::cos(th), s = std::sin(th);
    CMat u = CMat::Identity(3 * dc, 3 * dc);
    Index g0 = 0, e0 = static_cast<Index>(dc);
    u(g0, g0) = c;
    u(e0, e0) = c;
    u(e0, g0) = -kI * std::exp(-kI * phi) * s;
    u(g0, e0) = -kI * std::exp(kI * phi) * s;
    std::vector<std::string> labels{"qutrit", "c1p"};
    if (!inverse) {
        CVec v = apply_local(sp, state.amplitudes(), u, labels);
        frame(v, 1.0);
        return v;
    }
    CVec v = state.amplitudes();
    frame(v, -1.0);
    return apply_local(sp, v, u, labels);
}

}  // namespace

StateVector evolve_conditional_drive_map(const StateVector &state, const DerivedParams &d, double t, double phi,
                                         double tol) {
    const HilbertSpace &sp = state.space();
    std::size_t pq = sp.position("qutrit");
    std::size_t pc = sp.position("c1p");
    double bad = weight_where(state, [&](const std::vector<int> &lv) {
        return lv[pq] == 2 || (lv[pq] == 1 && lv[pc] > 0);
    });
    if (bad > tol) {
        std::ostringstream msg;
        msg << "evolve_conditional_drive_map: weight " << bad
            << " on |e> with photons in c1p or on |f>; the qutrit/c1p branches are not correlated";
        throw PreconditionError(msg.str());
    }
    return state.with_amplitudes(conditional_drive(state, d, t, phi, false));
}

StateVector invert_conditional_drive_map(const StateVector &state, const DerivedParams &d, double t, double phi) {
    return state.with_amplitudes(conditional_drive(state, d, t, phi, true));
}

Observable Observable::projector(const StateVector &target, std::string name) {
    Observable o;
    o.kind_ = Kind::Projector;
    o.target_ = target.amplitudes();
    o.name_ = std::move(name);
    return o;
}

Observable Observable::diagonal(const HilbertSpace &space, Eigen::VectorXd weights, std::string name) {
    if (weights.size() != space.dimension()) {
        throw InvalidDimension("Observable::diagonal: weight count does not match space");
    }
    Observable o;
    o.kind_ = Kind::Diagonal;
    o.weights_ = std::move(weights);
    o.name_ = std::move(name);
    return o;
}

Observable Observable::population(const HilbertSpace &space, const std::string &label, int level) {
    std::size_t p = space.position(label);
    Eigen::VectorXd w(space.dimension());
    for (Index k = 0; k < w.size(); k++) {
        w[k] = ((k / space.stride(p)) % space.dims()[p]) == level ? 1.0 : 0.0;
    }
    return diagonal(space, std::move(w), "P(" + label + "=" + std::to_string(level) + ")");
}

Observable Observable::number(const HilbertSpace &space, const std::string &label) {
    std::size_t p = space.position(label);
    Eigen::VectorXd w(space.dimension());
    for (Index k = 0; k < w.size(); k++) {
        w[k] = static_cast<double>((k / space.stride(p)) % space.dims()[p]);
    }
    return diagonal(space, std::move(w), "n(" + label + ")");
}

double Observable::on_state(const CVec &psi) const {
    if (kind_ == Kind::Projector) {
        return std::norm(target_.dot(psi));
    }
    return (weights_.array() * psi.array().abs2()).sum();
}

double Observable::on_density(const CMat &rho) const {
    if (kind_ == Kind::Projector) {
        return target_.dot(rho * target_).real();
    }
    return (weights_.array() * rho.diagonal().real().array()).sum();
}

namespace {

std::vector<double> event_times(const std::vector<double> &samples, double t_final) {
    std::vector<double> ev = samples;
    ev.push_back(t_final);
    std::sort(ev.begin(), ev.end());
    ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    return ev;
}

SpMat decay_generator(const std::vector<CollapseOperator> &collapse, Index dim) {
    SpMat k(dim, dim);
    for (const auto &c : collapse) {
        const SpMat &l = c.op.matrix();
        k += c.rate * SpMat(SpMat(l.adjoint()) * l);
    }
    return k;
}

// dρ/dt = −i M ρ + (−i M ρ)† + Σ rate L ρ L†, M = H − (i/2)Σ rate L†L.
class LindbladRhs {
   public:
    LindbladRhs(const TimeDependentHamiltonian &H, const std::vector<CollapseOperator> &collapse)
        : compiled_(H, nullptr), dim_(H.space().dimension()) {
        SpMat k = decay_generator(collapse, dim_);
        SpMat extra = cplx(0.0, -0.5) * k;
        compiled_ = CompiledHamiltonian(H, &extra);
        for (const auto &c : collapse) {
            ls_.push_back(c.op.matrix());
            rates_.push_back(c.rate);
        }
        m_ = compiled_.pattern();
    }

    void operator()(double t, const CMat &rho, CMat &out) {
        compiled_.evaluate(t, m_);
        y_.noalias() = m_ * rho;
        y_ *= cplx(0.0, -1.0);
        out = y_ + y_.adjoint();
        for (std::size_t k = 0; k < ls_.size(); k++) {
            a_.noalias() = ls_[k] * rho;
            b_ = a_.adjoint();
            out.noalias() += rates_[k] * (ls_[k] * b_);
        }
    }

    double max_frequency() const {
        return compiled_.max_frequency();
    }

   private:
    CompiledHamiltonian compiled_;
    Index dim_;
    SpMat m_;
    std::vector<SpMat> ls_;
    std::vector<double> rates_;
    CMat y_, a_, b_;
};

CMat conjugate(const std::function<CVec(const CVec &)> &u, const CMat &rho) {
    // U ρ U† = (U (U ρ)†)† for Hermitian ρ.
    CMat a(rho.rows(), rho.cols());
    for (Index c = 0; c < rho.cols(); c++) {
        a.col(c) = u(rho.col(c));
    }
    CMat at = a.adjoint();
    CMat b(rho.rows(), rho.cols());
    for (Index c = 0; c < rho.cols(); c++) {
        b.col(c) = u(at.col(c));
    }
    return b.adjoint();
}

double min_eig(const CMat &rho) {
    CMat h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

SchrodingerResult propagate_schrodinger(const TimeDependentHamiltonian &H, const StateVector &psi0,
                                        const PropagationConfig &config) {
    config.validate();
    if (!(H.space() == psi0.space())) {
        throw SpaceMismatch("propagate_schrodinger: Hamiltonian and state live in different spaces");
    }
    if (std::abs(psi0.norm() - 1.0) > 1e-9) {
        throw PreconditionError("propagate_schrodinger: initial state is not normalized");
    }
    CompiledHamiltonian ch(H);
    double max_step = config.max_step > 0.0 ? config.max_step : auto_max_step(ch.max_frequency(), config.t_final);
    Stepper<CVec> st(
        [&ch](double t, const CVec &y, CVec &dy) {
            dy.resize(y.size());
            ch.apply(t, y.data(), dy.data());
            dy *= cplx(0.0, -1.0);
        },
        config.method, config.rtol, config.atol, max_step);
    st.reset(0.0, psi0.amplitudes());
    SchrodingerResult res{psi0, {}, {}, 0.0, 0};
    std::vector<double> samples = config.sample_times;
    std::sort(samples.begin(), samples.end());
    std::size_t next_sample = 0;
    auto record = [&]() {
        while (next_sample < samples.size() && samples[next_sample] <= st.t()) {
            res.sample_times.push_back(samples[next_sample]);
            res.samples.push_back(psi0.with_amplitudes(st.y()));
            next_sample++;
        }
    };
    record();
    for (double ev : event_times(samples, config.t_final)) {
        while (st.t() < ev) {
            st.step(ev);
        }
        record();
    }
    double nrm = st.y().norm();
    res.norm_drift = std::abs(nrm - 1.0);
    if (res.norm_drift > 1e-3) {
        std::ostringstream msg;
        msg << "propagate_schrodinger: norm drifted by " << res.norm_drift;
        throw IntegrationError(msg.str());
    }
    res.state = psi0.with_amplitudes(st.y() / nrm);
    res.rhs_evaluations = st.rhs_evaluations();
    return res;
}

LindbladResult propagate_lindblad(const TimeDependentHamiltonian &H, const std::vector<CollapseOperator> &collapse,
                                  const DensityMatrix &rho0, const PropagationConfig &config) {
    config.validate();
    if (!(H.space() == rho0.space())) {
        throw SpaceMismatch("propagate_lindblad: Hamiltonian and state live in different spaces");
    }
    for (const auto &c : collapse) {
        if (!(c.op.space() == H.space())) {
            throw SpaceMismatch("propagate_lindblad: collapse operator '" + c.tag + "' lives in another space");
        }
        if (c.rate < 0.0) {
            throw ConfigError("propagate_lindblad: negative rate");
        }
    }
    auto rhs = std::make_shared<LindbladRhs>(H, collapse);
    double max_step = config.max_step > 0.0 ? config.max_step : auto_max_step(rhs->max_frequency(), config.t_final);
    Stepper<CMat> st([rhs](double t, const CMat &y, CMat &dy) { (*rhs)(t, y, dy); }, config.method, config.rtol,
                     config.atol, max_step);
    st.reset(0.0, rho0.matrix());
    LindbladResult res{rho0, {}, {}, 0.0, 0.0};
    std::vector<double> samples = config.sample_times;
    std::sort(samples.begin(), samples.end());
    std::size_t next_sample = 0;
    bool check_eigs = rho0.space().dimension() <= 2000;
    double floor = 0.0;
    auto record = [&]() {
        while (next_sample < samples.size() && samples[next_sample] <= st.t()) {
            res.sample_times.push_back(samples[next_sample]);
            res.samples.emplace_back(rho0.space(), st.y());
            if (check_eigs) {
                floor = std::min(floor, min_eig(st.y()));
            }
            next_sample++;
        }
    };
    record();
    for (double ev : event_times(samples, config.t_final)) {
        while (st.t() < ev) {
            st.step(ev);
            CMat &y = st.mutable_y();
            y = (0.5 * (y + y.adjoint())).eval();
        }
        record();
    }
    if (check_eigs) {
        floor = std::min(floor, min_eig(st.y()));
    }
    res.min_eigenvalue = floor;
    if (floor < -1e-5) {
        std::ostringstream msg;
        msg << "propagate_lindblad: density matrix lost positivity (eigenvalue " << floor << ")";
        throw IntegrationError(msg.str());
    }
    res.trace_error = std::abs(st.y().trace() - 1.0);
    if (res.trace_error > 1e-3) {
        throw IntegrationError("propagate_lindblad: trace drifted");
    }
    res.rho = DensityMatrix(rho0.space(), st.y());
    return res;
}

namespace {

void check_stage(const Stage &s, const HilbertSpace &space) {
    if (s.is_evolution()) {
        if (!(s.H->space() == space)) {
            throw SpaceMismatch("stage '" + s.name + "': Hamiltonian space differs from the state space");
        }
        if (!(s.duration > 0.0)) {
            throw ConfigError("stage '" + s.name + "': duration must be > 0");
        }
        for (double t : s.sample_times) {
            if (t < 0.0 || t > s.duration) {
                throw ConfigError("stage '" + s.name + "': sample time outside the stage");
            }
        }
    } else if (!s.unitary) {
        throw ConfigError("stage '" + s.name + "': neither a unitary nor a Hamiltonian");
    }
}

std::vector<double> sorted_samples(const Stage &s) {
    std::vector<double> v = s.sample_times;
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

double stage_max_step(const PipelineOptions &opt, double nu_max, double duration) {
    return opt.max_step > 0.0 ? opt.max_step : auto_max_step(nu_max, duration);
}

}  // namespace

PipelineResult run_pipeline_pure(const std::vector<Stage> &stages, const StateVector &psi0,
                                 const std::vector<Observable> &tracked, const PipelineOptions &opt) {
    PipelineResult res;
    CVec psi = psi0.amplitudes();
    for (const auto &s : stages) {
        check_stage(s, psi0.space());
        StageEstimate est;
        if (!s.is_evolution()) {
            psi = s.unitary(psi);
        } else {
            if (!s.collapse.empty()) {
                throw ConfigError("stage '" + s.name + "': collapse operators need the density or trajectory path");
            }
            CompiledHamiltonian ch(*s.H);
            Stepper<CVec> st(
                [&ch](double t, const CVec &y, CVec &dy) {
                    dy.resize(y.size());
                    ch.apply(t, y.data(), dy.data());
                    dy *= cplx(0.0, -1.0);
                },
                opt.method, opt.rtol, opt.atol, stage_max_step(opt, ch.max_frequency(), s.duration));
            st.reset(0.0, psi);
            auto samples = sorted_samples(s);
            std::size_t next = 0;
            auto record = [&]() {
                while (next < samples.size() && samples[next] <= st.t()) {
                    CVec v = st.y() / st.y().norm();
                    std::vector<double> row;
                    for (const auto &o : tracked) {
                        row.push_back(o.on_state(v));
                    }
                    est.sample_times.push_back(samples[next]);
                    est.tracked.push_back(std::move(row));
                    est.tracked_stderr.emplace_back(tracked.size(), 0.0);
                    next++;
                }
            };
            record();
            for (double ev : event_times(samples, s.duration)) {
                while (st.t() < ev) {
                    st.step(ev);
                }
                record();
            }
            double nrm = st.y().norm();
            res.norm_drift = std::max(res.norm_drift, std::abs(nrm - 1.0));
            if (std::abs(nrm - 1.0) > 1e-3) {
                throw IntegrationError("stage '" + s.name + "': norm drifted beyond 1e-3");
            }
            psi = st.y() / nrm;
        }
        for (const auto &o : s.at_end) {
            est.end_mean.push_back(o.on_state(psi));
            est.end_stderr.push_back(0.0);
        }
        res.stages.push_back(std::move(est));
    }
    res.final_state = psi0.with_amplitudes(psi);
    res.trajectories = 1;
    return res;
}

PipelineResult run_pipeline_density(const std::vector<Stage> &stages, const DensityMatrix &rho0,
                                    const std::vector<Observable> &tracked, const PipelineOptions &opt) {
    PipelineResult res;
    CMat rho = rho0.matrix();
    double floor = 0.0;
    bool check_eigs = rho0.space().dimension() <= 2000;
    for (const auto &s : stages) {
        check_stage(s, rho0.space());
        StageEstimate est;
        if (!s.is_evolution()) {
            rho = conjugate(s.unitary, rho);
        } else {
            PropagationConfig cfg;
            cfg.t_final = s.duration;
            cfg.rtol = opt.rtol;
            cfg.atol = opt.atol;
            cfg.method = opt.method;
            cfg.max_step = opt.max_step;
            cfg.sample_times = sorted_samples(s);
            LindbladResult lr = propagate_lindblad(*s.H, s.collapse, DensityMatrix(rho0.space(), rho), cfg);
            for (std::size_t k = 0; k < lr.samples.size(); k++) {
                std::vector<double> row;
                for (const auto &o : tracked) {
                    row.push_back(o.on_density(lr.samples[k].matrix()));
                }
                est.sample_times.push_back(lr.sample_times[k]);
                est.tracked.push_back(std::move(row));
                est.tracked_stderr.emplace_back(tracked.size(), 0.0);
            }
            rho = lr.rho.matrix();
            floor = std::min(floor, lr.min_eigenvalue);
        }
        for (const auto &o : s.at_end) {
            est.end_mean.push_back(o.on_density(rho));
            est.end_stderr.push_back(0.0);
        }
        res.stages.push_back(std::move(est));
    }
    if (check_eigs) {
        floor = std::min(floor, min_eig(rho));
    }
    res.min_eigenvalue = floor;
    res.trace_error = std::abs(rho.trace() - 1.0);
    res.final_rho = DensityMatrix(rho0.space(), rho);
    res.trajectories = 0;
    return res;
}

namespace {

struct EvolveData {
    std::unique_ptr<CompiledHamiltonian> ch;
    std::vector<SpMat> ls;
    std::vector<double> rates;
    double max_step = 0.0;
    std::vector<double> samples;
};

// Accepted-step log of the no-jump branch within one stage.
struct StageLog {
    std::vector<double> t0;
    std::vector<double> h;
    std::vector<double> norm2_after;
    double norm2_before = 1.0;
    std::map<std::size_t, CVec> snapshots;  // state at the start of step k
};

constexpr std::size_t kSnapshotEvery = 32;

class TrajectoryEngine {
   public:
    TrajectoryEngine(const std::vector<Stage> &stages, const std::vector<Observable> &tracked,
                     const PipelineOptions &opt)
        : stages_(stages), tracked_(tracked), opt_(opt) {
        for (const auto &s : stages_) {
            EvolveData d;
            if (s.is_evolution()) {
                SpMat k = decay_generator(s.collapse, s.H->space().dimension());
                SpMat extra = cplx(0.0, -0.5) * k;
                d.ch = std::make_unique<CompiledHamiltonian>(*s.H, &extra);
                for (const auto &c : s.collapse) {
                    d.ls.push_back(c.op.matrix());
                    d.rates.push_back(c.rate);
                }
                d.max_step = stage_max_step(opt_, d.ch->max_frequency(), s.duration);
                d.samples = sorted_samples(s);
            }
            data_.push_back(std::move(d));
        }
    }

    std::unique_ptr<Stepper<CVec>> stepper(std::size_t s) const {
        const CompiledHamiltonian *ch = data_[s].ch.get();
        return std::make_unique<Stepper<CVec>>(
            [ch](double t, const CVec &y, CVec &dy) {
                dy.resize(y.size());
                ch->apply(t, y.data(), dy.data());
                dy *= cplx(0.0, -1.0);
            },
            opt_.method, opt_.rtol, opt_.atol, data_[s].max_step);
    }

    // Per-trajectory record: values where the trajectory had already jumped, NaN otherwise.
    struct Record {
        std::vector<std::vector<double>> end;                   // [stage][obs]
        std::vector<std::vector<std::vector<double>>> samples;  // [stage][sample][obs]
        CVec final_state;
    };

    Record empty_record() const {
        Record r;
        for (std::size_t s = 0; s < stages_.size(); s++) {
            r.end.emplace_back(stages_[s].at_end.size(), std::nan(""));
            r.samples.emplace_back(data_[s].samples.size(), std::vector<double>(tracked_.size(), std::nan("")));
        }
        return r;
    }

    void observe_end(Record &r, std::size_t s, const CVec &psi) const {
        CVec v = psi / psi.norm();
        for (std::size_t k = 0; k < stages_[s].at_end.size(); k++) {
            r.end[s][k] = stages_[s].at_end[k].on_state(v);
        }
    }

    void observe_sample(Record &r, std::size_t s, std::size_t k, const CVec &psi) const {
        CVec v = psi / psi.norm();
        for (std::size_t o = 0; o < tracked_.size(); o++) {
            r.samples[s][k][o] = tracked_[o].on_state(v);
        }
    }

    // Integrates the no-jump branch, logging every accepted step.
    Record run_no_jump(const CVec &psi0, std::vector<StageLog> &logs, std::vector<std::vector<double>> &p_sample,
                       std::vector<double> &p_end) {
        Record r = empty_record();
        CVec psi = psi0;
        logs.assign(stages_.size(), StageLog{});
        p_sample.assign(stages_.size(), {});
        p_end.assign(stages_.size(), 1.0);
        for (std::size_t s = 0; s < stages_.size(); s++) {
            const Stage &st = stages_[s];
            if (!st.is_evolution()) {
                psi = st.unitary(psi);
            } else {
                auto stp = stepper(s);
                stp->reset(0.0, psi);
                StageLog &log = logs[s];
                log.norm2_before = psi.squaredNorm();
                const auto &samples = data_[s].samples;
                std::size_t next = 0;
                auto record = [&]() {
                    while (next < samples.size() && samples[next] <= stp->t()) {
                        observe_sample(r, s, next, stp->y());
                        p_sample[s].push_back(stp->y().squaredNorm());
                        next++;
                    }
                };
                record();
                for (double ev : event_times(samples, st.duration)) {
                    while (stp->t() < ev) {
                        std::size_t k = log.t0.size();
                        if (k % kSnapshotEvery == 0) {
                            log.snapshots.emplace(k, stp->y());
                        }
                        double t0 = stp->t();
                        stp->step(ev);
                        log.t0.push_back(t0);
                        log.h.push_back(stp->t() - t0);
                        log.norm2_after.push_back(stp->y().squaredNorm());
                    }
                    record();
                }
                psi = stp->y();
            }
            observe_end(r, s, psi);
            p_end[s] = psi.squaredNorm();
        }
        r.final_state = psi;
        return r;
    }

    // Located jump: stage, time within the stage and the (unnormalized) state just before it.
    struct Jump {
        std::size_t stage;
        double t;
        CVec psi;
    };

    CVec replay(std::size_t s, const StageLog &log, std::size_t k, Stepper<CVec> &stp) const {
        auto it = log.snapshots.upper_bound(k);
        --it;
        CVec y = it->second;
        CVec out;
        for (std::size_t i = it->first; i < k; i++) {
            stp.raw_step(log.t0[i], y, log.h[i], out);
            y.swap(out);
        }
        (void)s;
        return y;
    }

    // Finds t in (t0, t0 + h] with ||psi(t)||^2 = target, starting from y0 at t0.
    std::pair<double, CVec> bisect(Stepper<CVec> &stp, double t0, const CVec &y0, double h, double target,
                                   double tol) const {
        double lo = 0.0, hi = h;
        CVec out, best;
        stp.raw_step(t0, y0, hi, best);
        double best_tau = hi;
        for (int it = 0; it < 200; it++) {
            double mid = 0.5 * (lo + hi);
            stp.raw_step(t0, y0, mid, out);
            double n2 = out.squaredNorm();
            if (n2 > target) {
                lo = mid;
            } else {
                hi = mid;
                best = out;
                best_tau = mid;
            }
            if (std::abs(n2 - target) <= tol * target) {
                best = out;
                best_tau = mid;
                break;
            }
            if (hi - lo <= 1e-15 * std::max(std::abs(t0), h)) {
                break;
            }
        }
        return {t0 + best_tau, best};
    }

    Jump locate_first_jump(const std::vector<StageLog> &logs, double r, double tol) const {
        for (std::size_t s = 0; s < stages_.size(); s++) {
            if (!stages_[s].is_evolution()) {
                continue;
            }
            const StageLog &log = logs[s];
            auto it = std::find_if(log.norm2_after.begin(), log.norm2_after.end(), [r](double n) { return n <= r; });
            if (it == log.norm2_after.end()) {
                continue;
            }
            std::size_t k = static_cast<std::size_t>(it - log.norm2_after.begin());
            auto stp = stepper(s);
            CVec y = replay(s, log, k, *stp);
            auto [t, psi] = bisect(*stp, log.t0[k], y, log.h[k], r, tol);
            return {s, t, std::move(psi)};
        }
        throw IntegrationError("trajectory: could not locate the conditioned jump");
    }

    CVec apply_jump(std::size_t s, const CVec &psi, double u) const {
        const auto &d = data_[s];
        std::vector<double> w(d.ls.size());
        std::vector<CVec> cand(d.ls.size());
        double total = 0.0;
        for (std::size_t k = 0; k < d.ls.size(); k++) {
            cand[k] = d.ls[k] * psi;
            w[k] = d.rates[k] * cand[k].squaredNorm();
            total += w[k];
        }
        if (!(total > 0.0)) {
            throw IntegrationError("trajectory: jump requested but every channel has zero weight");
        }
        double acc = 0.0;
        std::size_t pick = d.ls.size() - 1;
        for (std::size_t k = 0; k < d.ls.size(); k++) {
            acc += w[k];
            if (u * total < acc) {
                pick = k;
                break;
            }
        }
        return cand[pick] / cand[pick].norm();
    }

    static double uniform(std::mt19937_64 &rng) {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }

    // Standard unravelling from (stage, t) onwards; samples before t are left as NaN.
    Record run_conditioned(const std::vector<StageLog> &logs, double r_first, std::mt19937_64 &rng,
                           double tol) const {
        Record rec = empty_record();
        Jump j = locate_first_jump(logs, r_first, tol);
        CVec psi = apply_jump(j.stage, j.psi, uniform(rng));
        double threshold = uniform(rng);
        for (std::size_t s = j.stage; s < stages_.size(); s++) {
            const Stage &st = stages_[s];
            if (!st.is_evolution()) {
                psi = st.unitary(psi);
                observe_end(rec, s, psi);
                continue;
            }
            double t_start = s == j.stage ? j.t : 0.0;
            auto stp = stepper(s);
            stp->reset(t_start, psi);
            const auto &samples = data_[s].samples;
            std::size_t next = 0;
            while (next < samples.size() && samples[next] < t_start) {
                next++;
            }
            auto record = [&]() {
                while (next < samples.size() && samples[next] <= stp->t()) {
                    observe_sample(rec, s, next, stp->y());
                    next++;
                }
            };
            for (double ev : event_times(samples, st.duration)) {
                if (ev < t_start) {
                    continue;
                }
                while (stp->t() < ev) {
                    double t0 = stp->t();
                    CVec y0 = stp->y();
                    stp->step(ev);
                    if (stp->y().squaredNorm() <= threshold) {
                        auto [tj, pj] = bisect(*stp, t0, y0, stp->t() - t0, threshold, tol);
                        CVec jumped = apply_jump(s, pj, uniform(rng));
                        stp->reset(tj, jumped);
                        threshold = uniform(rng);
                    }
                }
                record();
            }
            psi = stp->y();
            observe_end(rec, s, psi);
        }
        rec.final_state = psi / psi.norm();
        return rec;
    }

    PipelineResult run(const StateVector &psi0, const TrajectoryConfig &traj) {
        traj.validate();
        for (const auto &s : stages_) {
            check_stage(s, psi0.space());
        }
        std::vector<StageLog> logs;
        std::vector<std::vector<double>> p_sample;
        std::vector<double> p_end;
        Record nj = run_no_jump(psi0.amplitudes(), logs, p_sample, p_end);
        double p0 = nj.final_state.squaredNorm();
        bool can_jump = false;
        for (const auto &s : stages_) {
            for (const auto &c : s.collapse) {
                can_jump = can_jump || c.rate > 0.0;
            }
        }
        // Without channels the missing norm is integration drift, not jump probability.
        if (!can_jump) {
            p0 = 1.0;
            std::fill(p_end.begin(), p_end.end(), 1.0);
            for (auto &ps : p_sample) {
                std::fill(ps.begin(), ps.end(), 1.0);
            }
        }
        double q = std::max(0.0, 1.0 - p0);
        int n = q > 1e-14 ? traj.n_trajectories : 0;
        std::vector<Record> recs(static_cast<std::size_t>(n));
        std::atomic<int> next{0};
        std::mutex err_mu;
        std::string err;
        auto worker = [&]() {
            while (true) {
                int j = next.fetch_add(1);
                if (j >= n) {
                    return;
                }
                try {
                    std::seed_seq seq{static_cast<std::uint32_t>(traj.seed), static_cast<std::uint32_t>(traj.seed >> 32),
                                      static_cast<std::uint32_t>(j)};
                    std::mt19937_64 rng(seq);
                    double r = p0 + q * uniform(rng);
                    recs[static_cast<std::size_t>(j)] = run_conditioned(logs, r, rng, traj.jump_tolerance);
                } catch (const std::exception &e) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (err.empty()) {
                        err = e.what();
                    }
                }
            }
        };
        int workers = std::max(1, std::min(traj.workers > 0 ? traj.workers : default_workers(), std::max(n, 1)));
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; w++) {
                pool.emplace_back(worker);
            }
            for (auto &t : pool) {
                t.join();
            }
        }
        if (!err.empty()) {
            throw IntegrationError("trajectory failed: " + err);
        }
        PipelineResult res;
        res.no_jump_probability = p0;
        res.trajectories = n;
        // Estimate = P0(t) O_0(t) + (1 − P0(T)) mean_j [jumped_j(t) O_j(t)].
        auto combine = [&](double p_t, double o0, const std::function<double(const Record &)> &get, double &mean,
                           double &se) {
            if (n == 0) {
                mean = o0;
                se = 0.0;
                return;
            }
            double sum = 0.0, sum2 = 0.0;
            for (const auto &rc : recs) {
                double v = get(rc);
                v = std::isnan(v) ? 0.0 : v;
                sum += v;
                sum2 += v * v;
            }
            double m = sum / n;
            double var = n > 1 ? std::max(0.0, (sum2 - n * m * m) / (n - 1)) : 0.0;
            mean = p_t * o0 + q * m;
            se = q * std::sqrt(var / n);
        };
        for (std::size_t s = 0; s < stages_.size(); s++) {
            StageEstimate est;
            for (std::size_t k = 0; k < stages_[s].at_end.size(); k++) {
                double m, se;
                combine(p_end[s], nj.end[s][k], [&](const Record &rc) { return rc.end[s][k]; }, m, se);
                est.end_mean.push_back(m);
                est.end_stderr.push_back(se);
            }
            est.sample_times = data_[s].samples;
            for (std::size_t k = 0; k < data_[s].samples.size(); k++) {
                std::vector<double> row, row_se;
                for (std::size_t o = 0; o < tracked_.size(); o++) {
                    double m, se;
                    combine(p_sample[s][k], nj.samples[s][k][o], [&](const Record &rc) { return rc.samples[s][k][o]; },
                            m, se);
                    row.push_back(m);
                    row_se.push_back(se);
                }
                est.tracked.push_back(std::move(row));
                est.tracked_stderr.push_back(std::move(row_se));
            }
            res.stages.push_back(std::move(est));
        }
        // Ensemble trace from the stored final states; each should have unit norm.
        double tr = p0;
        for (const auto &rc : recs) {
            tr += (q / n) * rc.final_state.squaredNorm();
        }
        res.trace_error = std::abs(tr - 1.0);
        Index dim = psi0.space().dimension();
        if (dim <= 2000) {
            CVec v0 = nj.final_state / nj.final_state.norm();
            CMat rho = p0 * (v0 * v0.adjoint());
            for (const auto &rc : recs) {
                rho += (q / n) * (rc.final_state * rc.final_state.adjoint());
            }
            res.final_rho = DensityMatrix(psi0.space(), rho);
        }
        return res;
    }

   private:
    const std::vector<Stage> &stages_;
    const std::vector<Observable> &tracked_;
    PipelineOptions opt_;
    std::vector<EvolveData> data_;
};

}  // namespace

PipelineResult run_pipeline_trajectories(const std::vector<Stage> &stages, const StateVector &psi0,
                                         const std::vector<Observable> &tracked, const PipelineOptions &opt,
                                         const TrajectoryConfig &traj) {
    TrajectoryEngine engine(stages, tracked, opt);
    return engine.run(psi0, traj);
}

TrajectoryResult propagate_trajectories(const TimeDependentHamiltonian &H,
                                        const std::vector<CollapseOperator> &collapse, const StateVector &psi0,
                                        const PropagationConfig &config, const TrajectoryConfig &traj,
                                        const std::vector<Observable> &observables) {
    config.validate();
    Stage s;
    s.name = "evolve";
    s.H = std::make_shared<TimeDependentHamiltonian>(H);
    s.collapse = collapse;
    s.duration = config.t_final;
    s.sample_times = event_times(config.sample_times, config.t_final);
    PipelineOptions opt{config.rtol, config.atol, config.method, config.max_step};
    std::vector<Stage> stages{s};
    PipelineResult pr = run_pipeline_trajectories(stages, psi0, observables, opt, traj);
    TrajectoryResult out;
    out.rho = pr.final_rho;
    out.no_jump_probability = pr.no_jump_probability;
    out.sample_times = pr.stages[0].sample_times;
    out.mean = pr.stages[0].tracked;
    out.stderr_ = pr.stages[0].tracked_stderr;
    return out;
}

void write_samples_csv(std::ostream &out, const std::vector<double> &times, const std::vector<std::string> &names,
                       const std::vector<std::vector<double>> &values) {
    auto flags = out.flags();
    out << "t";
    for (const auto &n : names) {
        out << ',' << n;
    }
    out << '\n' << std::setprecision(12);
    for (std::size_t k = 0; k < times.size(); k++) {
        out << times[k];
        for (double v : values[k]) {
            out << ',' << v;
        }
        out << '\n';
    }
    out.flags(flags);
}

}  // namespace qtransfer
