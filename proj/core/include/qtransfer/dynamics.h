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

#ifndef QTRANSFER_DYNAMICS_H
#define QTRANSFER_DYNAMICS_H

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qtransfer/device.h"
#include "qtransfer/hamiltonian.h"

namespace qtransfer {

enum class Method { RK4, DOPRI5 };

struct PropagationConfig {
    double t_final = 0.0;
    double rtol = 1e-8;
    double atol = 1e-10;
    /// 0 selects 1/(20 f_max) with f_max the largest oscillation frequency (in Hz) of H.
    double max_step = 0.0;
    Method method = Method::DOPRI5;
    std::vector<double> sample_times;

    void validate() const;
};

struct TrajectoryConfig {
    int n_trajectories = 100;
    std::uint64_t seed = 1;
    /// Relative tolerance on the norm when locating a jump.
    double jump_tolerance = 1e-10;
    /// 0 means: read QTRANSFER_WORKERS, default 1.
    int workers = 0;

    void validate() const;
};

/// Worker count from QTRANSFER_WORKERS (at least 1).
int default_workers();

/// Exact resonant exchange |e,0> <-> |g,1> on (qutrit, c1); |g,0> is untouched.
StateVector evolve_rabi(const StateVector &state, double g_r, double t, double tol = 1e-9);
/// Diagonal Stark-phase unitary: e^{iλ_j n t} on the |g> branch, e^{iλ_j' n t} on the |e> branch.
StateVector evolve_dispersive_map(const StateVector &state, const DerivedParams &d, double t, double tol = 1e-9);
/// Resonant rotation on the cavity-vacuum block of (qutrit, c1p), identity on n >= 1, then the
/// rotating-frame phases e^{−iH0 t} with H0 = 2ω̃(n + 1/2)σ_z.
StateVector evolve_conditional_drive_map(const StateVector &state, const DerivedParams &d, double t, double phi,
                                         double tol = 1e-6);
/// Exact inverse of evolve_conditional_drive_map for the same (t, phi).
StateVector invert_conditional_drive_map(const StateVector &state, const DerivedParams &d, double t, double phi);

/// Expectation functional usable on pure states and density matrices.
class Observable {
   public:
    /// |<target|psi>|^2.
    static Observable projector(const StateVector &target, std::string name = "overlap");
    /// Σ_k w_k |psi_k|^2 for a diagonal operator with entries w.
    static Observable diagonal(const HilbertSpace &space, Eigen::VectorXd weights, std::string name);
    static Observable population(const HilbertSpace &space, const std::string &label, int level);
    static Observable number(const HilbertSpace &space, const std::string &label);

    double on_state(const CVec &psi) const;
    double on_density(const CMat &rho) const;
    const std::string &name() const {
        return name_;
    }

   private:
    enum class Kind { Projector, Diagonal };
    Kind kind_ = Kind::Diagonal;
    CVec target_;
    Eigen::VectorXd weights_;
    std::string name_;
};

struct SchrodingerResult {
    StateVector state;
    std::vector<double> sample_times;
    std::vector<StateVector> samples;
    double norm_drift = 0.0;
    std::size_t rhs_evaluations = 0;
};

SchrodingerResult propagate_schrodinger(const TimeDependentHamiltonian &H, const StateVector &psi0,
                                        const PropagationConfig &config);

struct LindbladResult {
    DensityMatrix rho;
    std::vector<double> sample_times;
    std::vector<DensityMatrix> samples;
    double trace_error = 0.0;
    double min_eigenvalue = 0.0;
};

LindbladResult propagate_lindblad(const TimeDependentHamiltonian &H, const std::vector<CollapseOperator> &collapse,
                                  const DensityMatrix &rho0, const PropagationConfig &config);

struct TrajectoryResult {
    /// Ensemble density matrix (only built when the dimension is at most 2000).
    std::optional<DensityMatrix> rho;
    std::vector<double> sample_times;
    /// [sample][observable]
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> stderr_;
    double no_jump_probability = 1.0;
};

/// Monte-Carlo wavefunction unravelling. The no-jump branch is integrated once and weighted by its
/// exact probability; the remaining trajectories are conditioned on at least one jump.
TrajectoryResult propagate_trajectories(const TimeDependentHamiltonian &H,
                                        const std::vector<CollapseOperator> &collapse, const StateVector &psi0,
                                        const PropagationConfig &config, const TrajectoryConfig &traj,
                                        const std::vector<Observable> &observables = {});

/// One step of a multi-stage evolution: either an instantaneous unitary or a timed evolution.
struct Stage {
    std::string name;
    std::function<CVec(const CVec &)> unitary;
    std::shared_ptr<const TimeDependentHamiltonian> H;
    std::vector<CollapseOperator> collapse;
    double duration = 0.0;
    /// Times (relative to the stage start) at which tracked observables are recorded.
    std::vector<double> sample_times;
    /// Observables evaluated once at the end of the stage.
    std::vector<Observable> at_end;

    bool is_evolution() const {
        return static_cast<bool>(H);
    }
};

struct StageEstimate {
    std::vector<double> end_mean;
    std::vector<double> end_stderr;
    std::vector<double> sample_times;
    /// [sample][tracked observable]
    std::vector<std::vector<double>> tracked;
    /// Standard errors matching `tracked` (zero for deterministic paths).
    std::vector<std::vector<double>> tracked_stderr;
};

struct PipelineResult {
    std::vector<StageEstimate> stages;
    std::optional<StateVector> final_state;
    std::optional<DensityMatrix> final_rho;
    double no_jump_probability = 1.0;
    double trace_error = 0.0;
    double norm_drift = 0.0;
    double min_eigenvalue = 0.0;
    int trajectories = 0;
};

struct PipelineOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    Method method = Method::DOPRI5;
    /// Per-stage max step; 0 selects 1/(20 f_max).
    double max_step = 0.0;
};

PipelineResult run_pipeline_pure(const std::vector<Stage> &stages, const StateVector &psi0,
                                 const std::vector<Observable> &tracked, const PipelineOptions &opt);
PipelineResult run_pipeline_density(const std::vector<Stage> &stages, const DensityMatrix &rho0,
                                    const std::vector<Observable> &tracked, const PipelineOptions &opt);
PipelineResult run_pipeline_trajectories(const std::vector<Stage> &stages, const StateVector &psi0,
                                         const std::vector<Observable> &tracked, const PipelineOptions &opt,
                                         const TrajectoryConfig &traj);

/// CSV with a header "t,<name>..." and one row per sample.
void write_samples_csv(std::ostream &out, const std::vector<double> &times, const std::vector<std::string> &names,
                       const std::vector<std::vector<double>> &values);

}  // namespace qtransfer

#endif
