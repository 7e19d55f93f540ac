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

#ifndef QTRANSFER_PROTOCOL_H
#define QTRANSFER_PROTOCOL_H

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qtransfer/device.h"
#include "qtransfer/dynamics.h"

namespace qtransfer {

enum class StepKind { PrepPlusMinus, ResonantSwap, DispersivePhase, Displace, ConditionalDrive };

const char *step_kind_name(StepKind kind);

struct ProtocolStep {
    StepKind kind;
    /// "i" .. "vi".
    std::string label;
    double duration = 0.0;
    std::vector<std::string> actors;
    /// Displacement amount (Displace only).
    cplx amount = 0.0;
};

struct ProtocolPlan {
    std::vector<ProtocolStep> steps;
    /// 4 τ_d + 2 τ_c.
    double dead_time = 0.0;
    double total_time = 0.0;
    /// ω̃ t / π for the conditional drive; an integer when the frame phase closes.
    double frame_cycles = 0.0;

    const ProtocolStep &step(const std::string &label) const;
};

/// Checks matching and the drive-time condition, then lays out the six steps.
ProtocolPlan plan(const DeviceParams &p);

/// (c|0..0> + d|1..1>) |α>^n |g>.
StateVector initial_state(const DeviceParams &p, const HilbertSpace &space, double leakage_bound = 1e-4);
/// |g>|0>_1|->..|-> (c|α..α> + d|−α..−α>), normalized.
StateVector target_state(const DeviceParams &p, const HilbertSpace &space, double leakage_bound = 1e-4);
/// Expected state after the step with the given label ("i".."vi"); "0" is the initial state.
StateVector step_target(const DeviceParams &p, const HilbertSpace &space, const std::string &label,
                        double leakage_bound = 1e-4);

/// Non-orthogonality penalty felt by the ideal maps: the vacuum weight of |2α>.
double overlap_penalty(const DeviceParams &p);

struct StepOutcome {
    std::string label;
    StepKind kind;
    double duration = 0.0;
    double fidelity = 0.0;
    double leakage = 0.0;
    double f_population = 0.0;
    std::optional<StateVector> state;
};

struct ProtocolResult {
    ProtocolPlan plan;
    std::vector<StepOutcome> steps;
    double fidelity = 0.0;
    /// Statistical error of `fidelity` (trajectory solver only).
    double fidelity_stderr = 0.0;
    double leakage = 0.0;
    double f_pop_max = 0.0;
    double trace_error = 0.0;
    double norm_drift = 0.0;
    double no_jump_probability = 1.0;
    int trajectories = 0;
    std::string solver;
    std::optional<StateVector> final_state;
    std::optional<DensityMatrix> final_rho;
    Warnings warnings;
};

ProtocolResult run_ideal(const DeviceParams &p, const HilbertSpace &space);
/// Applies the inverse steps in reverse order to `input` (the transferred state by default).
ProtocolResult run_reverse(const DeviceParams &p, const HilbertSpace &space,
                           const std::optional<StateVector> &input = std::nullopt);

enum class Solver { Auto, Dense, Trajectories };

struct NumericOptions {
    bool lossless = true;
    /// Use the Hamiltonians with unwanted couplings and crosstalk (n = 2 only).
    bool full_hamiltonian = true;
    /// Terms with |ν| at or above this (rad/s) are replaced by their second-order average; 0 keeps all.
    double fast_cutoff = 2.0 * kPi * 1e9;
    /// Oscillating terms with max|A| / |ν| below this are dropped after averaging; 0 keeps all.
    double negligible_excursion = 1e-6;
    Solver solver = Solver::Auto;
    /// Dense Lindblad is chosen by Auto when ~14 density matrices fit in this budget.
    double memory_budget_bytes = 2.0 * 1024 * 1024 * 1024;
    PipelineOptions integration{1e-7, 1e-9, Method::DOPRI5, 0.0};
    TrajectoryConfig trajectories;
    /// Samples of the |f> population per numerically propagated step.
    int f_samples = 40;
    double leakage_bound = 1e-4;
};

/// Steps (i), (ii), (iv), (vi) as ideal unitaries; (iii) and (v) propagated.
ProtocolResult run_numeric(const DeviceParams &p, const HilbertSpace &space, const NumericOptions &opt);

/// Exact propagator of the resonant exchange on (qutrit, c1).
CMat rabi_unitary(const DeviceParams &p, const HilbertSpace &space, double t);
/// |0> -> |+>, |1> -> |->, identity above.
CMat plus_minus_unitary(int dim);

void write_outcome_text(std::ostream &out, const ProtocolResult &r);
void write_outcome_csv(std::ostream &out, const ProtocolResult &r);

}  // namespace qtransfer

#endif
