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

#ifndef QTRANSFER_HAMILTONIAN_H
#define QTRANSFER_HAMILTONIAN_H

#include <string>
#include <vector>

#include "qtransfer/device.h"
#include "qtransfer/hilbert.h"

namespace qtransfer {

struct OscillatingTerm {
    SpMat A;
    double nu = 0.0;
    std::string tag;
};

struct StaticTerm {
    SpMat H;
    std::string tag;
};

/// H(t) = Σ_k (A_k e^{iν_k t} + h.c.) + Σ static.
class TimeDependentHamiltonian {
   public:
    explicit TimeDependentHamiltonian(HilbertSpace space);

    const HilbertSpace &space() const {
        return space_;
    }
    void add_term(SpMat A, double nu, std::string tag = "");
    void add_term(const Operator &A, double nu, std::string tag = "");
    /// Throws if H is not Hermitian.
    void add_static(SpMat H, std::string tag = "");
    void add(const TimeDependentHamiltonian &other);

    const std::vector<OscillatingTerm> &terms() const {
        return terms_;
    }
    const std::vector<StaticTerm> &static_terms() const {
        return statics_;
    }
    /// Oscillating pieces counted with their Hermitian conjugates.
    std::size_t oscillating_count() const {
        return 2 * terms_.size();
    }
    bool empty() const {
        return terms_.empty() && statics_.empty();
    }

    SpMat at(double t) const;
    Operator operator_at(double t) const {
        return Operator(space_, at(t));
    }
    double max_frequency() const;
    bool is_hermitian_at(double t, double rel_tol = 1e-10) const;

   private:
    HilbertSpace space_;
    std::vector<OscillatingTerm> terms_;
    std::vector<StaticTerm> statics_;
};

/// g_r a1 σ+_eg + h.c., static.
TimeDependentHamiltonian build_H1(const DeviceParams &p, const HilbertSpace &space);
/// Cavities c2..cn on g<->f and c1p..cnp on e<->f, far detuned.
TimeDependentHamiltonian build_H2(const DeviceParams &p, const HilbertSpace &space);
/// Diagonal Stark-shift Hamiltonian; include_f adds the |f> shifts.
TimeDependentHamiltonian build_H_eff_dispersive(const DeviceParams &p, const HilbertSpace &space,
                                                bool include_f = false);
/// Shifted c1p on e<->g plus the classical drive on e<->g.
TimeDependentHamiltonian build_H3(const DeviceParams &p, const HilbertSpace &space);
/// Drive in the rotating frame: one term per Fock level of c1p at ν = 4ω̃n.
TimeDependentHamiltonian build_H_eff_drive(const DeviceParams &p, const HilbertSpace &space);
TimeDependentHamiltonian build_crosstalk(const DeviceParams &p, const HilbertSpace &space,
                                         Warnings *warnings = nullptr);
/// build_H2 plus the unwanted transitions and crosstalk (n = 2 only).
TimeDependentHamiltonian build_H2_full(const DeviceParams &p, const HilbertSpace &space,
                                       Warnings *warnings = nullptr);
/// build_H3 plus the unwanted cavity and drive transitions.
TimeDependentHamiltonian build_H3_full(const DeviceParams &p, const HilbertSpace &space);

/// Frame of H0 = (g̃²/Δ̃)(n + 1/2)σ_z on (qutrit, c1p); H0 is diagonal.
class DriveFrame {
   public:
    DriveFrame(const DeviceParams &p, const HilbertSpace &space);
    /// e^{+iH0 t} psi.
    CVec to_rotating(const CVec &psi, double t) const;
    /// e^{−iH0 t} psi.
    CVec from_rotating(const CVec &psi, double t) const;
    const Eigen::VectorXd &energies() const {
        return h0_;
    }

   private:
    Eigen::VectorXd h0_;
};

struct CollapseOperator {
    Operator op;
    double rate = 0.0;
    std::string tag;
};

/// Cavity decay, qutrit relaxation and pure dephasing; channels with zero rate are omitted.
std::vector<CollapseOperator> collapse_operators(const DeviceParams &p, const HilbertSpace &space);

/// Replaces every term with |ν| >= nu_cut by its second-order time average.
/// Terms k, l with |ω_k − ω_l| < nu_cut produce a slow cross term; the rest are dropped.
TimeDependentHamiltonian average_fast_terms(const TimeDependentHamiltonian &H, double nu_cut);

/// Drops oscillating terms whose first-order excursion max|A_ij| / |ν| is below tol.
TimeDependentHamiltonian drop_negligible_terms(const TimeDependentHamiltonian &H, double tol,
                                               Warnings *dropped = nullptr);

}  // namespace qtransfer

#endif
