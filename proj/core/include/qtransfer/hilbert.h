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

#ifndef QTRANSFER_HILBERT_H
#define QTRANSFER_HILBERT_H

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qtransfer/types.h"

namespace qtransfer {

/// Tensor-product structure. The first subsystem is the most significant index.
class HilbertSpace {
   public:
    HilbertSpace(std::vector<int> dims, std::vector<std::string> labels);
    static HilbertSpace single(int dim, std::string label = "mode");

    std::size_t subsystems() const {
        return dims_.size();
    }
    Index dimension() const {
        return total_;
    }
    const std::vector<int> &dims() const {
        return dims_;
    }
    const std::vector<std::string> &labels() const {
        return labels_;
    }
    bool contains(std::string_view label) const;
    std::size_t position(std::string_view label) const;
    int dim(std::string_view label) const;
    Index stride(std::size_t pos) const {
        return strides_[pos];
    }

    Index index_of(std::span<const int> levels) const;
    std::vector<int> levels_of(Index flat) const;

    /// Sub-space on `keep`, in this space's order.
    HilbertSpace subspace(std::span<const std::string> keep) const;
    HilbertSpace concat(const HilbertSpace &other) const;
    std::string describe() const;

    bool operator==(const HilbertSpace &other) const {
        return dims_ == other.dims_ && labels_ == other.labels_;
    }

   private:
    std::vector<int> dims_;
    std::vector<std::string> labels_;
    std::vector<Index> strides_;
    Index total_ = 1;
};

class Operator {
   public:
    Operator(HilbertSpace space, SpMat matrix);

    const HilbertSpace &space() const {
        return space_;
    }
    const SpMat &matrix() const {
        return matrix_;
    }
    CMat dense() const {
        return CMat(matrix_);
    }
    cplx element(Index row, Index col) const {
        return matrix_.coeff(row, col);
    }
    Operator adjoint() const;
    bool is_hermitian(double tol = 1e-12) const;
    CVec apply(const CVec &x) const {
        return matrix_ * x;
    }

    Operator operator+(const Operator &o) const;
    Operator operator-(const Operator &o) const;
    Operator operator*(const Operator &o) const;
    Operator operator*(cplx s) const;

   private:
    HilbertSpace space_;
    SpMat matrix_;
};

inline Operator operator*(cplx s, const Operator &op) {
    return op * s;
}

Operator identity(const HilbertSpace &space);
Operator annihilation(int dim);
Operator number_operator(int dim);
/// |level><level| on a single mode.
Operator fock_projector(int level, int dim);

enum class Level { g = 0, e = 1, f = 2 };
Level parse_level(std::string_view name);
const char *level_name(Level level);

/// |to><from| on a qutrit ordered (g, e, f).
Operator qutrit_transition(Level from, Level to);
Operator qutrit_transition(std::string_view from, std::string_view to);
/// σ_z = σ_e − σ_g.
Operator sigma_z();

/// I ⊗ ... ⊗ op ⊗ ... ⊗ I with op placed on `which`.
Operator embed(const Operator &op, const HilbertSpace &space, std::string_view which);
SpMat embed_matrix(const SpMat &op, const HilbertSpace &space, std::string_view which);
Operator kron(const Operator &a, const Operator &b);

class DensityMatrix;

class StateVector {
   public:
    StateVector(HilbertSpace space, CVec amplitudes, double leakage = 0.0);
    static StateVector basis(const HilbertSpace &space, std::span<const int> levels);

    const HilbertSpace &space() const {
        return space_;
    }
    const CVec &amplitudes() const {
        return amps_;
    }
    /// Probability weight lost to truncation before renormalization.
    double leakage() const {
        return leakage_;
    }
    double norm() const {
        return amps_.norm();
    }
    StateVector normalized() const;
    StateVector with_amplitudes(CVec amps) const;
    cplx inner(const StateVector &other) const;
    double expectation(const Operator &op) const;
    double population(std::string_view label, int level) const;
    DensityMatrix projector() const;

   private:
    HilbertSpace space_;
    CVec amps_;
    double leakage_;
};

StateVector tensor(const StateVector &a, const StateVector &b);
StateVector tensor(std::span<const StateVector> parts);
StateVector fock_state(int n, int dim, std::string label = "mode");
StateVector qutrit_state(Level level, std::string label = "qutrit");

/// Truncated coherent state, renormalized. Throws TruncationError above `leakage_bound`.
StateVector coherent_state(cplx alpha, int dim, double leakage_bound = 1e-6, std::string label = "mode");
/// Coherent-state probability weight above the cutoff: 1 − Σ_{n<dim} P(n).
double coherent_leakage(cplx alpha, int dim);
/// Poisson-tail truncation rule ceil(nbar + 5 sqrt(nbar)) + 4.
int default_truncation(double nbar);

Operator displacement(cplx alpha, int dim);
CMat displacement_matrix(cplx alpha, int dim);

class DensityMatrix {
   public:
    DensityMatrix(HilbertSpace space, CMat matrix);
    static DensityMatrix pure(const StateVector &psi);

    const HilbertSpace &space() const {
        return space_;
    }
    const CMat &matrix() const {
        return rho_;
    }
    cplx trace() const {
        return rho_.trace();
    }
    double purity() const;
    double min_eigenvalue() const;
    bool is_hermitian(double tol = 1e-7) const;
    bool is_valid(double tol = 1e-7) const;
    double expectation(const Operator &op) const;

   private:
    HilbertSpace space_;
    CMat rho_;
};

/// Optional channel for non-fatal numerical warnings.
using Warnings = std::vector<std::string>;

/// sqrt(<psi|rho|psi>), clamped to [0, 1].
double fidelity(const StateVector &psi, const DensityMatrix &rho, Warnings *warnings = nullptr);
/// |<psi|phi>| for pure states.
double fidelity(const StateVector &psi, const StateVector &phi);

DensityMatrix partial_trace(const DensityMatrix &rho, std::span<const std::string> keep);
DensityMatrix reduced_density(const StateVector &psi, std::span<const std::string> keep);

/// Applies `u` (acting on `labels`, in the given order) to psi; identity elsewhere.
CVec apply_local(const HilbertSpace &space, const CVec &psi, const CMat &u, std::span<const std::string> labels);
StateVector apply_local(const StateVector &psi, const CMat &u, std::span<const std::string> labels);

/// Text form: a header naming kind and space, then "row col re im" (or "row re im") lines.
void write_text(std::ostream &out, const Operator &op);
void write_text(std::ostream &out, const StateVector &psi);
void write_text(std::ostream &out, const DensityMatrix &rho);
Operator read_operator_text(std::istream &in);
StateVector read_state_text(std::istream &in);
DensityMatrix read_density_text(std::istream &in);

}  // namespace qtransfer

#endif
