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

#ifndef QTRANSFER_KERNELS_H
#define QTRANSFER_KERNELS_H

#include <vector>

#include "qtransfer/hamiltonian.h"

namespace qtransfer {

/// All terms of a TimeDependentHamiltonian merged into one CSR matrix whose entries carry
/// the index of their oscillation frequency. Evaluating H(t) x costs one pass over the
/// nonzeros plus one complex exponential per distinct frequency.
class CompiledHamiltonian {
   public:
    /// `extra` is an optional time-independent (possibly non-Hermitian) addition.
    explicit CompiledHamiltonian(const TimeDependentHamiltonian &H, const SpMat *extra = nullptr);

    Index dimension() const {
        return dim_;
    }
    std::size_t nonzeros() const {
        return col_.size();
    }
    std::size_t frequency_count() const {
        return freqs_.size();
    }
    double max_frequency() const {
        return max_freq_;
    }

    /// y = M(t) x.
    void apply(double t, const cplx *x, cplx *y) const;
    /// y = M(t) x for every column of x.
    void apply(double t, const CMat &x, CMat &y) const;
    /// M(t) as a sparse matrix with a fixed pattern (values rewritten in place).
    void evaluate(double t, SpMat &out) const;
    const SpMat &pattern() const {
        return pattern_;
    }

   private:
    void phases(double t, std::vector<cplx> &out) const;

    Index dim_;
    double max_freq_ = 0.0;
    std::vector<double> freqs_;
    std::vector<Index> row_ptr_;
    std::vector<Index> col_;
    std::vector<cplx> val_;
    std::vector<int> fidx_;
    std::vector<Index> slot_;
    SpMat pattern_;
};

}  // namespace qtransfer

#endif
