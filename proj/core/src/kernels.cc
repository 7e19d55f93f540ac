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

#include "qtransfer/kernels.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace qtransfer {

namespace {

struct Entry {
    Index row;
    Index col;
    int f;
    cplx v;
};

}  // namespace

CompiledHamiltonian::CompiledHamiltonian(const TimeDependentHamiltonian &H, const SpMat *extra)
    : dim_(H.space().dimension()) {
    std::map<double, int> fmap;
    auto freq_index = [&](double nu) {
        auto it = fmap.find(nu);
        if (it != fmap.end()) {
            return it->second;
        }
        int k = static_cast<int>(freqs_.size());
        fmap.emplace(nu, k);
        freqs_.push_back(nu);
        return k;
    };
    std::vector<Entry> entries;
    auto push = [&](const SpMat &m, int f) {
        for (Index r = 0; r < m.outerSize(); r++) {
            for (SpMat::InnerIterator it(m, r); it; ++it) {
                if (it.value() != cplx(0.0)) {
                    entries.push_back({it.row(), it.col(), f, it.value()});
                }
            }
        }
    };
    int f0 = freq_index(0.0);
    for (const auto &s : H.static_terms()) {
        push(s.H, f0);
    }
    if (extra) {
        if (extra->rows() != dim_ || extra->cols() != dim_) {
            throw InvalidDimension("CompiledHamiltonian: extra term has the wrong shape");
        }
        push(*extra, f0);
    }
    for (const auto &k : H.terms()) {
        push(k.A, freq_index(k.nu));
        push(SpMat(k.A.adjoint()), freq_index(-k.nu));
        max_freq_ = std::max(max_freq_, std::abs(k.nu));
    }
    std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
        return std::tie(a.row, a.col, a.f) < std::tie(b.row, b.col, b.f);
    });
    std::vector<Entry> merged;
    for (const auto &e : entries) {
        if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col && merged.back().f == e.f) {
            merged.back().v += e.v;
        } else {
            merged.push_back(e);
        }
    }
    row_ptr_.assign(static_cast<std::size_t>(dim_) + 1, 0);
    std::vector<Eigen::Triplet<cplx>> pattern_trips;
    for (const auto &e : merged) {
        row_ptr_[static_cast<std::size_t>(e.row) + 1]++;
        col_.push_back(e.col);
        val_.push_back(e.v);
        fidx_.push_back(e.f);
        if (pattern_trips.empty() || pattern_trips.back().row() != e.row || pattern_trips.back().col() != e.col) {
            pattern_trips.emplace_back(e.row, e.col, cplx(1.0));
        }
        slot_.push_back(static_cast<Index>(pattern_trips.size()) - 1);
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(dim_); r++) {
        row_ptr_[r + 1] += row_ptr_[r];
    }
    pattern_.resize(dim_, dim_);
    pattern_.setFromTriplets(pattern_trips.begin(), pattern_trips.end());
    pattern_.makeCompressed();
    // setFromTriplets on sorted, unique triplets keeps their order, so slot k is valuePtr()[k].
}

void CompiledHamiltonian::phases(double t, std::vector<cplx> &out) const {
    out.resize(freqs_.size());
    for (std::size_t k = 0; k < freqs_.size(); k++) {
        double a = freqs_[k] * t;
        out[k] = cplx(std::cos(a), std::sin(a));
    }
}

void CompiledHamiltonian::apply(double t, const cplx *x, cplx *y) const {
    thread_local std::vector<cplx> ph;
    phases(t, ph);
    const Index *rp = row_ptr_.data();
    const Index *cp = col_.data();
    const cplx *vp = val_.data();
    const int *fp = fidx_.data();
    const cplx *php = ph.data();
    for (Index r = 0; r < dim_; r++) {
        cplx acc = 0.0;
        for (Index k = rp[r]; k < rp[r + 1]; k++) {
            acc += vp[k] * php[fp[k]] * x[cp[k]];
        }
        y[r] = acc;
    }
}

void CompiledHamiltonian::apply(double t, const CMat &x, CMat &y) const {
    y.resize(dim_, x.cols());
    for (Index c = 0; c < x.cols(); c++) {
        apply(t, x.col(c).data(), y.col(c).data());
    }
}

void CompiledHamiltonian::evaluate(double t, SpMat &out) const {
    if (out.rows() != dim_ || out.nonZeros() != pattern_.nonZeros()) {
        out = pattern_;
    }
    thread_local std::vector<cplx> ph;
    phases(t, ph);
    cplx *dst = out.valuePtr();
    std::fill(dst, dst + out.nonZeros(), cplx(0.0));
    for (std::size_t k = 0; k < val_.size(); k++) {
        dst[slot_[k]] += val_[k] * ph[static_cast<std::size_t>(fidx_[k])];
    }
}

}  // namespace qtransfer
