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

// Independent oracles and random instance generators shared by the tests and the acceptance binary.
// Nothing here calls into the library code under test beyond the value types.

#ifndef QTRANSFER_TEST_SUPPORT_H
#define QTRANSFER_TEST_SUPPORT_H

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "qtransfer/hilbert.h"

namespace qtransfer::testing {

inline std::vector<cplx> poisson_amplitudes(cplx alpha, int dim) {
    // c_n = e^{-|a|^2/2} a^n / sqrt(n!), built by the ratio recurrence.
    std::vector<cplx> c(dim);
    c[0] = std::exp(-std::norm(alpha) / 2.0);
    for (int n = 1; n < dim; n++) {
        c[n] = c[n - 1] * alpha / std::sqrt(static_cast<double>(n));
    }
    return c;
}

inline double poisson(double nbar, int n) {
    return std::exp(-nbar + n * std::log(nbar) - std::lgamma(n + 1.0));
}

/// <beta|gamma> for untruncated coherent states.
inline cplx coherent_overlap(cplx beta, cplx gamma) {
    return std::exp(-0.5 * std::norm(beta) - 0.5 * std::norm(gamma) + std::conj(beta) * gamma);
}

inline CMat dense_annihilation(int dim) {
    CMat a = CMat::Zero(dim, dim);
    for (int n = 1; n < dim; n++) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

inline CMat kron(const CMat &a, const CMat &b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); i++) {
        for (Index j = 0; j < a.cols(); j++) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Dense embedding I ⊗ .. ⊗ op ⊗ .. ⊗ I written independently of the library.
inline CMat embed_dense(const CMat &op, const std::vector<int> &dims, std::size_t pos) {
    CMat out = CMat::Identity(1, 1);
    for (std::size_t k = 0; k < dims.size(); k++) {
        out = kron(out, k == pos ? op : CMat(CMat::Identity(dims[k], dims[k])));
    }
    return out;
}

/// Vectorized Lindblad generator (column stacking): vec(AXB) = (B^T ⊗ A) vec(X).
inline CMat liouvillian(const CMat &H, const std::vector<CMat> &L) {
    const Index d = H.rows();
    CMat I = CMat::Identity(d, d);
    CMat out = -kI * (kron(I, H) - kron(H.transpose(), I));
    for (const auto &l : L) {
        CMat ldl = l.adjoint() * l;
        out += kron(l.conjugate(), l) - 0.5 * kron(I, ldl) - 0.5 * kron(ldl.transpose(), I);
    }
    return out;
}

inline CMat expm(const CMat &m) {
    return m.exp();
}

class Rng {
   public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {
    }
    double uniform(double a = 0.0, double b = 1.0) {
        return std::uniform_real_distribution<double>(a, b)(gen_);
    }
    int integer(int a, int b) {
        return std::uniform_int_distribution<int>(a, b)(gen_);
    }
    cplx gaussian() {
        std::normal_distribution<double> n(0.0, 1.0);
        return {n(gen_), n(gen_)};
    }
    CVec state(Index d) {
        CVec v(d);
        for (Index k = 0; k < d; k++) {
            v[k] = gaussian();
        }
        return v / v.norm();
    }
    CMat matrix(Index d) {
        CMat m(d, d);
        for (Index i = 0; i < d; i++) {
            for (Index j = 0; j < d; j++) {
                m(i, j) = gaussian();
            }
        }
        return m;
    }
    CMat hermitian(Index d) {
        CMat m = matrix(d);
        return 0.5 * (m + m.adjoint());
    }
    /// Random density matrix of rank <= r.
    CMat density(Index d, Index r) {
        CMat a(d, r);
        for (Index i = 0; i < d; i++) {
            for (Index j = 0; j < r; j++) {
                a(i, j) = gaussian();
            }
        }
        CMat rho = a * a.adjoint();
        return rho / rho.trace().real();
    }
    std::mt19937_64 &engine() {
        return gen_;
    }

   private:
    std::mt19937_64 gen_;
};

inline SpMat sparse(const CMat &m) {
    SpMat s = m.sparseView();
    return s;
}

}  // namespace qtransfer::testing

#endif
