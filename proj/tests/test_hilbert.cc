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

#include <gtest/gtest.h>

#include <sstream>

#include "qtransfer/hilbert.h"
#include "test_support.h"

namespace qt = qtransfer;
using qt::CMat;
using qt::CVec;
using qt::cplx;

namespace {

std::vector<std::string> labels(std::initializer_list<const char *> l) {
    return {l.begin(), l.end()};
}

TEST(HilbertSpace, DimensionsAndIndexing) {
    qt::HilbertSpace s({3, 2, 4}, labels({"qutrit", "c1", "c1p"}));
    EXPECT_EQ(s.dimension(), 24);
    EXPECT_EQ(s.position("c1"), 1u);
    std::vector<int> lv{2, 1, 3};
    qt::Index flat = s.index_of(lv);
    EXPECT_EQ(flat, 2 * 8 + 1 * 4 + 3);
    EXPECT_EQ(s.levels_of(flat), lv);
}

TEST(HilbertSpace, RejectsBadShapes) {
    EXPECT_THROW(qt::HilbertSpace({}, {}), qt::InvalidDimension);
    EXPECT_THROW(qt::HilbertSpace({1, 2}, labels({"a", "b"})), qt::InvalidDimension);
    EXPECT_THROW(qt::HilbertSpace({2, 2}, labels({"a", "a"})), qt::Error);
    EXPECT_THROW(qt::HilbertSpace({2, 2}, labels({"a"})), qt::Error);
    qt::HilbertSpace s({2, 3}, labels({"a", "b"}));
    EXPECT_THROW(s.position("zz"), qt::UnknownLabel);
}

TEST(Annihilation, TwoLevel) {
    CMat a = qt::annihilation(2).dense();
    CMat expect(2, 2);
    expect << 0, 1, 0, 0;
    EXPECT_LT((a - expect).norm(), 1e-15);
}

TEST(Annihilation, SqrtRule) {
    CMat a = qt::annihilation(3).dense();
    EXPECT_DOUBLE_EQ(a(0, 1).real(), 1.0);
    EXPECT_DOUBLE_EQ(a(1, 2).real(), std::sqrt(2.0));
    EXPECT_EQ(qt::annihilation(3).matrix().nonZeros(), 2);
    EXPECT_THROW(qt::annihilation(1), qt::InvalidDimension);
}

TEST(Annihilation, NumberOperatorOnFock) {
    auto n = qt::annihilation(8).adjoint() * qt::annihilation(8);
    auto five = qt::fock_state(5, 8);
    CVec out = n.apply(five.amplitudes());
    EXPECT_LT((out - 5.0 * five.amplitudes()).norm(), 1e-14);
}

TEST(Qutrit, TransitionEntries) {
    CMat eg = qt::qutrit_transition(qt::Level::g, qt::Level::e).dense();
    EXPECT_EQ(eg(1, 0), cplx(1.0));
    EXPECT_NEAR(eg.cwiseAbs().sum(), 1.0, 0.0);
    CMat ee = qt::qutrit_transition("e", "e").dense();
    EXPECT_EQ(ee(1, 1), cplx(1.0));
    EXPECT_NEAR(ee.cwiseAbs().sum(), 1.0, 0.0);
    EXPECT_THROW(qt::qutrit_transition("g", "x"), qt::Error);
}

TEST(Qutrit, SigmaZ) {
    CMat z = qt::sigma_z().dense();
    CMat expect = CMat::Zero(3, 3);
    expect(0, 0) = -1.0;
    expect(1, 1) = 1.0;
    EXPECT_LT((z - expect).norm(), 0.0 + 1e-300);
}

TEST(Embed, MatchesKron) {
    qt::HilbertSpace s({3, 2}, labels({"q", "c"}));
    CMat e = qt::embed(qt::annihilation(2), s, "c").dense();
    CMat expect = qt::testing::kron(CMat::Identity(3, 3), qt::testing::dense_annihilation(2));
    EXPECT_EQ(e.rows(), 6);
    EXPECT_LT((e - expect).norm(), 1e-15);
}

TEST(Embed, DisjointSubsystemsCommute) {
    qt::HilbertSpace s({3, 3, 4}, labels({"q", "c1", "c2"}));
    qt::testing::Rng rng(7);
    qt::Operator A(qt::HilbertSpace::single(3, "c1"), qt::testing::sparse(rng.matrix(3)));
    qt::Operator B(qt::HilbertSpace::single(4, "c2"), qt::testing::sparse(rng.matrix(4)));
    CMat a = qt::embed(A, s, "c1").dense();
    CMat b = qt::embed(B, s, "c2").dense();
    EXPECT_LT((a * b - b * a).norm(), 1e-12);
}

TEST(Embed, ExpectationOfNumberOnCoherentState) {
    // <n> for |1.86>: direct sum of n P(n) over the truncated, renormalized Poisson weights.
    const cplx alpha = 1.86;
    const int dim = 40;
    auto c = qt::testing::poisson_amplitudes(alpha, dim);
    double norm = 0.0, mean = 0.0;
    for (int n = 0; n < dim; n++) {
        norm += std::norm(c[n]);
        mean += n * std::norm(c[n]);
    }
    double oracle = mean / norm;
    qt::HilbertSpace s({3, dim}, labels({"qutrit", "c1p"}));
    auto psi = qt::tensor(qt::qutrit_state(qt::Level::g), qt::coherent_state(alpha, dim, 1e-6, "c1p"));
    double got = psi.expectation(qt::embed(qt::number_operator(dim), psi.space(), "c1p"));
    EXPECT_NEAR(got, oracle, 1e-12);
    EXPECT_NEAR(got, 3.4596, 1e-9 + qt::coherent_leakage(alpha, dim) * dim);
}

TEST(Embed, DimensionMismatchThrows) {
    qt::HilbertSpace s({3, 2}, labels({"q", "c"}));
    EXPECT_THROW(qt::embed(qt::annihilation(3), s, "c"), qt::Error);
    EXPECT_THROW(qt::embed(qt::annihilation(2), s, "nope"), qt::UnknownLabel);
}

TEST(Coherent, OverlapOfOppositeAmplitudes) {
    // |<a|-a>| = e^{-2|a|^2} ~ 9.90e-4 at a = 1.86.
    auto plus = qt::coherent_state(1.86, 40);
    auto minus = qt::coherent_state(-1.86, 40);
    double ov = std::abs(plus.inner(minus));
    EXPECT_NEAR(ov, std::exp(-2.0 * 1.86 * 1.86), 1e-5);
    EXPECT_NEAR(ov, 9.90e-4, 1e-5);
}

TEST(Coherent, VacuumAtZero) {
    auto z = qt::coherent_state(0.0, 6);
    EXPECT_EQ(z.amplitudes()[0], cplx(1.0));
    EXPECT_EQ(z.amplitudes().tail(5).norm(), 0.0);
    EXPECT_EQ(z.leakage(), 0.0);
}

TEST(Coherent, MeanPhotonNumberOfDoubledAmplitude) {
    const int dim = qt::default_truncation(4 * 1.86 * 1.86);
    auto s = qt::coherent_state(2.0 * 1.86, dim);
    double nbar = s.expectation(qt::number_operator(dim));
    EXPECT_NEAR(nbar, 13.8384, 2e-3);
}

TEST(Coherent, AmplitudesMatchOracle) {
    const cplx alpha(0.7, -1.1);
    auto s = qt::coherent_state(alpha, 30);
    auto c = qt::testing::poisson_amplitudes(alpha, 30);
    double nrm = 0.0;
    for (auto x : c) {
        nrm += std::norm(x);
    }
    for (int n = 0; n < 30; n++) {
        EXPECT_NEAR(std::abs(s.amplitudes()[n] - c[n] / std::sqrt(nrm)), 0.0, 1e-13);
    }
    EXPECT_NEAR(s.leakage(), 1.0 - nrm, 1e-13);
}

TEST(Coherent, TruncationErrorCarriesLeakage) {
    try {
        qt::coherent_state(3.0, 8, 1e-6);
        FAIL() << "expected TruncationError";
    } catch (const qt::TruncationError &e) {
        EXPECT_NEAR(e.leakage(), qt::coherent_leakage(3.0, 8), 1e-12);
        EXPECT_GT(e.leakage(), 1e-6);
    }
}

TEST(Coherent, LeakageMonotoneInDimension) {
    for (double a : {0.5, 1.2, 1.86, 2.4, 3.72}) {
        double prev = 1.0;
        for (int d = 2; d < 60; d++) {
            double l = qt::coherent_leakage(a, d);
            EXPECT_LE(l, prev) << "alpha " << a << " dim " << d;
            prev = l;
        }
    }
}

TEST(Coherent, DefaultTruncationRule) {
    // ceil(nbar + 5 sqrt(nbar)) + 4
    EXPECT_EQ(qt::default_truncation(0.0), 4);
    EXPECT_EQ(qt::default_truncation(1.0), 10);
    EXPECT_EQ(qt::default_truncation(4 * 1.44), 22);
    EXPECT_EQ(qt::default_truncation(1.44), 12);
    EXPECT_EQ(qt::default_truncation(4 * 1.86 * 1.86), 37);
    EXPECT_EQ(qt::default_truncation(1.86 * 1.86), 17);
}

TEST(Displacement, ZeroPhaseOnOppositeState) {
    const double a = 1.3;
    const int dim = 40;
    CMat D = qt::displacement_matrix(a, dim);
    CVec out = D * qt::coherent_state(-a, dim).amplitudes();
    EXPECT_NEAR(out[0].real(), 1.0, 1e-9);
    EXPECT_NEAR(out[0].imag(), 0.0, 1e-12);
}

TEST(Displacement, BackFromDoubled) {
    const double a = 1.86;
    const int dim = 45;
    CVec out = qt::displacement_matrix(-a, dim) * qt::coherent_state(2 * a, dim).amplitudes();
    cplx ov = qt::coherent_state(a, dim).amplitudes().dot(out);
    EXPECT_NEAR(std::abs(ov), 1.0, 1e-8);
    EXPECT_NEAR(ov.imag(), 0.0, 1e-8);
}

TEST(Displacement, InverseOnLowSubspace) {
    const int dim = 30;
    CMat P = qt::displacement_matrix(1.0, dim) * qt::displacement_matrix(-1.0, dim);
    CMat low = P.topLeftCorner(10, 10) - CMat::Identity(10, 10);
    EXPECT_LT(low.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Displacement, VacuumGivesPoisson) {
    for (double a : {0.3, 1.0, 1.86}) {
        const int dim = 40;
        CVec v = qt::displacement_matrix(a, dim).col(0);
        int nmax = static_cast<int>(dim - 5.0 * std::sqrt(a * a));
        for (int n = 0; n <= nmax; n++) {
            EXPECT_NEAR(std::norm(v[n]), qt::testing::poisson(a * a, n), 1e-6) << a << " " << n;
        }
    }
}

TEST(Fidelity, Examples) {
    qt::HilbertSpace s({2, 2}, labels({"a", "b"}));
    std::vector<int> l00{0, 0}, l11{1, 1};
    auto psi = qt::StateVector::basis(s, l00);
    auto phi = qt::StateVector::basis(s, l11);
    EXPECT_DOUBLE_EQ(qt::fidelity(psi, qt::DensityMatrix::pure(psi)), 1.0);
    EXPECT_DOUBLE_EQ(qt::fidelity(psi, qt::DensityMatrix::pure(phi)), 0.0);
    CMat mix = 0.5 * qt::DensityMatrix::pure(psi).matrix() + 0.5 * qt::DensityMatrix::pure(phi).matrix();
    EXPECT_NEAR(qt::fidelity(psi, qt::DensityMatrix(s, mix)), std::sqrt(0.5), 1e-15);
}

TEST(Fidelity, ImaginaryExpectationIsAnError) {
    qt::HilbertSpace s({2, 2}, labels({"a", "b"}));
    CMat bad = CMat::Zero(4, 4);
    bad(0, 0) = cplx(0.5, 1e-3);
    bad(1, 1) = 0.5;
    std::vector<int> l00{0, 0};
    EXPECT_THROW(qt::fidelity(qt::StateVector::basis(s, l00), qt::DensityMatrix(s, bad)), qt::Error);
}

TEST(Fidelity, ClampWarns) {
    qt::HilbertSpace s({2}, labels({"a"}));
    CMat rho = CMat::Zero(2, 2);
    rho(0, 0) = 1.0 + 1e-6;
    qt::Warnings w;
    std::vector<int> l0{0};
    EXPECT_EQ(qt::fidelity(qt::StateVector::basis(s, l0), qt::DensityMatrix(s, rho), &w), 1.0);
    EXPECT_EQ(w.size(), 1u);
}

TEST(Fidelity, PureStatesGiveOverlapModulus) {
    qt::testing::Rng rng(11);
    qt::HilbertSpace s({3, 4}, labels({"a", "b"}));
    for (int k = 0; k < 20; k++) {
        qt::StateVector a(s, rng.state(12)), b(s, rng.state(12));
        EXPECT_NEAR(qt::fidelity(a, qt::DensityMatrix::pure(b)), std::abs(a.inner(b)), 1e-12);
        EXPECT_NEAR(qt::fidelity(a, b), std::abs(a.inner(b)), 1e-12);
    }
}

TEST(PartialTrace, ProductState) {
    qt::testing::Rng rng(3);
    CMat ra = rng.density(3, 2), rb = rng.density(4, 3);
    qt::HilbertSpace s({3, 4}, labels({"A", "B"}));
    qt::DensityMatrix rho(s, qt::testing::kron(ra, rb));
    std::vector<std::string> keepA{"A"}, keepB{"B"};
    EXPECT_LT((qt::partial_trace(rho, keepA).matrix() - ra).norm(), 1e-13);
    EXPECT_LT((qt::partial_trace(rho, keepB).matrix() - rb).norm(), 1e-13);
    EXPECT_THROW(qt::partial_trace(rho, std::vector<std::string>{"C"}), qt::UnknownLabel);
}

TEST(PartialTrace, BellStateIsMaximallyMixed) {
    qt::HilbertSpace s({2, 2}, labels({"A", "B"}));
    CVec v = CVec::Zero(4);
    v[0] = v[3] = 1.0 / std::sqrt(2.0);
    std::vector<std::string> keep{"A"};
    auto r = qt::reduced_density(qt::StateVector(s, v), keep);
    EXPECT_LT((r.matrix() - 0.5 * CMat::Identity(2, 2)).norm(), 1e-15);
}

TEST(PartialTrace, CatRegisterIsPure) {
    // |g>|0>|-> (c|a,a> + d|-a,-a>) traced to the cat cavities: pure up to the overlap terms.
    const double a = 1.86;
    const int dim = 17;
    qt::HilbertSpace s({3, 3, 3, dim, dim}, labels({"qutrit", "c1", "c2", "c1p", "c2p"}));
    auto g = qt::qutrit_state(qt::Level::g);
    auto zero = qt::fock_state(0, 3, "c1");
    CVec m(3);
    m << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0;
    qt::StateVector minus(qt::HilbertSpace::single(3, "c2"), m);
    auto pa = qt::coherent_state(a, dim, 1e-4, "c1p");
    auto ma = qt::coherent_state(-a, dim, 1e-4, "c1p");
    auto pb = qt::coherent_state(a, dim, 1e-4, "c2p");
    auto mb = qt::coherent_state(-a, dim, 1e-4, "c2p");
    const double c = 1.0 / std::sqrt(2.0);
    CVec cat = c * qt::tensor(pa, pb).amplitudes() + c * qt::tensor(ma, mb).amplitudes();
    qt::StateVector reg(pa.space().concat(pb.space()), cat / cat.norm());
    std::vector<qt::StateVector> parts{g, zero, minus, reg};
    auto full = qt::tensor(parts);
    std::vector<std::string> keep{"c1p", "c2p"};
    double purity = qt::reduced_density(full, keep).purity();
    EXPECT_GE(purity, 1.0 - 2.0 * std::exp(-2.0 * a * a));
    EXPECT_NEAR(purity, 1.0, 1e-12);
}

TEST(Commutator, CanonicalBelowTopLevel) {
    for (int dim = 2; dim <= 20; dim++) {
        CMat a = qt::annihilation(dim).dense();
        CMat comm = a.adjoint() * a - a * a.adjoint();
        CMat low = comm.topLeftCorner(dim - 1, dim - 1) + CMat::Identity(dim - 1, dim - 1);
        EXPECT_LT(low.norm(), 1e-13) << dim;
        EXPECT_GT(std::abs(comm(dim - 1, dim - 1) + 1.0), 0.5) << "truncation must show in the top level";
    }
}

TEST(Embed, PreservesSpectrum) {
    qt::testing::Rng rng(5);
    for (int trial = 0; trial < 10; trial++) {
        int d = rng.integer(2, 4);
        CMat A = rng.hermitian(d);
        std::vector<int> dims{2, d, 3};
        qt::HilbertSpace s(dims, labels({"x", "y", "z"}));
        CMat E = qt::embed(qt::Operator(qt::HilbertSpace::single(d, "y"), qt::testing::sparse(A)), s, "y").dense();
        Eigen::VectorXd ea = Eigen::SelfAdjointEigenSolver<CMat>(A).eigenvalues();
        Eigen::VectorXd ee = Eigen::SelfAdjointEigenSolver<CMat>(E).eigenvalues();
        for (int k = 0; k < ee.size(); k++) {
            EXPECT_NEAR(ee[k], ea[k / 6], 1e-12);
        }
    }
}

TEST(TextForm, RoundTrip) {
    qt::testing::Rng rng(9);
    qt::HilbertSpace s({3, 2}, labels({"qutrit", "c1"}));
    qt::StateVector psi(s, rng.state(6));
    std::stringstream buf;
    qt::write_text(buf, psi);
    auto back = qt::read_state_text(buf);
    EXPECT_TRUE(back.space() == s);
    EXPECT_LT((back.amplitudes() - psi.amplitudes()).norm(), 1e-15);

    qt::Operator op = qt::embed(qt::annihilation(2), s, "c1");
    std::stringstream b2;
    qt::write_text(b2, op);
    auto op2 = qt::read_operator_text(b2);
    EXPECT_LT((op2.dense() - op.dense()).norm(), 1e-15);

    qt::DensityMatrix rho(s, rng.density(6, 2));
    std::stringstream b3;
    qt::write_text(b3, rho);
    EXPECT_LT((qt::read_density_text(b3).matrix() - rho.matrix()).norm(), 1e-15);
}

TEST(StateVector, NormalizeAndPopulation) {
    qt::testing::Rng rng(1);
    qt::HilbertSpace s({3, 3}, labels({"qutrit", "c1"}));
    qt::StateVector psi(s, 3.0 * rng.state(9));
    auto n = psi.normalized();
    EXPECT_NEAR(n.norm(), 1.0, 1e-12);
    double total = n.population("qutrit", 0) + n.population("qutrit", 1) + n.population("qutrit", 2);
    EXPECT_NEAR(total, 1.0, 1e-12);
}

}  // namespace
