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

#include "qtransfer/hamiltonian.h"
#include "test_support.h"

namespace qt = qtransfer;
using qt::CMat;
using qt::cplx;

namespace {

qt::DeviceParams small_device(double alpha = 0.6) {
    auto p = qt::reference_device();
    p.alpha = alpha;
    return p;
}

qt::HilbertSpace small_space(const qt::DeviceParams &) {
    return qt::HilbertSpace({3, 3, 3, 6, 5}, {"qutrit", "c1", "c2", "c1p", "c2p"});
}

qt::Index idx(const qt::HilbertSpace &s, std::vector<int> lv) {
    return s.index_of(lv);
}

const qt::OscillatingTerm &term(const qt::TimeDependentHamiltonian &H, const std::string &tag) {
    for (const auto &t : H.terms()) {
        if (t.tag == tag) {
            return t;
        }
    }
    throw std::runtime_error("no term " + tag);
}

TEST(Device, DispersiveMarginsAtDeviceValues) {
    auto r = qt::validate_dispersive(qt::reference_device());
    EXPECT_NEAR(r.find("|Delta_c2|/g_c2").ratio, 250.0 / 12.03, 1e-9);
    EXPECT_NEAR(r.find("|Delta_c2|/g_c2").ratio, 20.8, 0.05);
    EXPECT_TRUE(r.find("|Delta_c2|/g_c2").pass);
    EXPECT_NEAR(r.find("|Delta_tilde|/g_tilde").ratio, 6.64, 0.005);
    EXPECT_FALSE(r.find("|Delta_tilde|/g_tilde").pass);
    EXPECT_FALSE(r.all_pass());
}

TEST(Device, ZeroCouplingsGiveInfiniteMargins) {
    auto p = qt::reference_device();
    for (auto &[l, v] : p.g) {
        v = 0.0;
    }
    for (auto &[l, v] : p.mu) {
        v = 0.0;
    }
    p.g_tilde = 0.0;
    p.Omega_p = 0.0;
    auto r = qt::validate_dispersive(p);
    for (const auto &m : r.margins) {
        EXPECT_TRUE(std::isinf(m.ratio)) << m.name;
        EXPECT_TRUE(m.pass);
    }
}

TEST(Device, MatchingAtDeviceValues) {
    auto p = qt::reference_device();
    EXPECT_NEAR(p.mu.at("c1p"), p.g.at("c2") / std::sqrt(2.0), 1e-9 * p.g.at("c2"));
    EXPECT_NEAR(p.mu.at("c2p"), p.g.at("c2") / std::sqrt(2.0), 1e-9 * p.g.at("c2"));
    auto m = qt::check_matching(p);
    EXPECT_TRUE(m.matched);
    double lam = qt::mhz(12.03) * qt::mhz(12.03) / qt::mhz(250.0);
    EXPECT_NEAR(m.lambda_ref, lam, 1e-12 * lam);
    EXPECT_NEAR(qt::to_mhz(lam), 0.578884, 1e-6);
}

TEST(Device, MatchingDetectsOnePercentCoupling) {
    auto p = qt::reference_device();
    p.mu["c1p"] *= 1.01;
    auto m = qt::check_matching(p);
    EXPECT_FALSE(m.matched);
    double worst = 0.0;
    for (const auto &[l, r] : m.residuals) {
        worst = std::max(worst, std::abs(r));
    }
    EXPECT_NEAR(worst, 1.01 * 1.01 - 1.0, 1e-9);
}

TEST(Device, MatchingSensitiveToEveryCoupling) {
    for (const std::string which : {"g:c2", "mu:c1p", "mu:c2p"}) {
        auto p = qt::reference_device();
        auto &map = which[0] == 'g' ? p.g : p.mu;
        map[which.substr(which.find(':') + 1)] *= 1.0011;
        EXPECT_FALSE(qt::check_matching(p).matched) << which;
    }
}

TEST(Device, MatchingVacuousForSinglePair) {
    auto p = qt::reference_device();
    p.n = 1;
    p.omega_c.erase("c2");
    p.omega_c.erase("c2p");
    p.g.clear();
    p.mu.erase("c2p");
    p.kappa.erase("c2");
    p.kappa.erase("c2p");
    p.sync_detunings();
    EXPECT_TRUE(qt::check_matching(p).matched);
}

TEST(Device, DerivedQuantities) {
    auto p = qt::reference_device();
    auto d = qt::derive(p);
    EXPECT_NEAR(qt::to_mhz(d.omega_tilde), 24.1 * 24.1 / 320.0, 1e-9);
    EXPECT_NEAR(qt::to_mhz(d.omega_tilde), 1.8153, 1e-3);
    EXPECT_NEAR(d.nbar, 13.8384, 1e-12);
    EXPECT_NEAR(qt::to_mhz(qt::omega_p_required(p, 1)), 24.1 * 24.1 / (4.0 * 160.0), 1e-9);
    EXPECT_NEAR(qt::to_mhz(qt::omega_p_required(p, 2)), 0.454, 5e-4);
    EXPECT_NEAR(qt::to_us(d.t_op), 1.41, 0.05 * 1.41);
}

TEST(Device, DerivedIsBitIdentical) {
    auto p = qt::reference_device();
    auto a = qt::derive(p);
    auto b = qt::derive(p);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(a.lambda_p, b.lambda_p);
    EXPECT_EQ(a.omega_tilde, b.omega_tilde);
    EXPECT_EQ(a.t_op, b.t_op);
    EXPECT_EQ(a.Omega_p_required, b.Omega_p_required);
}

TEST(Device, ValidateCatchesInconsistencies) {
    auto p = qt::reference_device();
    p.Delta["c2"] += qt::mhz(1.0);
    EXPECT_THROW(p.validate(), qt::ConfigError);
    p = qt::reference_device();
    p.c_amp = 0.9;
    EXPECT_THROW(p.validate(), qt::ConfigError);
    p = qt::reference_device();
    p.gamma_eg = -1.0;
    EXPECT_THROW(p.validate(), qt::ConfigError);
    EXPECT_NO_THROW(qt::reference_device().validate());
}

TEST(Device, QualityFactors) {
    auto p = qt::reference_device();
    auto q = qt::quality_factors(p);
    EXPECT_NEAR(q.at("c1"), 3.14e6, 0.01e6);
    EXPECT_NEAR(q.at("c2"), 1.27e7, 0.01e7);
    qt::apply_uniform_kappa(p, 2.0 / qt::us(100.0));
    EXPECT_NEAR(qt::quality_factors(p).at("c1"), q.at("c1") / 2.0, 1e-6 * q.at("c1"));
    p.kappa["c2"] = 0.0;
    EXPECT_TRUE(std::isinf(qt::quality_factors(p).at("c2")));
}

TEST(Device, CoherenceTimeRule) {
    auto p = qt::reference_device();
    qt::apply_coherence_time(p, qt::us(10.0));
    EXPECT_NEAR(1.0 / p.gamma_eg, qt::us(40.0), 1e-18);
    EXPECT_NEAR(1.0 / p.gamma_fe, qt::us(20.0), 1e-18);
    EXPECT_NEAR(1.0 / p.gamma_fg, qt::us(10.0), 1e-18);
}

TEST(Collapse, CountAndRates) {
    auto p = small_device();
    auto s = small_space(p);
    auto c = qt::collapse_operators(p, s);
    EXPECT_EQ(c.size(), 9u);
    for (const auto &op : c) {
        EXPECT_GT(op.rate, 0.0);
    }
}

TEST(Collapse, ZeroRatesGiveEmptyList) {
    auto p = small_device();
    p.kappa.clear();
    p.gamma_eg = p.gamma_fe = p.gamma_fg = p.gamma_e_phi = p.gamma_f_phi = 0.0;
    EXPECT_TRUE(qt::collapse_operators(p, small_space(p)).empty());
    p.gamma_fe = -1.0;
    EXPECT_THROW(qt::collapse_operators(p, small_space(p)), qt::ConfigError);
}

TEST(H1, ElementsAndVacuum) {
    auto p = small_device();
    qt::HilbertSpace s({3, 4}, {"qutrit", "c1"});
    auto H = qt::build_H1(p, s);
    CMat h = CMat(H.at(0.0));
    EXPECT_NEAR(std::abs(h(idx(s, {1, 0}), idx(s, {0, 1})) - p.g_r), 0.0, 1e-6);
    EXPECT_NEAR(h.col(idx(s, {0, 0})).norm(), 0.0, 0.0);
    EXPECT_LT((h - h.adjoint()).norm(), 1e-9);
}

TEST(H2, StructureAndElement) {
    auto p = small_device();
    auto s = small_space(p);
    auto H = qt::build_H2(p, s);
    EXPECT_EQ(H.oscillating_count(), 2u * (p.n - 1) + 2u * p.n);
    CMat h = CMat(H.at(0.0));
    EXPECT_NEAR(std::abs(h(idx(s, {2, 0, 0, 0, 0}), idx(s, {0, 0, 1, 0, 0})) - p.g.at("c2")), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(h(idx(s, {2, 0, 0, 0, 0}), idx(s, {1, 0, 0, 1, 0})) - p.mu.at("c1p")), 0.0, 1e-6);
}

TEST(H2, ZeroMuLeavesOnlyTheGSum) {
    auto p = small_device();
    for (auto &[l, v] : p.mu) {
        v = 0.0;
    }
    auto H = qt::build_H2(p, small_space(p));
    for (const auto &t : H.terms()) {
        EXPECT_EQ(t.tag.rfind("g ", 0), 0u) << t.tag;
    }
}

TEST(H2, ZeroDetuningRejected) {
    auto p = small_device();
    p.omega_c["c2"] = p.omega_fg;
    p.sync_detunings();
    EXPECT_THROW(qt::build_H2(p, small_space(p)), qt::ConfigError);
}

TEST(H2Full, TermsAndDetunings) {
    auto p = small_device();
    auto s = small_space(p);
    auto H = qt::build_H2_full(p, s);
    int couplings = 0, crosstalk = 0;
    for (const auto &t : H.terms()) {
        (t.tag.rfind("xt ", 0) == 0 ? crosstalk : couplings)++;
    }
    EXPECT_EQ(couplings, 9);
    EXPECT_EQ(crosstalk, 6);
    EXPECT_NEAR(qt::to_ghz(term(H, "g' c2 fe").nu), -8.25, 1e-12);
    EXPECT_NEAR(qt::to_ghz(term(H, "g'' c2 eg").nu), -12.25, 1e-12);
    EXPECT_NEAR(qt::to_ghz(term(H, "xt c1p-c2p").nu), 0.25, 1e-12);
    p.n = 3;
    EXPECT_THROW(qt::build_H2_full(p, s), qt::Error);
}

TEST(H2Full, ReducesToH2WhenExtrasZeroed) {
    auto p = small_device();
    p.unwanted.enabled = false;
    p.crosstalk.enabled = false;
    auto s = small_space(p);
    auto a = qt::build_H2_full(p, s);
    auto b = qt::build_H2(p, s);
    for (double t : {0.0, 1e-9, 7e-9, 3.3e-7}) {
        EXPECT_LT(CMat(a.at(t) - b.at(t)).norm(), 1e-6) << t;
    }
}

TEST(H2Full, UnwantedDefaultsFollowDipoleRule) {
    auto p = small_device();
    auto u = qt::resolve_unwanted(p);
    EXPECT_DOUBLE_EQ(u.g_prime.at("c2"), p.g.at("c2"));
    EXPECT_DOUBLE_EQ(u.g_dprime.at("c2"), 0.25 * p.g.at("c2"));
    EXPECT_DOUBLE_EQ(u.mu_prime.at("c1p"), p.mu.at("c1p"));
    EXPECT_DOUBLE_EQ(u.mu_dprime.at("c2p"), 0.25 * p.mu.at("c2p"));
    EXPECT_DOUBLE_EQ(u.g_tilde_prime, 4.0 * p.g_tilde);
    EXPECT_DOUBLE_EQ(u.g_tilde_dprime, 4.0 * p.g_tilde);
    EXPECT_DOUBLE_EQ(u.Omega_p_prime, 4.0 * p.Omega_p);
    EXPECT_DOUBLE_EQ(u.Omega_p_dprime, 4.0 * p.Omega_p);
    p.unwanted.g_prime["c2"] = 1.0;
    EXPECT_DOUBLE_EQ(qt::resolve_unwanted(p).g_prime.at("c2"), 1.0);
}

TEST(Crosstalk, DefaultsAndNumberConservation) {
    auto p = small_device();
    auto xt = qt::resolve_crosstalk(p);
    EXPECT_EQ(xt.size(), 6u);
    double gm = std::max({p.g.at("c2"), p.mu.at("c1p"), p.mu.at("c2p")});
    for (const auto &[pair, g] : xt) {
        EXPECT_NEAR(g, 0.01 * gm, 1e-9) << pair.first << "-" << pair.second;
    }
    auto s = small_space(p);
    auto H = qt::build_crosstalk(p, s);
    CMat N = CMat::Zero(s.dimension(), s.dimension());
    for (const char *l : {"c1", "c2", "c1p", "c2p"}) {
        N += qt::embed(qt::number_operator(s.dim(l)), s, l).dense();
    }
    for (double t : {0.0, 2e-9, 1e-7}) {
        CMat h = CMat(H.at(t));
        EXPECT_LT((h * N - N * h).norm(), 1e-6 * h.norm()) << t;
    }
    p.crosstalk.ratio = 0.0;
    EXPECT_TRUE(qt::build_crosstalk(p, s).empty());
}

TEST(H3, DriveMagnitudeAndPhase) {
    auto p = small_device();
    qt::HilbertSpace s({3, 6}, {"qutrit", "c1p"});
    auto H = qt::build_H3(p, s);
    for (double t : {0.0, 1e-9, 1e-7, 4.4e-7}) {
        CMat h = CMat(H.at(t));
        for (int n = 0; n < 6; n++) {
            EXPECT_NEAR(std::abs(h(idx(s, {1, n}), idx(s, {0, n}))), p.Omega_p, 1e-9 * p.Omega_p);
        }
    }
    // φ = π flips the sign of the drive at t = 0.
    cplx d0 = CMat(H.at(0.0))(idx(s, {1, 0}), idx(s, {0, 0}));
    EXPECT_NEAR(d0.real(), -p.Omega_p, 1e-9 * p.Omega_p);
    EXPECT_NEAR(d0.imag(), 0.0, 1e-9 * p.Omega_p);
}

TEST(H3, NoDriveIsDetunedJaynesCummings) {
    auto p = small_device();
    p.Omega_p = 0.0;
    qt::HilbertSpace s({3, 6}, {"qutrit", "c1p"});
    auto H = qt::build_H3(p, s);
    EXPECT_EQ(H.terms().size(), 1u);
    CMat h = CMat(H.at(0.0));
    EXPECT_NEAR(std::abs(h(idx(s, {1, 2}), idx(s, {0, 3}))), p.g_tilde * std::sqrt(3.0), 1e-6);
    EXPECT_NEAR(qt::to_ghz(H.terms()[0].nu), 0.16, 1e-12);
}

TEST(H3Full, DetuningsAndReduction) {
    auto p = small_device();
    qt::HilbertSpace s({3, 6}, {"qutrit", "c1p"});
    auto H = qt::build_H3_full(p, s);
    EXPECT_EQ(H.terms().size(), 6u);
    EXPECT_NEAR(qt::to_ghz(term(H, "g~' c1p fg").nu), 12.16, 1e-12);
    EXPECT_NEAR(qt::to_ghz(term(H, "g~'' c1p fe").nu), 4.16, 1e-12);
    p.unwanted.enabled = false;
    auto a = qt::build_H3_full(p, s);
    auto b = qt::build_H3(p, s);
    for (double t : {0.0, 1e-9, 7e-9}) {
        EXPECT_LT(CMat(a.at(t) - b.at(t)).norm(), 1e-6);
    }
}

TEST(Builders, HermitianAtSampledTimes) {
    auto p = small_device();
    auto s = small_space(p);
    qt::HilbertSpace s3({3, 6}, {"qutrit", "c1p"});
    qt::testing::Rng rng(21);
    std::vector<qt::TimeDependentHamiltonian> hs{qt::build_H1(p, s),
                                                 qt::build_H2(p, s),
                                                 qt::build_H2_full(p, s),
                                                 qt::build_crosstalk(p, s),
                                                 qt::build_H_eff_dispersive(p, s, true),
                                                 qt::build_H3(p, s3),
                                                 qt::build_H3_full(p, s3),
                                                 qt::build_H_eff_drive(p, s3)};
    for (const auto &H : hs) {
        for (double t : {0.0, 1e-9, 7e-9}) {
            EXPECT_TRUE(H.is_hermitian_at(t));
        }
        for (int k = 0; k < 5; k++) {
            EXPECT_TRUE(H.is_hermitian_at(rng.uniform(0.0, 2e-6)));
        }
    }
}

TEST(HEffDispersive, DiagonalForm) {
    auto p = small_device();
    auto s = small_space(p);
    auto d = qt::derive(p);
    CMat h = CMat(qt::build_H_eff_dispersive(p, s).at(0.0));
    EXPECT_NEAR(h(idx(s, {0, 0, 1, 0, 0}), idx(s, {0, 0, 1, 0, 0})).real(), -d.lambda.at("c2"), 1e-6);
    EXPECT_NEAR(h(idx(s, {1, 0, 0, 2, 0}), idx(s, {1, 0, 0, 2, 0})).real(), -2.0 * d.lambda_p.at("c1p"), 1e-6);
    EXPECT_LT((h - CMat(h.diagonal().asDiagonal())).norm(), 1e-12);
    for (auto &[l, v] : p.g) {
        v = 0.0;
    }
    for (auto &[l, v] : p.mu) {
        v = 0.0;
    }
    EXPECT_EQ(CMat(qt::build_H_eff_dispersive(p, s).at(0.0)).norm(), 0.0);
}

TEST(HEffDrive, VacuumBlockAndFockOscillation) {
    auto p = small_device();
    qt::HilbertSpace s({3, 6}, {"qutrit", "c1p"});
    auto H = qt::build_H_eff_drive(p, s);
    double wt = qt::derive(p).omega_tilde;
    cplx amp = p.Omega_p * std::exp(-qt::kI * p.phi);
    for (double t : {0.0, 3e-8, 2.1e-7}) {
        CMat h = CMat(H.at(t));
        EXPECT_NEAR(std::abs(h(idx(s, {1, 0}), idx(s, {0, 0})) - amp), 0.0, 1e-9 * p.Omega_p);
        for (int n = 1; n < 6; n++) {
            cplx expect = amp * std::exp(qt::kI * 4.0 * wt * double(n) * t);
            EXPECT_NEAR(std::abs(h(idx(s, {1, n}), idx(s, {0, n})) - expect), 0.0, 1e-9 * p.Omega_p);
        }
    }
}

TEST(DriveFrame, EnergiesAndInverse) {
    auto p = small_device();
    qt::HilbertSpace s({3, 5}, {"qutrit", "c1p"});
    qt::DriveFrame f(p, s);
    double c = p.g_tilde * p.g_tilde / p.Delta_tilde;
    EXPECT_NEAR(f.energies()[idx(s, {1, 2})], 2.5 * c, 1e-9);
    EXPECT_NEAR(f.energies()[idx(s, {0, 2})], -2.5 * c, 1e-9);
    EXPECT_EQ(f.energies()[idx(s, {2, 2})], 0.0);
    qt::testing::Rng rng(2);
    qt::CVec v = rng.state(s.dimension());
    EXPECT_LT((f.from_rotating(f.to_rotating(v, 3e-7), 3e-7) - v).norm(), 1e-13);
}

}  // namespace
