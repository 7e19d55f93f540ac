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

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "qtransfer/preset.h"

namespace qt = qtransfer;

namespace {

const std::string kDevicePreset = std::string(QTRANSFER_SOURCE_DIR) + "/presets/paper_sec4";

void expect_rel(double a, double b, double tol, const std::string &what) {
    if (b == 0.0) {
        EXPECT_EQ(a, 0.0) << what;
    } else {
        EXPECT_NEAR(a / b, 1.0, tol) << what;
    }
}

template <typename F>
qt::ConfigError config_error(F &&f) {
    try {
        f();
    } catch (const qt::ConfigError &e) {
        return e;
    }
    ADD_FAILURE() << "no ConfigError";
    return qt::ConfigError("none");
}

TEST(Preset, DeviceFileResolvesToDeviceValues) {
    auto preset = qt::Preset::load(kDevicePreset);
    auto p = preset.resolve();
    auto q = qt::reference_device();
    EXPECT_EQ(p.n, q.n);
    EXPECT_EQ(p.m, q.m);
    for (const auto &[what, a, b] : std::vector<std::tuple<std::string, double, double>>{
             {"omega_eg", p.omega_eg, q.omega_eg},
             {"omega_fe", p.omega_fe, q.omega_fe},
             {"omega_fg", p.omega_fg, q.omega_fg},
             {"shifted", p.omega_c1p_shifted, q.omega_c1p_shifted},
             {"g_r", p.g_r, q.g_r},
             {"g_tilde", p.g_tilde, q.g_tilde},
             {"Omega_p", p.Omega_p, q.Omega_p},
             {"phi", p.phi, q.phi},
             {"gamma_eg", p.gamma_eg, q.gamma_eg},
             {"gamma_fe", p.gamma_fe, q.gamma_fe},
             {"gamma_fg", p.gamma_fg, q.gamma_fg},
             {"alpha", p.alpha.real(), q.alpha.real()},
             {"c", p.c_amp.real(), q.c_amp.real()},
             {"d", p.d_amp.real(), q.d_amp.real()}}) {
        expect_rel(a, b, 1e-12, what);
    }
    for (const auto &l : q.cavity_labels()) {
        expect_rel(p.omega_c.at(l), q.omega_c.at(l), 1e-12, l);
        expect_rel(p.kappa.at(l), q.kappa.at(l), 1e-12, l);
    }
    expect_rel(p.g.at("c2"), q.g.at("c2"), 1e-12, "g2");
    expect_rel(p.mu.at("c1p"), q.mu.at("c1p"), 1e-12, "mu1");
    expect_rel(p.mu.at("c2p"), q.mu.at("c2p"), 1e-12, "mu2");
    EXPECT_TRUE(qt::check_matching(p).matched);
}

TEST(Preset, HashIsFrozenAndOrderIndependent) {
    auto preset = qt::Preset::load(kDevicePreset);
    EXPECT_EQ(preset.hash(), "7796d6d4bb2c713e");
    std::vector<std::string> lines;
    std::istringstream in(preset.canonical());
    for (std::string l; std::getline(in, l);) {
        lines.push_back(l);
    }
    std::mt19937 rng(4);
    for (int k = 0; k < 5; k++) {
        std::shuffle(lines.begin(), lines.end(), rng);
        std::string text;
        for (const auto &l : lines) {
            text += "  " + l + "   # noise\n\n";
        }
        EXPECT_EQ(qt::Preset::parse_string(text).hash(), preset.hash());
    }
}

TEST(Preset, Fnv1aKnownVectors) {
    EXPECT_EQ(qt::fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(qt::fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(qt::fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Preset, UnitConversions) {
    auto base = qt::Preset::load(kDevicePreset);
    auto a = base;
    a.set("omega_eg_mhz", "8000");
    a.set("kappa.all_per_s", "1e4");
    a.set("T_ns", "15000");
    auto pa = a.resolve();
    auto pb = base.resolve();
    expect_rel(pa.omega_eg, pb.omega_eg, 1e-15, "omega_eg");
    expect_rel(pa.kappa.at("c1"), pb.kappa.at("c1"), 1e-15, "kappa");
    expect_rel(pa.gamma_fg, pb.gamma_fg, 1e-15, "gamma");
    auto c = base;
    c.set("kappa.all_inv_us", "inf");
    for (const auto &[l, k] : c.resolve().kappa) {
        EXPECT_EQ(k, 0.0) << l;
    }
    c.set("kappa.c2_inv_ns", "1000");
    EXPECT_NEAR(c.resolve().kappa.at("c2"), 1e6, 1e-6);
    auto d = base;
    d.set("g_r_khz", "50000");
    expect_rel(d.resolve().g_r, pb.g_r, 1e-15, "g_r");
}

TEST(Preset, SetReplacesAcrossUnits) {
    auto p = qt::Preset::load(kDevicePreset);
    p.set("g.c2_ghz", "0.012");
    EXPECT_FALSE(p.get("g.c2_mhz").has_value());
    EXPECT_EQ(p.get("g.c2_ghz").value(), "0.012");
    expect_rel(p.resolve().g.at("c2"), qt::mhz(12.0), 1e-12, "g2");
    p.set_assignment("g.c2_mhz=12.03");
    EXPECT_FALSE(p.get("g.c2_ghz").has_value());
    EXPECT_EQ(p.hash(), qt::Preset::load(kDevicePreset).hash());
    EXPECT_THROW(p.set("g.c2x_mhz", "1"), qt::ConfigError);
    EXPECT_THROW(p.set_assignment("alpha"), qt::ConfigError);
    p.erase("alpha");
    EXPECT_FALSE(p.get("alpha").has_value());
}

TEST(Preset, ValueForms) {
    auto p = qt::Preset::load(kDevicePreset);
    p.set("phi", "pi/2");
    EXPECT_NEAR(p.resolve().phi, qt::kPi / 2.0, 1e-15);
    p.set("phi", "2*pi");
    EXPECT_NEAR(p.resolve().phi, 2.0 * qt::kPi, 1e-15);
    p.set("phi", "-0.5");
    EXPECT_NEAR(p.resolve().phi, -0.5, 1e-15);
    p.set("c_amp", "sqrt(0.25)");
    p.set("d_amp", "sqrt(0.75)");
    auto r = p.resolve();
    EXPECT_NEAR(r.c_amp.real(), 0.5, 1e-15);
    p.set("alpha_im", "0.5");
    EXPECT_NEAR(p.resolve().alpha.imag(), 0.5, 1e-15);
    p.set("unwanted.enabled", "off");
    EXPECT_FALSE(p.resolve().unwanted.enabled);
    p.set("crosstalk.enabled", "false");
    EXPECT_FALSE(p.resolve().crosstalk.enabled);
    p.set("phi", "half");
    EXPECT_THROW(p.resolve(), qt::ConfigError);
}

TEST(Preset, DriveAmplitudeAutoAndLiteral) {
    auto p = qt::Preset::load(kDevicePreset);
    auto auto_p = p.resolve();
    expect_rel(auto_p.Omega_p, qt::omega_p_required(auto_p, 2), 1e-15, "auto");
    p.set("Omega_p_mhz", "0.454");
    expect_rel(p.resolve().Omega_p, qt::mhz(0.454), 1e-15, "literal");
    p.set("m", "1");
    p.set("Omega_p", "auto");
    auto m1 = p.resolve();
    expect_rel(m1.Omega_p, 2.0 * auto_p.Omega_p, 1e-12, "m = 1");
}

TEST(Preset, MatchingKeepsExplicitOverrides) {
    auto p = qt::Preset::load(kDevicePreset);
    p.set("mu.c1p_mhz", "10");
    auto r = p.resolve();
    expect_rel(r.mu.at("c1p"), qt::mhz(10.0), 1e-15, "override");
    EXPECT_FALSE(qt::check_matching(r).matched);
    p.set("matching", "sideways");
    EXPECT_THROW(p.resolve(), qt::ConfigError);
}

TEST(Preset, TruncationKeys) {
    auto p = qt::Preset::load(kDevicePreset);
    EXPECT_FALSE(p.truncation().c1p_dim.has_value());
    p.set("truncation.c1p_dim", "30");
    p.set("truncation.csp_dim", "12");
    auto t = p.truncation();
    EXPECT_EQ(t.c1p_dim.value(), 30);
    EXPECT_EQ(t.csp_dim.value(), 12);
    p.set("truncation.sps_dim", "2.5");
    EXPECT_THROW(p.truncation(), qt::ConfigError);
}

TEST(Preset, ErrorsCarryPositions) {
    auto e = config_error([] { qt::Preset::parse_string("n = 2\n  bogus_mhz = 3\n"); });
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 3);
    EXPECT_NE(std::string(e.what()).find("unknown parameter"), std::string::npos);

    e = config_error([] { qt::Preset::parse_string("n = 2\ng_r_mhz = 1\ng_r_ghz = 2\n").resolve(); });
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("first at line 2"), std::string::npos);

    e = config_error([] { qt::Preset::parse_string("g_r_mhz =\n"); });
    EXPECT_EQ(e.line(), 1);
    EXPECT_NE(std::string(e.what()).find("missing value"), std::string::npos);

    e = config_error([] { qt::Preset::parse_string("n = 2\n\njust words\n"); });
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.column(), 1);

    e = config_error([] { qt::Preset::load(std::string(QTRANSFER_SOURCE_DIR) + "/tests/data/bad_unit"); });
    EXPECT_EQ(e.line(), 4);
    EXPECT_EQ(e.column(), 1);
    EXPECT_NE(std::string(e.what()).find("bad_unit"), std::string::npos);
}

TEST(Preset, BarePhysicalKeyNeedsUnit) {
    auto p = qt::Preset::load(kDevicePreset);
    p.set("g_r", "50");
    auto e = config_error([&] { p.resolve(); });
    EXPECT_NE(std::string(e.what()).find("needs a unit suffix"), std::string::npos);
}

TEST(Preset, MissingPieces) {
    EXPECT_THROW(qt::Preset::load("/nonexistent/preset"), qt::ConfigError);
    auto p = qt::Preset::load(kDevicePreset);
    p.erase("omega_fe_ghz");
    EXPECT_THROW(p.resolve(), qt::ConfigError);
    p = qt::Preset::load(kDevicePreset);
    p.set("kappa.all_inv_us", "0");
    EXPECT_THROW(p.resolve(), qt::ConfigError);
    p = qt::Preset::load(kDevicePreset);
    p.set("n", "0");
    EXPECT_THROW(p.resolve(), qt::ConfigError);
}

TEST(Preset, KeyGrammar) {
    EXPECT_NO_THROW(qt::check_preset_key("omega_c.c12p_ghz"));
    EXPECT_NO_THROW(qt::check_preset_key("unwanted.g_prime.c2_mhz"));
    EXPECT_NO_THROW(qt::check_preset_key("crosstalk.c1.c2p_mhz"));
    EXPECT_THROW(qt::check_preset_key("omega_c.c0_ghz"), qt::ConfigError);
    EXPECT_THROW(qt::check_preset_key("omega_c.d1_ghz"), qt::ConfigError);
    EXPECT_THROW(qt::check_preset_key("alpha_mhz"), qt::ConfigError);
    EXPECT_THROW(qt::check_preset_key("g.c2_us"), qt::ConfigError);
}

}  // namespace
