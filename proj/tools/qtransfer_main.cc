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

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qtransfer/experiments.h"

namespace qt = qtransfer;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 1, kValidation = 2, kSimulation = 3 };

std::atomic<bool> g_cancel{false};

extern "C" void on_signal(int) {
    g_cancel.store(true);
}

struct Common {
    std::string preset = "presets/paper_sec4";
    std::string positional;
    std::vector<std::string> overrides;
    std::string tier = "A";
    std::uint64_t seed = 1;
    std::string out;
    int trajectories = 0;
};

qt::Preset load_preset(const Common &c) {
    std::string path = c.positional.empty() ? c.preset : c.positional;
    qt::Preset p = qt::Preset::load(path);
    for (const auto &o : c.overrides) {
        p.set_assignment(o);
    }
    return p;
}

std::string mhz(double w, int prec = 6) {
    std::ostringstream s;
    s << std::setprecision(prec) << qt::to_mhz(w) << " MHz";
    return s.str();
}

void ensure_dir(const std::string &dir) {
    if (dir.empty()) {
        return;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw qt::ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    }
}

void write_outcome(const std::string &dir, const qt::ProtocolResult &r) {
    if (dir.empty()) {
        return;
    }
    ensure_dir(dir);
    std::ofstream txt(fs::path(dir) / "outcome.txt");
    qt::write_outcome_text(txt, r);
    std::ofstream csv(fs::path(dir) / "steps.csv");
    qt::write_outcome_csv(csv, r);
    if (!txt || !csv) {
        throw std::runtime_error("cannot write outcome files in '" + dir + "'");
    }
}

int cmd_validate(const Common &c) {
    qt::Preset preset = load_preset(c);
    qt::DeviceParams p = preset.resolve();
    qt::DerivedParams d = qt::derive(p);
    bool ok = true;
    std::cout << std::setprecision(6);
    std::cout << "preset " << (c.positional.empty() ? c.preset : c.positional) << " (hash " << preset.hash()
              << ")\n";

    std::cout << "\ndispersive margins (flagged below 10):\n";
    qt::DispersiveReport dr = qt::validate_dispersive(p);
    for (const auto &m : dr.margins) {
        std::cout << "  " << std::left << std::setw(28) << m.name << std::right << std::setw(12) << m.ratio
                  << (m.pass ? "" : "  flagged") << '\n';
    }

    std::cout << "\nStark-shift matching:\n";
    qt::MatchingReport mr = qt::check_matching(p);
    for (const auto &[l, r] : mr.residuals) {
        std::cout << "  " << std::left << std::setw(8) << l << std::right << " residual " << r << '\n';
    }
    std::cout << "  " << (mr.matched ? "matched" : "NOT matched") << '\n';
    ok = ok && mr.matched;

    std::cout << "\ndrive-time condition:\n";
    double t5 = p.Omega_p > 0.0 ? qt::kPi / (2.0 * p.Omega_p) : 0.0;
    double cycles = d.omega_tilde * t5 / qt::kPi;
    double k = std::round(cycles);
    bool closes = k != 0.0 && std::abs(cycles - k) <= 1e-6 * std::abs(k);
    std::cout << "  Omega_p      " << mhz(p.Omega_p) << "\n  required     " << mhz(d.Omega_p_required)
              << " (m = " << p.m << ")\n  omega~ t/pi  " << std::setprecision(10) << cycles << std::setprecision(6)
              << (closes ? "  closes" : "  DOES NOT CLOSE") << '\n';
    ok = ok && closes;

    std::cout << "\nderived:\n";
    for (const auto &[l, v] : d.lambda) {
        std::cout << "  lambda_" << l << "  " << mhz(v) << '\n';
    }
    for (const auto &[l, v] : d.lambda_p) {
        std::cout << "  lambda_" << l << "  " << mhz(v) << '\n';
    }
    std::cout << "  omega~      " << mhz(d.omega_tilde) << '\n';
    std::cout << "  nbar        " << d.nbar << '\n';
    for (const auto &[l, q] : qt::quality_factors(p)) {
        std::cout << "  Q_" << l << "  " << q << '\n';
    }
    std::cout << "  t_op        " << qt::to_us(d.t_op) << " us\n";

    if (ok) {
        qt::ProtocolPlan pl = qt::plan(p);
        std::cout << "\nsteps:\n";
        for (const auto &s : pl.steps) {
            std::cout << "  (" << s.label << ") " << std::left << std::setw(18) << qt::step_kind_name(s.kind)
                      << std::right << qt::to_us(s.duration) << " us\n";
        }
    }
    std::cout << '\n' << (ok ? "valid" : "INVALID") << '\n';
    return ok ? kOk : kValidation;
}

int cmd_run(const Common &c, const std::string &mode) {
    qt::Preset preset = load_preset(c);
    qt::DeviceParams p = preset.resolve();
    auto t0 = std::chrono::steady_clock::now();
    qt::ProtocolResult r;
    std::cout << std::setprecision(8);
    if (mode == "ideal" || mode == "reverse") {
        qt::HilbertSpace space = qt::protocol_space(p, preset.truncation());
        r = qt::run_ideal(p, space);
        std::cout << "transfer fidelity " << r.fidelity << '\n';
        if (mode == "reverse") {
            r = qt::run_reverse(p, space, r.final_state);
            std::cout << "round-trip fidelity " << r.fidelity << '\n';
        }
    } else {
        qt::TierSpec tier = qt::tier_spec(qt::parse_tier(c.tier));
        qt::NumericOptions opt;
        opt.trajectories.seed = c.seed;
        opt.trajectories.n_trajectories = c.trajectories > 0 ? c.trajectories : tier.trajectories;
        if (mode == "lossless") {
            preset.set("alpha", qt::format_number(tier.alpha));
            preset.erase("alpha_im");
            p = preset.resolve();
            opt.lossless = true;
            r = qt::run_numeric(p, qt::protocol_space(p, preset.truncation()), opt);
        } else {
            r = qt::bell_transfer(preset, tier, opt);
        }
        std::cout << "tier " << c.tier << " (alpha " << tier.alpha << "), solver " << r.solver << '\n';
        for (const auto &s : r.steps) {
            std::cout << "  (" << s.label << ") fidelity " << s.fidelity << "  f_pop " << s.f_population << '\n';
        }
        std::cout << "fidelity " << r.fidelity;
        if (r.fidelity_stderr > 0.0) {
            std::cout << " +- " << r.fidelity_stderr;
        }
        std::cout << "\nf_pop_max " << r.f_pop_max << "\nleakage " << r.leakage << '\n';
    }
    for (const auto &w : r.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "wall " << std::setprecision(3) << wall << " s\n";
    write_outcome(c.out, r);
    return kOk;
}

std::vector<double> parse_values(const std::string &text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception &) {
            throw qt::ConfigError("--values: cannot parse '" + item + "'");
        }
    }
    return out;
}

int cmd_sweep(const Common &c, const std::string &axis, const std::string &values, double T_us, bool wall) {
    qt::SweepSpec spec;
    spec.base = load_preset(c);
    if (T_us > 0.0) {
        spec.base.set("T_us", qt::format_number(T_us));
    }
    spec.tier = qt::tier_spec(qt::parse_tier(c.tier));
    spec.seed = c.seed;
    spec.numeric.trajectories.n_trajectories = c.trajectories > 0 ? c.trajectories : spec.tier.trajectories;
    spec.out_dir = c.out.empty() ? "sweep_" + axis : c.out;
    spec.csv_wall_time = wall;
    if (!values.empty()) {
        spec.values = parse_values(values);
    }
    auto progress = [&](std::size_t k, const qt::SweepRow &row) {
        std::cout << "  [" << k + 1 << "/" << (spec.values.empty() ? 21 : spec.values.size()) << "] "
                  << std::setprecision(6) << row.param << "  F = " << row.fidelity << " +- " << row.fidelity_stderr
                  << "  (" << std::setprecision(3) << row.wall_s << " s) " << row.status << std::endl;
    };
    qt::SweepResult res;
    int code = kOk;
    try {
        res = axis == "g2" ? qt::sweep_g2(spec, &g_cancel, progress) : qt::sweep_kappa(spec, &g_cancel, progress);
    } catch (const qt::ConfigError &) {
        throw;
    } catch (const std::exception &e) {
        std::cerr << "simulation failure: " << e.what() << "\npartial results kept in " << spec.out_dir << '\n';
        return kSimulation;
    }
    qt::emit_results(res, spec.out_dir, wall, true);
    if (!res.complete()) {
        std::cerr << "interrupted; rerun the same command to resume\n";
        code = kSimulation;
    }
    if (axis == "g2" && res.peak) {
        std::cout << std::setprecision(6) << "peak g2 " << res.peak->param << " MHz, F = " << res.peak->fidelity
                  << (res.peak->interior ? "" : " (endpoint)") << '\n';
    }
    std::cout << "wrote " << (fs::path(spec.out_dir) / "results.csv").string() << '\n';
    return code;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"qtransfer: quantum state transfer between cavities through a coupler qutrit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", qt::kVersion);
    Common c;
    auto add_common = [&](CLI::App *sub, bool with_tier) {
        sub->add_option("preset_file", c.positional, "Preset file (same as --preset)");
        sub->add_option("--preset", c.preset, "Preset file")->capture_default_str();
        sub->add_option("--set", c.overrides, "Override a preset entry, key=value (repeatable)");
        if (with_tier) {
            sub->add_option("--tier", c.tier, "A (alpha 1.2) or B (alpha 1.86)")
                ->check(CLI::IsMember({"A", "B"}))
                ->capture_default_str();
            sub->add_option("--seed", c.seed, "Base seed for trajectories")->capture_default_str();
            sub->add_option("--trajectories", c.trajectories, "Trajectory count (default from tier)");
        }
        sub->add_option("--out", c.out, "Output directory");
    };

    auto *validate = app.add_subcommand("validate", "Check a preset and print derived quantities");
    add_common(validate, false);

    std::string mode = "ideal";
    auto *run = app.add_subcommand("run", "Run the transfer protocol");
    add_common(run, true);
    run->add_option("--mode", mode, "ideal, lossless, lossy or reverse")
        ->check(CLI::IsMember({"ideal", "lossless", "lossy", "reverse"}))
        ->capture_default_str();

    std::string axis = "g2";
    std::string values;
    double T_us = 0.0;
    bool wall = false;
    auto *sweep = app.add_subcommand("sweep", "Lossy fidelity sweep over g2 (MHz) or cavity lifetime (us)");
    add_common(sweep, true);
    sweep->add_option("--axis", axis, "g2 or kappa")->check(CLI::IsMember({"g2", "kappa"}))->capture_default_str();
    sweep->add_option("--values", values, "Comma-separated values (g2: 21 points over 4..24 MHz by default)");
    sweep->add_option("--T", T_us, "Qutrit coherence time in us (default: preset)");
    sweep->add_flag("--wall-time", wall, "Include wall times in the CSV (breaks byte-identical reruns)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        if (*validate) {
            return cmd_validate(c);
        }
        if (*run) {
            return cmd_run(c, mode);
        }
        if (sweep->parsed()) {
            if (axis == "kappa" && values.empty()) {
                throw qt::ConfigError("--axis kappa needs --values");
            }
            return cmd_sweep(c, axis, values, T_us, wall);
        }
    } catch (const qt::ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const qt::PreconditionError &e) {
        std::cerr << "validation failure: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception &e) {
        std::cerr << "simulation failure: " << e.what() << '\n';
        return kSimulation;
    }
    return kOk;
}
