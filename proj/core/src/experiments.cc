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

#include "qtransfer/experiments.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qtransfer {

namespace fs = std::filesystem;
using json = nlohmann::json;

TierSpec tier_spec(Tier tier) {
    if (tier == Tier::A) {
        return {Tier::A, 1.2, 16};
    }
    return {Tier::B, 1.86, 500};
}

Tier parse_tier(const std::string &name) {
    if (name == "A" || name == "a") {
        return Tier::A;
    }
    if (name == "B" || name == "b") {
        return Tier::B;
    }
    throw ConfigError("unknown tier '" + name + "' (expected A or B)");
}

const char *tier_name(Tier tier) {
    return tier == Tier::A ? "A" : "B";
}

std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

ProtocolResult bell_transfer(const Preset &preset, const TierSpec &tier, NumericOptions opt) {
    Preset p = preset;
    p.set("alpha", format_number(tier.alpha));
    p.erase("alpha_im");
    DeviceParams params = p.resolve();
    HilbertSpace space = protocol_space(params, p.truncation());
    opt.lossless = false;
    if (opt.trajectories.n_trajectories <= 0) {
        opt.trajectories.n_trajectories = tier.trajectories;
    }
    return run_numeric(params, space, opt);
}

double bell_transfer_fidelity(const Preset &preset, const TierSpec &tier, const NumericOptions &opt) {
    return bell_transfer(preset, tier, opt).fidelity;
}

void SweepSpec::validate() const {
    if (values.empty()) {
        throw ConfigError("sweep: no values");
    }
    check_preset_key(key);
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ConfigError("sweep: non-finite value for '" + key + "'");
        }
    }
    // Resolving once surfaces bad keys or values before any simulation starts.
    Preset probe = base;
    probe.set(key, format_number(values.front()));
    probe.resolve();
}

bool SweepRow::done() const {
    return status == "ok" || status.rfind("flagged", 0) == 0;
}

bool SweepResult::complete() const {
    return std::all_of(rows.begin(), rows.end(), [](const SweepRow &r) { return r.done(); });
}

std::vector<double> linspace(double a, double b, int n) {
    if (n < 1) {
        throw ConfigError("linspace: need at least one point");
    }
    std::vector<double> out(n);
    for (int k = 0; k < n; k++) {
        out[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
    }
    return out;
}

std::optional<Peak> quadratic_peak(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.empty() || x.size() != y.size()) {
        return std::nullopt;
    }
    std::size_t i = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    Peak pk{x[i], y[i], i, false};
    if (i == 0 || i + 1 == x.size()) {
        return pk;
    }
    double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    double d01 = (y1 - y0) / (x1 - x0);
    double d12 = (y2 - y1) / (x2 - x1);
    double a = (d12 - d01) / (x2 - x0);
    pk.interior = true;
    if (!(a < 0.0)) {
        return pk;
    }
    double b = d01 - a * (x0 + x1);
    double c = y0 - a * x0 * x0 - b * x0;
    double xv = std::clamp(-b / (2.0 * a), x0, x2);
    pk.param = xv;
    pk.fidelity = a * xv * xv + b * xv + c;
    return pk;
}

std::uint64_t point_seed(const SweepSpec &spec, std::size_t index) {
    return spec.common_random_numbers ? spec.seed : spec.seed ^ static_cast<std::uint64_t>(index);
}

std::string row_status(const SweepRow &row, double trace_limit, double leakage_limit) {
    std::string reasons;
    if (!(row.trace_err < trace_limit)) {
        reasons += "trace_err";
    }
    if (!(row.leakage < leakage_limit)) {
        reasons += reasons.empty() ? "leakage" : "+leakage";
    }
    return reasons.empty() ? "ok" : "flagged:" + reasons;
}

void write_results_csv(std::ostream &out, const SweepResult &result, bool wall_time) {
    out << "param,fidelity,trace_err,leakage,f_pop_max,wall_s,status\n";
    for (const auto &r : result.rows) {
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out << format_number(r.param) << ',';
        if (r.done()) {
            out << format_number(r.fidelity) << ',' << format_number(r.trace_err) << ','
                << format_number(r.leakage) << ',' << format_number(r.f_pop_max) << ',';
            if (wall_time) {
                out << format_number(r.wall_s);
            }
        } else {
            out << ",,,,";
        }
        out << ',' << status << '\n';
    }
}

std::string results_csv(const SweepResult &result, bool wall_time) {
    std::ostringstream out;
    write_results_csv(out, result, wall_time);
    return out.str();
}

namespace {

void write_file_atomic(const fs::path &path, const std::string &content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw std::runtime_error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

json fingerprint(const SweepSpec &spec) {
    const auto &o = spec.numeric;
    return {
        {"version", kVersion},
        {"preset_hash", spec.base.hash()},
        {"tier", tier_name(spec.tier.tier)},
        {"alpha", spec.tier.alpha},
        {"key", spec.key},
        {"seed", spec.seed},
        {"common_random_numbers", spec.common_random_numbers},
        {"trajectories", o.trajectories.n_trajectories > 0 ? o.trajectories.n_trajectories : spec.tier.trajectories},
        {"full_hamiltonian", o.full_hamiltonian},
        {"fast_cutoff", o.fast_cutoff},
        {"negligible_excursion", o.negligible_excursion},
        {"solver", static_cast<int>(o.solver)},
        {"rtol", o.integration.rtol},
        {"atol", o.integration.atol},
    };
}

json row_json(std::size_t index, const SweepRow &r) {
    return {{"index", index},
            {"param", r.param},
            {"status", r.status},
            {"fidelity", r.fidelity},
            {"fidelity_stderr", r.fidelity_stderr},
            {"trace_err", r.trace_err},
            {"leakage", r.leakage},
            {"f_pop_max", r.f_pop_max},
            {"wall_s", r.wall_s},
            {"seed", r.seed}};
}

void persist(const SweepSpec &spec, const SweepResult &res) {
    if (spec.out_dir.empty()) {
        return;
    }
    json m;
    m["tool"] = "qtransfer";
    m["config"] = fingerprint(spec);
    m["preset_source"] = spec.base.source();
    m["preset"] = spec.base.canonical();
    m["values"] = spec.values;
    m["complete"] = res.complete();
    json rows = json::array();
    for (std::size_t k = 0; k < res.rows.size(); k++) {
        rows.push_back(row_json(k, res.rows[k]));
    }
    m["rows"] = rows;
    if (res.peak) {
        m["peak"] = {{"param", res.peak->param},
                     {"fidelity", res.peak->fidelity},
                     {"argmax", res.peak->argmax},
                     {"interior", res.peak->interior}};
    }
    fs::path dir(spec.out_dir);
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
    write_file_atomic(dir / "results.csv", results_csv(res, spec.csv_wall_time));
}

void load_previous(const SweepSpec &spec, SweepResult &res) {
    fs::path path = fs::path(spec.out_dir) / "manifest.json";
    if (!spec.resume || !fs::exists(path)) {
        return;
    }
    std::ifstream in(path);
    json m;
    try {
        in >> m;
    } catch (const json::exception &e) {
        throw ConfigError("cannot read manifest '" + path.string() + "': " + e.what());
    }
    if (m.value("config", json()) != fingerprint(spec)) {
        throw ConfigError("manifest '" + path.string() +
                          "' belongs to a different sweep configuration; choose another output directory");
    }
    for (const auto &jr : m.value("rows", json::array())) {
        std::size_t k = jr.at("index").get<std::size_t>();
        if (k >= res.rows.size() || jr.at("param").get<double>() != res.rows[k].param) {
            continue;
        }
        SweepRow r;
        r.param = jr.at("param").get<double>();
        r.status = jr.at("status").get<std::string>();
        if (!r.done()) {
            continue;
        }
        r.fidelity = jr.at("fidelity").get<double>();
        r.fidelity_stderr = jr.at("fidelity_stderr").get<double>();
        r.trace_err = jr.at("trace_err").get<double>();
        r.leakage = jr.at("leakage").get<double>();
        r.f_pop_max = jr.at("f_pop_max").get<double>();
        r.wall_s = jr.at("wall_s").get<double>();
        r.seed = jr.at("seed").get<std::uint64_t>();
        res.rows[k] = r;
    }
}

void update_peak(SweepResult &res) {
    std::vector<double> x, y;
    for (const auto &r : res.rows) {
        if (r.done()) {
            x.push_back(r.param);
            y.push_back(r.fidelity);
        }
    }
    res.peak = quadratic_peak(x, y);
}

}  // namespace

SweepResult run_sweep(const SweepSpec &spec, const std::atomic<bool> *cancel,
                      const std::function<void(std::size_t, const SweepRow &)> &progress) {
    spec.validate();
    SweepResult res;
    res.key = spec.key;
    for (double v : spec.values) {
        SweepRow r;
        r.param = v;
        res.rows.push_back(r);
    }
    if (!spec.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(spec.out_dir, ec);
        if (ec) {
            throw ConfigError("cannot create output directory '" + spec.out_dir + "': " + ec.message());
        }
        load_previous(spec, res);
    }
    update_peak(res);
    persist(spec, res);
    for (std::size_t k = 0; k < res.rows.size(); k++) {
        if (res.rows[k].done()) {
            continue;
        }
        if (cancel && cancel->load()) {
            break;
        }
        Preset point = spec.base;
        point.set(spec.key, format_number(spec.values[k]));
        NumericOptions opt = spec.numeric;
        opt.trajectories.seed = point_seed(spec, k);
        SweepRow &row = res.rows[k];
        row.seed = opt.trajectories.seed;
        auto t0 = std::chrono::steady_clock::now();
        try {
            ProtocolResult pr = bell_transfer(point, spec.tier, opt);
            row.fidelity = pr.fidelity;
            row.fidelity_stderr = pr.fidelity_stderr;
            row.trace_err = pr.trace_error;
            row.leakage = pr.leakage;
            row.f_pop_max = pr.f_pop_max;
            row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            row.status = row_status(row);
        } catch (const std::exception &e) {
            row.status = std::string("failed:") + e.what();
            update_peak(res);
            persist(spec, res);
            throw;
        }
        update_peak(res);
        persist(spec, res);
        if (progress) {
            progress(k, row);
        }
    }
    return res;
}

SweepResult sweep_g2(SweepSpec spec, const std::atomic<bool> *cancel,
                     const std::function<void(std::size_t, const SweepRow &)> &progress) {
    if (spec.key.empty()) {
        spec.key = "g.c2_mhz";
    }
    if (spec.values.empty()) {
        spec.values = linspace(4.0, 24.0, 21);
    }
    for (double v : spec.values) {
        if (!(v > 0.0)) {
            throw ConfigError("sweep_g2: coupling values must be positive");
        }
    }
    return run_sweep(spec, cancel, progress);
}

SweepResult sweep_kappa(SweepSpec spec, const std::atomic<bool> *cancel,
                        const std::function<void(std::size_t, const SweepRow &)> &progress) {
    if (spec.key.empty()) {
        spec.key = "kappa.all_inv_us";
    }
    for (double v : spec.values) {
        if (!(v > 0.0)) {
            throw ConfigError("sweep_kappa: lifetimes must be positive");
        }
    }
    // Per-cavity entries would override the uniform value.
    for (const auto &e : std::vector<PresetEntry>(spec.base.entries())) {
        if (e.key.rfind("kappa.", 0) == 0 && e.key.rfind("kappa.all", 0) != 0) {
            spec.base.erase(e.key);
        }
    }
    return run_sweep(spec, cancel, progress);
}

std::string plot_script() {
    return R"PY(#!/usr/bin/env python3
"""Plot fidelity sweeps written by `qtransfer sweep`.

usage: plot_results.py [--axis g2|kappa] [--out fig.png] LABEL=results.csv ...
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

XLABEL = {"g2": r"$g_2/2\pi$ (MHz)", "kappa": r"$\kappa^{-1}$ ($\mu$s)"}


def load(path):
    xs, ys = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["fidelity"] == "":
                continue
            xs.append(float(row["param"]))
            ys.append(float(row["fidelity"]))
    return xs, ys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--axis", choices=sorted(XLABEL), default="g2")
    ap.add_argument("--out", default="fidelity.png")
    ap.add_argument("curves", nargs="+", help="LABEL=path or path")
    args = ap.parse_args()
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    for item in args.curves:
        label, _, path = item.rpartition("=")
        xs, ys = load(path or item)
        ax.plot(xs, ys, "o-", ms=3, label=label or path)
    ax.set_xlabel(XLABEL[args.axis])
    ax.set_ylabel("fidelity")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
)PY";
}

void emit_results(const SweepResult &result, const std::string &dir, bool wall_time, bool with_plot) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create '" + dir + "': " + ec.message());
    }
    write_file_atomic(fs::path(dir) / "results.csv", results_csv(result, wall_time));
    if (with_plot) {
        write_file_atomic(fs::path(dir) / "plot_results.py", plot_script());
    }
}

}  // namespace qtransfer
