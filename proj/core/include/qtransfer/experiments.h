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

#ifndef QTRANSFER_EXPERIMENTS_H
#define QTRANSFER_EXPERIMENTS_H

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qtransfer/preset.h"
#include "qtransfer/protocol.h"

namespace qtransfer {

inline constexpr const char *kVersion = "0.1.0";

enum class Tier { A, B };

/// Tier A: α = 1.2, 16 trajectories. Tier B: α = 1.86, 500 trajectories. Truncation follows the
/// default rule for the tier's α unless the preset pins it.
struct TierSpec {
    Tier tier = Tier::A;
    double alpha = 1.2;
    int trajectories = 16;
};

TierSpec tier_spec(Tier tier);
Tier parse_tier(const std::string &name);
const char *tier_name(Tier tier);

/// Lossy numeric run of the whole protocol at `tier`; the preset's α is replaced by the tier's.
ProtocolResult bell_transfer(const Preset &preset, const TierSpec &tier, NumericOptions opt);
double bell_transfer_fidelity(const Preset &preset, const TierSpec &tier, const NumericOptions &opt);

struct SweepSpec {
    Preset base;
    /// Preset key including its unit, e.g. "g.c2_mhz" or "kappa.all_inv_us".
    std::string key;
    std::vector<double> values;
    TierSpec tier;
    NumericOptions numeric;
    std::uint64_t seed = 1;
    /// Every point uses `seed` (common random numbers). Otherwise point k uses seed ^ k.
    bool common_random_numbers = true;
    /// Output directory for results.csv and manifest.json; empty keeps everything in memory.
    std::string out_dir;
    /// Skip points already recorded in a compatible manifest.
    bool resume = true;
    /// Write measured wall times into the CSV (they always go to the manifest).
    bool csv_wall_time = false;

    void validate() const;
};

struct SweepRow {
    double param = 0.0;
    double fidelity = 0.0;
    double fidelity_stderr = 0.0;
    double trace_err = 0.0;
    double leakage = 0.0;
    double f_pop_max = 0.0;
    double wall_s = 0.0;
    std::uint64_t seed = 0;
    /// "ok", "flagged:<reasons>", "missing" or "failed:<message>".
    std::string status = "missing";

    bool done() const;
};

struct Peak {
    double param = 0.0;
    double fidelity = 0.0;
    std::size_t argmax = 0;
    /// False when the best point is an endpoint (no fit possible).
    bool interior = false;
};

struct SweepResult {
    std::string key;
    std::vector<SweepRow> rows;
    std::optional<Peak> peak;
    bool complete() const;
};

/// Vertex of the parabola through the best point and its two neighbours.
std::optional<Peak> quadratic_peak(const std::vector<double> &x, const std::vector<double> &y);

/// Seed used for point `index`.
std::uint64_t point_seed(const SweepSpec &spec, std::size_t index);

/// Runs the points in order. A failing point stops the sweep; earlier rows are kept, later rows stay
/// "missing" and the error is rethrown after persisting. `cancel` stops cleanly between points.
SweepResult run_sweep(const SweepSpec &spec, const std::atomic<bool> *cancel = nullptr,
                      const std::function<void(std::size_t, const SweepRow &)> &progress = {});

/// g_2 axis in MHz (couplings co-scaled by the preset's matching rule). Default 21 points over [4, 24].
SweepResult sweep_g2(SweepSpec spec, const std::atomic<bool> *cancel = nullptr,
                     const std::function<void(std::size_t, const SweepRow &)> &progress = {});
/// Uniform cavity lifetime κ⁻¹ in μs; `inf` is not representable here, use a lossless run instead.
SweepResult sweep_kappa(SweepSpec spec, const std::atomic<bool> *cancel = nullptr,
                        const std::function<void(std::size_t, const SweepRow &)> &progress = {});

std::vector<double> linspace(double a, double b, int n);

/// Flags a row whose trace error or leakage exceeds the limits.
std::string row_status(const SweepRow &row, double trace_limit = 1e-5, double leakage_limit = 1e-4);

void write_results_csv(std::ostream &out, const SweepResult &result, bool wall_time = false);
std::string results_csv(const SweepResult &result, bool wall_time = false);
/// Writes results.csv (and plot_results.py when `with_plot`) into `dir`; I/O errors name the path.
void emit_results(const SweepResult &result, const std::string &dir, bool wall_time = false, bool with_plot = true);
std::string plot_script();

/// Decimal text used both in the CSV and when a value is written into a preset.
std::string format_number(double v);

}  // namespace qtransfer

#endif
