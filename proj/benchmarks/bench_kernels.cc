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

#include <benchmark/benchmark.h>

#include "qtransfer/hamiltonian.h"
#include "qtransfer/kernels.h"
#include "qtransfer/protocol.h"

namespace qt = qtransfer;

namespace {

// Step (iii) Hamiltonian on the protocol space for cat amplitude alpha.
qt::TimeDependentHamiltonian step_three(double alpha) {
    auto p = qt::reference_device();
    p.alpha = alpha;
    return qt::build_H2_full(p, qt::protocol_space(p));
}

void BM_CompiledApply(benchmark::State &state) {
    auto H = step_three(state.range(0) / 100.0);
    const auto &space = H.space();
    qt::CompiledHamiltonian c(H);
    qt::CVec x = qt::CVec::Ones(space.dimension()).normalized();
    qt::CVec y(space.dimension());
    double t = 1e-9;
    for (auto _ : state) {
        c.apply(t, x.data(), y.data());
        benchmark::DoNotOptimize(y.data());
        t += 1e-12;
    }
    state.counters["dim"] = static_cast<double>(space.dimension());
    state.counters["nnz"] = static_cast<double>(c.nonzeros());
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c.nonzeros()));
}
BENCHMARK(BM_CompiledApply)->Arg(60)->Arg(120)->Arg(186);

// Baseline: assemble H(t) from the terms and multiply.
void BM_AssembledApply(benchmark::State &state) {
    auto H = step_three(state.range(0) / 100.0);
    const auto &space = H.space();
    qt::CVec x = qt::CVec::Ones(space.dimension()).normalized();
    qt::CVec y(space.dimension());
    double t = 1e-9;
    for (auto _ : state) {
        y.noalias() = H.at(t) * x;
        benchmark::DoNotOptimize(y.data());
        t += 1e-12;
    }
}
BENCHMARK(BM_AssembledApply)->Arg(60)->Arg(120);

void BM_CompiledApplyBlock(benchmark::State &state) {
    auto H = step_three(0.6);
    const auto &space = H.space();
    qt::CompiledHamiltonian c(H);
    qt::CMat x = qt::CMat::Ones(space.dimension(), state.range(0));
    qt::CMat y(space.dimension(), state.range(0));
    for (auto _ : state) {
        c.apply(1e-9, x, y);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_CompiledApplyBlock)->Arg(4)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
