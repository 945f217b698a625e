// Copyright 2026 The flowgen-vqe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <complex>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "flowvqe/hamiltonian.hpp"
#include "flowvqe/kernels.hpp"

namespace k = flowvqe::kernels;
using Amps = std::vector<k::Amplitude>;

namespace {

Amps random_state(std::size_t n) {
    std::mt19937_64 gen(42);
    std::normal_distribution<double> nd;
    Amps a(std::size_t{1} << n);
    for (auto &x : a) {
        x = {nd(gen), nd(gen)};
    }
    return a;
}

template <bool Parallel> void BM_Ry(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto a = random_state(n);
    for (auto _ : state) {
        for (std::size_t q = 0; q < n; ++q) {
            if constexpr (Parallel) {
                k::ry(a, n, q, 0.3);
            } else {
                k::serial::ry(a, n, q, 0.3);
            }
        }
        benchmark::DoNotOptimize(a.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * a.size()));
}

template <bool Parallel> void BM_Cnot(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto a = random_state(n);
    for (auto _ : state) {
        for (std::size_t q = 0; q + 1 < n; ++q) {
            if constexpr (Parallel) {
                k::cnot(a, n, q, q + 1);
            } else {
                k::serial::cnot(a, n, q, q + 1);
            }
        }
        benchmark::DoNotOptimize(a.data());
    }
}

template <bool Parallel> void BM_G2(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto a = random_state(n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::g2(a, n, 0, 1, n - 2, n - 1, 0.7);
        } else {
            k::serial::g2(a, n, 0, 1, n - 2, n - 1, 0.7);
        }
        benchmark::DoNotOptimize(a.data());
    }
}

/// TFIM terms on n qubits: a mix of diagonal and bit-flipping strings.
std::vector<flowvqe::PauliMask> tfim_masks(std::size_t n) {
    const auto h = flowvqe::tfim(n, 1.0, 1.0);
    return h.masks();
}

template <bool Parallel> void BM_Expectation(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_state(n);
    const auto terms = tfim_masks(n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            benchmark::DoNotOptimize(k::hamiltonian_expectation(a, terms));
        } else {
            benchmark::DoNotOptimize(k::serial::hamiltonian_expectation(a, terms));
        }
    }
}

template <bool Parallel> void BM_Inner(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_state(n);
    const auto b = random_state(n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            benchmark::DoNotOptimize(k::inner(a, b));
        } else {
            benchmark::DoNotOptimize(k::serial::inner(a, b));
        }
    }
}

} // namespace

BENCHMARK(BM_Ry<false>)->Name("ry/serial")->DenseRange(10, 16, 3);
BENCHMARK(BM_Ry<true>)->Name("ry/parallel")->DenseRange(10, 16, 3);
BENCHMARK(BM_Cnot<false>)->Name("cnot/serial")->DenseRange(10, 16, 3);
BENCHMARK(BM_Cnot<true>)->Name("cnot/parallel")->DenseRange(10, 16, 3);
BENCHMARK(BM_G2<false>)->Name("g2/serial")->DenseRange(10, 16, 3);
BENCHMARK(BM_G2<true>)->Name("g2/parallel")->DenseRange(10, 16, 3);
BENCHMARK(BM_Expectation<false>)->Name("expectation/serial")->DenseRange(10, 16, 3);
BENCHMARK(BM_Expectation<true>)->Name("expectation/parallel")->DenseRange(10, 16, 3);
BENCHMARK(BM_Inner<false>)->Name("inner/serial")->DenseRange(10, 16, 3);
BENCHMARK(BM_Inner<true>)->Name("inner/parallel")->DenseRange(10, 16, 3);

BENCHMARK_MAIN();
