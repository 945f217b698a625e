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
#include "flowvqe/kernels.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

namespace flowvqe::kernels {

namespace {

using Index = std::int64_t;

constexpr std::uint64_t bit_of(std::size_t n, std::size_t q) {
    return std::uint64_t{1} << (n - 1 - q);
}

/// Spread `i` so that zeros appear at the given (ascending) bit positions.
template <std::size_t N>
inline std::uint64_t insert_zeros(std::uint64_t i, const std::array<unsigned, N> &sorted_pos) {
    for (unsigned p : sorted_pos) {
        const std::uint64_t low = i & ((std::uint64_t{1} << p) - 1);
        i = ((i >> p) << (p + 1)) | low;
    }
    return i;
}

template <std::size_t N>
std::array<unsigned, N> sorted_positions(std::size_t n, std::array<std::size_t, N> qubits) {
    std::array<unsigned, N> pos{};
    for (std::size_t k = 0; k < N; ++k) {
        pos[k] = static_cast<unsigned>(n - 1 - qubits[k]);
    }
    std::sort(pos.begin(), pos.end());
    return pos;
}

inline bool parallel(std::size_t dim) { return dim >= kParallelMinDim; }

/// Runs body(k) for k in [0, count). The serial path is a plain loop rather
/// than an OpenMP region with a false `if`, which keeps the body inlined.
template <class Body> void for_each_index(std::size_t count, bool par, const Body &body) {
    if (par) {
#pragma omp parallel for schedule(static)
        for (Index k = 0; k < static_cast<Index>(count); ++k) {
        body(static_cast<std::uint64_t>(k));
        }
    } else {
        for (std::uint64_t k = 0; k < count; ++k) {
        body(k);
        }
    }
}

std::complex<double> chunked_sum(std::size_t dim,
                             const auto &term /* (uint64_t) -> complex<double> */) {
    const std::size_t chunks = (dim + kReduceChunk - 1) / kReduceChunk;
    std::vector<std::complex<double>> partial(chunks);
#pragma omp parallel for schedule(static) if (parallel(dim))
    for (Index c = 0; c < static_cast<Index>(chunks); ++c) {
        const std::uint64_t lo = static_cast<std::uint64_t>(c) * kReduceChunk;
        const std::uint64_t hi = std::min<std::uint64_t>(lo + kReduceChunk, dim);
        double re = 0.0;
        double im = 0.0;
        for (std::uint64_t b = lo; b < hi; ++b) {
        const auto v = term(b);
        re += v.real();
        im += v.imag();
        }
        partial[static_cast<std::size_t>(c)] = {re, im};
    }
    std::complex<double> total{0.0, 0.0};
    for (const auto &p : partial) {
        total += p;
    }
    return total;
}

} // namespace

void ry(std::span<Amplitude> amps, std::size_t n, std::size_t q, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const auto pos = sorted_positions<1>(n, {q});
    const std::uint64_t m = bit_of(n, q);
    const std::size_t half = amps.size() / 2;
    Amplitude *a = amps.data();
    for_each_index(half, parallel(amps.size()), [&](std::uint64_t k) {
        const std::uint64_t i0 = insert_zeros(k, pos);
        const std::uint64_t i1 = i0 | m;
        const Amplitude x0 = a[i0];
        const Amplitude x1 = a[i1];
        a[i0] = c * x0 - s * x1;
        a[i1] = s * x0 + c * x1;
    });
}

void hadamard(std::span<Amplitude> amps, std::size_t n, std::size_t q) {
    constexpr double r = 0.70710678118654752440084436210485;
    const auto pos = sorted_positions<1>(n, {q});
    const std::uint64_t m = bit_of(n, q);
    const std::size_t half = amps.size() / 2;
    Amplitude *a = amps.data();
    for_each_index(half, parallel(amps.size()), [&](std::uint64_t k) {
        const std::uint64_t i0 = insert_zeros(k, pos);
        const std::uint64_t i1 = i0 | m;
        const Amplitude x0 = a[i0];
        const Amplitude x1 = a[i1];
        a[i0] = r * (x0 + x1);
        a[i1] = r * (x0 - x1);
    });
}

void cnot(std::span<Amplitude> amps, std::size_t n, std::size_t control, std::size_t target) {
    const auto pos = sorted_positions<2>(n, {control, target});
    const std::uint64_t mc = bit_of(n, control);
    const std::uint64_t mt = bit_of(n, target);
    const std::size_t quarter = amps.size() / 4;
    Amplitude *a = amps.data();
    for_each_index(quarter, parallel(amps.size()), [&](std::uint64_t k) {
        const std::uint64_t base = insert_zeros(k, pos) | mc;
        std::swap(a[base], a[base | mt]);
    });
}

void g1(std::span<Amplitude> amps, std::size_t n, std::size_t qa, std::size_t qb, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const auto pos = sorted_positions<2>(n, {qa, qb});
    const std::uint64_t ma = bit_of(n, qa);
    const std::uint64_t mb = bit_of(n, qb);
    const std::size_t quarter = amps.size() / 4;
    Amplitude *a = amps.data();
    for_each_index(quarter, parallel(amps.size()), [&](std::uint64_t k) {
        const std::uint64_t base = insert_zeros(k, pos);
        const std::uint64_t i01 = base | mb;
        const std::uint64_t i10 = base | ma;
        const Amplitude x01 = a[i01];
        const Amplitude x10 = a[i10];
        a[i01] = c * x01 - s * x10;
        a[i10] = s * x01 + c * x10;
    });
}

void g2(std::span<Amplitude> amps, std::size_t n, std::size_t qa, std::size_t qb, std::size_t qc,
        std::size_t qd, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const auto pos = sorted_positions<4>(n, {qa, qb, qc, qd});
    const std::uint64_t hi_pair = bit_of(n, qa) | bit_of(n, qb);
    const std::uint64_t lo_pair = bit_of(n, qc) | bit_of(n, qd);
    const std::size_t count = amps.size() / 16;
    Amplitude *a = amps.data();
    for_each_index(count, parallel(amps.size()), [&](std::uint64_t k) {
        const std::uint64_t base = insert_zeros(k, pos);
        const std::uint64_t i0011 = base | lo_pair;
        const std::uint64_t i1100 = base | hi_pair;
        const Amplitude x0011 = a[i0011];
        const Amplitude x1100 = a[i1100];
        a[i0011] = c * x0011 - s * x1100;
        a[i1100] = s * x0011 + c * x1100;
    });
}

std::complex<double> pauli_expectation(std::span<const Amplitude> amps, const PauliMask &p) {
    static constexpr std::array<std::complex<double>, 4> ipow = {
        std::complex<double>{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const Amplitude *a = amps.data();
    const auto sum = chunked_sum(amps.size(), [&](std::uint64_t b) {
        const double sign = (std::popcount(b & p.z_mask) & 1) != 0 ? -1.0 : 1.0;
        return std::conj(a[b ^ p.x_mask]) * a[b] * sign;
    });
    return ipow[p.y_count & 3U] * sum;
}

std::complex<double> hamiltonian_expectation(std::span<const Amplitude> amps,
                                             std::span<const PauliMask> terms) {
    std::complex<double> total{0.0, 0.0};
    for (const auto &t : terms) {
        total += t.coeff * pauli_expectation(amps, t);
    }
    return total;
}

std::complex<double> inner(std::span<const Amplitude> a, std::span<const Amplitude> b) {
    const Amplitude *pa = a.data();
    const Amplitude *pb = b.data();
    return chunked_sum(a.size(), [&](std::uint64_t i) { return std::conj(pa[i]) * pb[i]; });
}

} // namespace flowvqe::kernels
