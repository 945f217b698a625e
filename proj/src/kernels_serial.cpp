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

// Reference kernels: a plain loop over every basis index, pairing it with
// its partner when the index is the lower member of the pair.

#include <cmath>
#include <cstdint>
#include <vector>

#include "flowvqe/kernels.hpp"

namespace flowvqe::kernels::serial {

namespace {

constexpr std::uint64_t bit_of(std::size_t n, std::size_t q) {
    return std::uint64_t{1} << (n - 1 - q);
}

void rotate_pair(Amplitude &lo, Amplitude &hi, double c, double s) {
    const Amplitude x0 = lo;
    const Amplitude x1 = hi;
    lo = c * x0 - s * x1;
    hi = s * x0 + c * x1;
}

} // namespace

void ry(std::span<Amplitude> amps, std::size_t n, std::size_t q, double theta) {
    const std::uint64_t m = bit_of(n, q);
    const double c = std::cos(theta / 2);
    const double s = std::sin(theta / 2);
    for (std::uint64_t i = 0; i < amps.size(); ++i) {
        if ((i & m) == 0) {
            rotate_pair(amps[i], amps[i | m], c, s);
        }
    }
}

void hadamard(std::span<Amplitude> amps, std::size_t n, std::size_t q) {
    const std::uint64_t m = bit_of(n, q);
    const double r = 1.0 / std::sqrt(2.0);
    for (std::uint64_t i = 0; i < amps.size(); ++i) {
        if ((i & m) == 0) {
            const Amplitude x0 = amps[i];
            const Amplitude x1 = amps[i | m];
            amps[i] = r * (x0 + x1);
            amps[i | m] = r * (x0 - x1);
        }
    }
}

void cnot(std::span<Amplitude> amps, std::size_t n, std::size_t control, std::size_t target) {
    const std::uint64_t mc = bit_of(n, control);
    const std::uint64_t mt = bit_of(n, target);
    for (std::uint64_t i = 0; i < amps.size(); ++i) {
        if ((i & mc) != 0 && (i & mt) == 0) {
            std::swap(amps[i], amps[i | mt]);
        }
    }
}

void g1(std::span<Amplitude> amps, std::size_t n, std::size_t a, std::size_t b, double theta) {
    const std::uint64_t ma = bit_of(n, a);
    const std::uint64_t mb = bit_of(n, b);
    const double c = std::cos(theta / 2);
    const double s = std::sin(theta / 2);
    for (std::uint64_t i = 0; i < amps.size(); ++i) {
        // i holds the local |01> configuration.
        if ((i & ma) == 0 && (i & mb) != 0) {
            rotate_pair(amps[i], amps[(i & ~mb) | ma], c, s);
        }
    }
}

void g2(std::span<Amplitude> amps, std::size_t n, std::size_t a, std::size_t b, std::size_t c_,
        std::size_t d, double theta) {
    const std::uint64_t hi = bit_of(n, a) | bit_of(n, b);
    const std::uint64_t lo = bit_of(n, c_) | bit_of(n, d);
    const double c = std::cos(theta / 2);
    const double s = std::sin(theta / 2);
    for (std::uint64_t i = 0; i < amps.size(); ++i) {
        if ((i & (hi | lo)) == lo) {
            rotate_pair(amps[i], amps[(i & ~lo) | hi], c, s);
        }
    }
}

std::complex<double> pauli_expectation(std::span<const Amplitude> amps, const PauliMask &p) {
    std::vector<Amplitude> scratch(amps.size());
    std::complex<double> phase{1.0, 0.0};
    for (unsigned k = 0; k < p.y_count; ++k) {
        phase *= std::complex<double>{0.0, 1.0};
    }
    for (std::uint64_t b = 0; b < amps.size(); ++b) {
        std::uint64_t parity = 0;
        for (std::uint64_t z = b & p.z_mask; z != 0; z &= z - 1) {
            parity ^= 1U;
        }
        scratch[b ^ p.x_mask] = (parity != 0 ? -1.0 : 1.0) * phase * amps[b];
    }
    return inner(amps, scratch);
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
    std::complex<double> total{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += std::conj(a[i]) * b[i];
    }
    return total;
}

} // namespace flowvqe::kernels::serial
