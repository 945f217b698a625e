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
#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "flowvqe/hamiltonian.hpp"

/// Statevector kernels. Amplitude arrays have length 2^n with qubit 0 on the
/// most significant bit of the index. Targets are not validated here; the
/// simulator layer checks them.
///
/// The top-level functions are OpenMP-parallel above kParallelMinDim
/// amplitudes and reduce in fixed-size chunks, so results do not depend on
/// the thread count. The `serial` namespace holds straightforward reference
/// versions used by the tests and the benchmark.
namespace flowvqe::kernels {

using Amplitude = std::complex<double>;

/// Below this many amplitudes the kernels run single-threaded.
inline constexpr std::size_t kParallelMinDim = std::size_t{1} << 14;
/// Reduction chunk; partial sums are combined in chunk order.
inline constexpr std::size_t kReduceChunk = 4096;

void ry(std::span<Amplitude> amps, std::size_t n, std::size_t q, double theta);
void hadamard(std::span<Amplitude> amps, std::size_t n, std::size_t q);
void cnot(std::span<Amplitude> amps, std::size_t n, std::size_t control, std::size_t target);
/// Two-level rotation in span{|01>, |10>} of (a, b): |01> -> c|01> + s|10>.
void g1(std::span<Amplitude> amps, std::size_t n, std::size_t a, std::size_t b, double theta);
/// Two-level rotation in span{|0011>, |1100>} of (a, b, c, d):
/// |0011> -> cos(theta/2)|0011> + sin(theta/2)|1100>.
void g2(std::span<Amplitude> amps, std::size_t n, std::size_t a, std::size_t b, std::size_t c,
        std::size_t d, double theta);

/// <psi|P|psi> for one Pauli string (coefficient not applied).
std::complex<double> pauli_expectation(std::span<const Amplitude> amps, const PauliMask &p);
/// sum_k coeff_k <psi|P_k|psi>.
std::complex<double> hamiltonian_expectation(std::span<const Amplitude> amps,
                                             std::span<const PauliMask> terms);
/// <a|b>.
std::complex<double> inner(std::span<const Amplitude> a, std::span<const Amplitude> b);

namespace serial {

void ry(std::span<Amplitude> amps, std::size_t n, std::size_t q, double theta);
void hadamard(std::span<Amplitude> amps, std::size_t n, std::size_t q);
void cnot(std::span<Amplitude> amps, std::size_t n, std::size_t control, std::size_t target);
void g1(std::span<Amplitude> amps, std::size_t n, std::size_t a, std::size_t b, double theta);
void g2(std::span<Amplitude> amps, std::size_t n, std::size_t a, std::size_t b, std::size_t c,
        std::size_t d, double theta);
/// Applies P to a scratch copy and takes the inner product.
std::complex<double> pauli_expectation(std::span<const Amplitude> amps, const PauliMask &p);
std::complex<double> hamiltonian_expectation(std::span<const Amplitude> amps,
                                             std::span<const PauliMask> terms);
std::complex<double> inner(std::span<const Amplitude> a, std::span<const Amplitude> b);

} // namespace serial

} // namespace flowvqe::kernels
