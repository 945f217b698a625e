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

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "flowvqe/hamiltonian.hpp"
#include "flowvqe/kernels.hpp"

namespace flowvqe {

using kernels::Amplitude;

/// Dense statevector, qubit 0 on the most significant index bit.
class StateVector {
  public:
    /// |0...0> on n qubits.
    explicit StateVector(std::size_t n_qubits);

    [[nodiscard]] std::size_t n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t dim() const noexcept { return amps_.size(); }
    [[nodiscard]] std::span<Amplitude> amps() noexcept { return amps_; }
    [[nodiscard]] std::span<const Amplitude> amps() const noexcept { return amps_; }
    [[nodiscard]] double norm_squared() const;

    friend bool operator==(const StateVector &, const StateVector &) = default;

  private:
    std::size_t n_qubits_;
    std::vector<Amplitude> amps_;
};

/// Computational basis state from a bitstring ("0"/"1" per qubit).
StateVector prepare_basis(std::size_t n_qubits, std::string_view bits);

enum class GateKind { RY, H, CNOT, G1, G2 };

struct GateOp {
    GateKind kind = GateKind::H;
    std::array<std::size_t, 4> targets{};
    std::optional<double> angle;

    static GateOp ry(std::size_t q, double theta) { return {GateKind::RY, {q}, theta}; }
    static GateOp h(std::size_t q) { return {GateKind::H, {q}, std::nullopt}; }
    static GateOp cnot(std::size_t control, std::size_t target) {
        return {GateKind::CNOT, {control, target}, std::nullopt};
    }
    static GateOp g1(std::size_t a, std::size_t b, double theta) {
        return {GateKind::G1, {a, b}, theta};
    }
    static GateOp g2(std::size_t a, std::size_t b, std::size_t c, std::size_t d, double theta) {
        return {GateKind::G2, {a, b, c, d}, theta};
    }

    [[nodiscard]] std::size_t arity() const noexcept;
    [[nodiscard]] bool parameterized() const noexcept;

    friend bool operator==(const GateOp &, const GateOp &) = default;
};

/// Throws std::invalid_argument when targets are out of range or repeated, or
/// when the angle presence does not match the kind.
void validate_gate(const GateOp &g, std::size_t n_qubits);

void apply_gate(StateVector &s, const GateOp &g);
void apply_circuit(StateVector &s, std::span<const GateOp> gates);

/// Number of circuit executions (energy expectations and state overlaps).
class EvalCounter {
  public:
    void add(std::uint64_t n = 1) noexcept { count_ += n; }
    [[nodiscard]] std::uint64_t value() const noexcept { return count_; }

  private:
    std::uint64_t count_ = 0;
};

/// <s|H|s>; counts one circuit evaluation regardless of the term count.
double expectation(const StateVector &s, const Hamiltonian &h, EvalCounter &counter);

/// |<a|b>|^2; counts one circuit evaluation.
double overlap(const StateVector &a, const StateVector &b, EvalCounter &counter);

} // namespace flowvqe
