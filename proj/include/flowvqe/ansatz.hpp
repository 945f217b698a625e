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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowvqe/simulator.hpp"

namespace flowvqe {

/// Circuit parameters in radians.
using ParameterVector = std::vector<double>;

struct SingleExcitation {
    std::size_t occ;
    std::size_t virt;
    friend bool operator==(const SingleExcitation &, const SingleExcitation &) = default;
};

struct DoubleExcitation {
    std::size_t occ1, occ2;
    std::size_t virt1, virt2;
    friend bool operator==(const DoubleExcitation &, const DoubleExcitation &) = default;
};

struct ExcitationList {
    std::vector<SingleExcitation> singles;
    std::vector<DoubleExcitation> doubles;
};

/// Spin-z preserving singles and doubles out of the first n_electrons spin
/// orbitals. Spin orbital 2k is alpha, 2k+1 is beta. Singles are ordered by
/// (occ, virt) and doubles by (occ1, occ2, virt1, virt2).
ExcitationList enumerate_excitations(std::size_t n_electrons, std::size_t n_spin_orbitals);

enum class AnsatzKind { HEA, GSD };

/// How a circuit parameter enters its gate.
enum class ParamKind {
    PauliRotation, ///< RY: exact two-term parameter shift applies
    Givens,        ///< G1 / G2
};

/**
 * Circuit template. HEA is the RY-linear hardware-efficient ansatz with an
 * initial rotation layer followed by `layers` repetitions of a CNOT chain and
 * a rotation layer; its reference is |0...0>. GSD applies one Givens gate per
 * spin-preserving excitation on the Hartree-Fock bitstring.
 */
class AnsatzSpec {
  public:
    static AnsatzSpec hea(std::size_t n_qubits, std::size_t layers);
    static AnsatzSpec gsd(std::size_t n_electrons, std::size_t n_spin_orbitals);

    [[nodiscard]] AnsatzKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t layers() const noexcept { return layers_; }
    [[nodiscard]] std::size_t n_electrons() const noexcept { return n_electrons_; }
    [[nodiscard]] const std::string &reference_bits() const noexcept { return reference_; }
    [[nodiscard]] const ExcitationList &excitations() const noexcept { return excitations_; }
    [[nodiscard]] std::size_t param_count() const noexcept;
    [[nodiscard]] std::vector<ParamKind> param_kinds() const;

  private:
    AnsatzSpec() = default;

    AnsatzKind kind_ = AnsatzKind::HEA;
    std::size_t n_qubits_ = 0;
    std::size_t layers_ = 0;
    std::size_t n_electrons_ = 0;
    std::string reference_;
    ExcitationList excitations_;
};

inline std::size_t param_count(const AnsatzSpec &spec) { return spec.param_count(); }

std::vector<GateOp> build_circuit(const AnsatzSpec &spec, std::span<const double> theta);

/// Reference basis state with the circuit applied.
StateVector prepare_state(const AnsatzSpec &spec, std::span<const double> theta);

/// prepare_state followed by a counted expectation.
double energy(const AnsatzSpec &spec, const Hamiltonian &h, std::span<const double> theta,
              EvalCounter &counter);

} // namespace flowvqe
