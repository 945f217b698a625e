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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace flowvqe {

/// Largest register handled by the dense routines (matrix assembly and the
/// statevector simulator).
inline constexpr std::size_t kMaxQubits = 16;

struct PauliTerm {
    std::string pauli; ///< one of I, X, Y, Z per qubit; qubit 0 leftmost
    double coeff = 0.0;
};

struct ReferenceEnergies {
    std::optional<double> hf;
    std::optional<double> exact;
};

/**
 * Bit-mask form of a Pauli string. Acting on a computational basis state
 * |b>, the operator gives phase * (-1)^popcount(b & z_mask) |b ^ x_mask>
 * with phase = i^y_count. Qubit q corresponds to bit (n - 1 - q), so qubit 0
 * is the most significant bit of the basis index.
 */
struct PauliMask {
    std::uint64_t x_mask = 0;
    std::uint64_t z_mask = 0;
    unsigned y_count = 0;
    double coeff = 0.0;
};

/// Weighted sum of Pauli strings. Term order is the ingestion order and is
/// never rearranged.
class Hamiltonian {
  public:
    Hamiltonian(std::size_t n_qubits, std::vector<PauliTerm> terms, std::string family_id = {},
                std::string instance_label = {}, ReferenceEnergies ref = {});

    [[nodiscard]] std::size_t n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] const std::vector<PauliTerm> &terms() const noexcept { return terms_; }
    [[nodiscard]] const std::vector<PauliMask> &masks() const noexcept { return masks_; }
    [[nodiscard]] const std::string &family_id() const noexcept { return family_id_; }
    [[nodiscard]] const std::string &instance_label() const noexcept { return instance_label_; }
    [[nodiscard]] const ReferenceEnergies &ref_energies() const noexcept { return ref_; }

    void set_ref_energies(ReferenceEnergies ref) { ref_ = ref; }

    /// Coefficient of a Pauli string, or nullopt when the term is absent.
    [[nodiscard]] std::optional<double> coefficient(std::string_view pauli) const;

    /// H + c * I. Merges into an existing identity term when present.
    [[nodiscard]] Hamiltonian shifted(double c) const;

    /// Pauli strings in term order.
    [[nodiscard]] std::vector<std::string> term_order() const;

  private:
    std::size_t n_qubits_;
    std::vector<PauliTerm> terms_;
    std::vector<PauliMask> masks_;
    std::string family_id_;
    std::string instance_label_;
    ReferenceEnergies ref_;
};

/// Parse the Pauli string into its mask form. Throws on illegal characters.
PauliMask pauli_mask(std::string_view pauli, double coeff = 1.0);

/// Parse a Hamiltonian JSON document (format_version 1).
Hamiltonian parse_hamiltonian(std::string_view json_text);
Hamiltonian load_hamiltonian(const std::filesystem::path &path);
std::string hamiltonian_to_json(const Hamiltonian &h);
void save_hamiltonian(const Hamiltonian &h, const std::filesystem::path &path);

/// Open-chain transverse-field Ising model
/// -J sum Z_i Z_{i+1} - g sum X_i, ZZ block first then X block.
Hamiltonian tfim(std::size_t n, double J, double g);

/// Dense 2^n x 2^n matrix of the Hamiltonian.
Eigen::MatrixXcd dense_matrix(const Hamiltonian &h, std::size_t max_qubits = kMaxQubits);

/// Smallest eigenvalue by full dense diagonalization.
double exact_ground_energy(const Hamiltonian &h, std::size_t max_qubits = kMaxQubits);

/// Hamiltonian coefficients laid out in a family-wide Pauli-string order.
struct ContextVector {
    std::vector<double> values;
    std::vector<std::string> term_order;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
};

/// values[i] = coefficient of family_order[i] in h, 0 when absent.
ContextVector context_of(const Hamiltonian &h, std::span<const std::string> family_order);

/// Union of term orders across instances, by first appearance, without the
/// all-identity string.
std::vector<std::string> family_term_order(std::span<const Hamiltonian> instances);

} // namespace flowvqe
