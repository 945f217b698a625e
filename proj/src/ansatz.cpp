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
#include "flowvqe/ansatz.hpp"

#include <cmath>
#include <stdexcept>

namespace flowvqe {

ExcitationList enumerate_excitations(std::size_t n_electrons, std::size_t n_spin_orbitals) {
    if (n_electrons == 0 || n_electrons >= n_spin_orbitals || n_electrons % 2 != 0 ||
        n_spin_orbitals % 2 != 0) {
        throw std::invalid_argument(
            "excitations need 0 < n_electrons < n_spin_orbitals, both even");
    }
    const auto spin = [](std::size_t p) { return p % 2; };
    ExcitationList out;
    for (std::size_t i = 0; i < n_electrons; ++i) {
        for (std::size_t a = n_electrons; a < n_spin_orbitals; ++a) {
            if (spin(i) == spin(a)) {
                out.singles.push_back({i, a});
            }
        }
    }
    for (std::size_t i = 0; i < n_electrons; ++i) {
        for (std::size_t j = i + 1; j < n_electrons; ++j) {
            for (std::size_t a = n_electrons; a < n_spin_orbitals; ++a) {
                for (std::size_t b = a + 1; b < n_spin_orbitals; ++b) {
                    if (spin(i) + spin(j) == spin(a) + spin(b)) {
                        out.doubles.push_back({i, j, a, b});
                    }
                }
            }
        }
    }
    return out;
}

AnsatzSpec AnsatzSpec::hea(std::size_t n_qubits, std::size_t layers) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw std::invalid_argument("HEA needs 1 <= n_qubits <= " + std::to_string(kMaxQubits));
    }
    AnsatzSpec s;
    s.kind_ = AnsatzKind::HEA;
    s.n_qubits_ = n_qubits;
    s.layers_ = layers;
    s.reference_.assign(n_qubits, '0');
    return s;
}

AnsatzSpec AnsatzSpec::gsd(std::size_t n_electrons, std::size_t n_spin_orbitals) {
    if (n_spin_orbitals > kMaxQubits) {
        throw std::invalid_argument("GSD register exceeds " + std::to_string(kMaxQubits) +
                                    " qubits");
    }
    AnsatzSpec s;
    s.kind_ = AnsatzKind::GSD;
    s.excitations_ = enumerate_excitations(n_electrons, n_spin_orbitals);
    s.n_qubits_ = n_spin_orbitals;
    s.n_electrons_ = n_electrons;
    s.reference_ = std::string(n_electrons, '1') + std::string(n_spin_orbitals - n_electrons, '0');
    return s;
}

std::size_t AnsatzSpec::param_count() const noexcept {
    if (kind_ == AnsatzKind::HEA) {
        return (layers_ + 1) * n_qubits_;
    }
    return excitations_.singles.size() + excitations_.doubles.size();
}

std::vector<ParamKind> AnsatzSpec::param_kinds() const {
    return std::vector<ParamKind>(param_count(), kind_ == AnsatzKind::HEA ? ParamKind::PauliRotation
                                                                          : ParamKind::Givens);
}

std::vector<GateOp> build_circuit(const AnsatzSpec &spec, std::span<const double> theta) {
    const std::size_t d = spec.param_count();
    if (theta.size() != d) {
        throw std::invalid_argument("parameter vector has length " + std::to_string(theta.size()) +
                                    ", ansatz expects " + std::to_string(d));
    }
    for (double t : theta) {
        if (!std::isfinite(t)) {
            throw std::invalid_argument("parameter vector contains a non-finite entry");
        }
    }
    std::vector<GateOp> gates;
    std::size_t k = 0;
    if (spec.kind() == AnsatzKind::HEA) {
        const std::size_t n = spec.n_qubits();
        gates.reserve(d + spec.layers() * (n - 1));
        for (std::size_t q = 0; q < n; ++q) {
            gates.push_back(GateOp::ry(q, theta[k++]));
        }
        for (std::size_t l = 0; l < spec.layers(); ++l) {
            for (std::size_t q = 0; q + 1 < n; ++q) {
                gates.push_back(GateOp::cnot(q, q + 1));
            }
            for (std::size_t q = 0; q < n; ++q) {
                gates.push_back(GateOp::ry(q, theta[k++]));
            }
        }
        return gates;
    }
    const auto &ex = spec.excitations();
    gates.reserve(d);
    for (const auto &s : ex.singles) {
        gates.push_back(GateOp::g1(s.occ, s.virt, theta[k++]));
    }
    for (const auto &dbl : ex.doubles) {
        gates.push_back(GateOp::g2(dbl.occ1, dbl.occ2, dbl.virt1, dbl.virt2, theta[k++]));
    }
    return gates;
}

StateVector prepare_state(const AnsatzSpec &spec, std::span<const double> theta) {
    const auto gates = build_circuit(spec, theta);
    StateVector s = prepare_basis(spec.n_qubits(), spec.reference_bits());
    apply_circuit(s, gates);
    return s;
}

double energy(const AnsatzSpec &spec, const Hamiltonian &h, std::span<const double> theta,
              EvalCounter &counter) {
    return expectation(prepare_state(spec, theta), h, counter);
}

} // namespace flowvqe
