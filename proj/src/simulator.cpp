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
#include "flowvqe/simulator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flowvqe {

StateVector::StateVector(std::size_t n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits == 0 || n_qubits > kMaxQubits) {
        throw std::invalid_argument("state register size must be in [1, " +
                                    std::to_string(kMaxQubits) + "]");
    }
    amps_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
    amps_[0] = 1.0;
}

double StateVector::norm_squared() const { return kernels::inner(amps_, amps_).real(); }

StateVector prepare_basis(std::size_t n_qubits, std::string_view bits) {
    if (bits.size() != n_qubits) {
        throw std::invalid_argument("bitstring length " + std::to_string(bits.size()) +
                                    " does not match " + std::to_string(n_qubits) + " qubits");
    }
    std::uint64_t index = 0;
    for (char b : bits) {
        if (b != '0' && b != '1') {
            throw std::invalid_argument("bitstring may only contain 0 and 1, got '" +
                                        std::string(1, b) + "'");
        }
        index = (index << 1U) | static_cast<std::uint64_t>(b == '1');
    }
    StateVector s(n_qubits);
    auto amps = s.amps();
    amps[0] = 0.0;
    amps[index] = 1.0;
    return s;
}

std::size_t GateOp::arity() const noexcept {
    switch (kind) {
    case GateKind::RY:
    case GateKind::H:
        return 1;
    case GateKind::CNOT:
    case GateKind::G1:
        return 2;
    case GateKind::G2:
        return 4;
    }
    return 0;
}

bool GateOp::parameterized() const noexcept {
    return kind == GateKind::RY || kind == GateKind::G1 || kind == GateKind::G2;
}

void validate_gate(const GateOp &g, std::size_t n_qubits) {
    const std::size_t k = g.arity();
    for (std::size_t i = 0; i < k; ++i) {
        if (g.targets[i] >= n_qubits) {
            throw std::invalid_argument("gate target " + std::to_string(g.targets[i]) +
                                        " out of range for " + std::to_string(n_qubits) +
                                        " qubits");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (g.targets[i] == g.targets[j]) {
                throw std::invalid_argument("gate targets must be distinct");
            }
        }
    }
    if (g.parameterized() != g.angle.has_value()) {
        throw std::invalid_argument("gate angle must be present exactly for RY, G1 and G2");
    }
    if (g.angle && !std::isfinite(*g.angle)) {
        throw std::invalid_argument("gate angle must be finite");
    }
}

void apply_gate(StateVector &s, const GateOp &g) {
    const std::size_t n = s.n_qubits();
    validate_gate(g, n);
    const auto &t = g.targets;
    switch (g.kind) {
    case GateKind::RY:
        kernels::ry(s.amps(), n, t[0], *g.angle);
        break;
    case GateKind::H:
        kernels::hadamard(s.amps(), n, t[0]);
        break;
    case GateKind::CNOT:
        kernels::cnot(s.amps(), n, t[0], t[1]);
        break;
    case GateKind::G1:
        kernels::g1(s.amps(), n, t[0], t[1], *g.angle);
        break;
    case GateKind::G2:
        kernels::g2(s.amps(), n, t[0], t[1], t[2], t[3], *g.angle);
        break;
    }
}

void apply_circuit(StateVector &s, std::span<const GateOp> gates) {
    for (const auto &g : gates) {
        apply_gate(s, g);
    }
}

double expectation(const StateVector &s, const Hamiltonian &h, EvalCounter &counter) {
    if (s.n_qubits() != h.n_qubits()) {
        throw std::invalid_argument("state has " + std::to_string(s.n_qubits()) +
                                    " qubits, Hamiltonian has " + std::to_string(h.n_qubits()));
    }
    const auto e = kernels::hamiltonian_expectation(s.amps(), h.masks());
    double scale = 1.0;
    for (const auto &m : h.masks()) {
        scale += std::abs(m.coeff);
    }
    if (std::abs(e.imag()) > 1e-10 * scale) {
        throw std::logic_error("expectation has a non-negligible imaginary part");
    }
    counter.add();
    return e.real();
}

double overlap(const StateVector &a, const StateVector &b, EvalCounter &counter) {
    if (a.n_qubits() != b.n_qubits()) {
        throw std::invalid_argument("overlap of states with different qubit counts");
    }
    counter.add();
    return std::norm(kernels::inner(a.amps(), b.amps()));
}

} // namespace flowvqe
