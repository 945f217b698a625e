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
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "flowvqe/simulator.hpp"

using namespace flowvqe;
using cd = std::complex<double>;

namespace {

const double kPi = std::numbers::pi;

StateVector random_state(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    StateVector s(n);
    double norm = 0.0;
    for (auto &a : s.amps()) {
        a = cd(nd(gen), nd(gen));
        norm += std::norm(a);
    }
    for (auto &a : s.amps()) {
        a /= std::sqrt(norm);
    }
    return s;
}

/// Column j of the gate matrix is the gate applied to |j>.
std::vector<std::vector<cd>> gate_matrix(const GateOp &g, std::size_t n) {
    const std::size_t dim = std::size_t{1} << n;
    std::vector<std::vector<cd>> u(dim, std::vector<cd>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
        StateVector s(n);
        s.amps()[0] = 0.0;
        s.amps()[j] = 1.0;
        apply_gate(s, g);
        for (std::size_t i = 0; i < dim; ++i) {
            u[i][j] = s.amps()[i];
        }
    }
    return u;
}

double unitarity_defect(const std::vector<std::vector<cd>> &u) {
    const std::size_t dim = u.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            cd acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                acc += std::conj(u[k][i]) * u[k][j];
            }
            worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

/// Probability mass per particle number (popcount of the basis index).
std::vector<double> number_distribution(const StateVector &s) {
    std::vector<double> p(s.n_qubits() + 1, 0.0);
    for (std::size_t b = 0; b < s.dim(); ++b) {
        p[std::popcount(b)] += std::norm(s.amps()[b]);
    }
    return p;
}

/// Reference Pauli action on a dense vector, built from single-qubit rules.
std::vector<cd> apply_pauli_string(const std::vector<cd> &v, const std::string &p) {
    const std::size_t n = p.size();
    std::vector<cd> out(v);
    for (std::size_t q = 0; q < n; ++q) {
        const std::size_t bit = std::size_t{1} << (n - 1 - q);
        std::vector<cd> next(out.size());
        for (std::size_t b = 0; b < out.size(); ++b) {
            const bool one = (b & bit) != 0;
            switch (p[q]) {
            case 'X':
                next[b ^ bit] += out[b];
                break;
            case 'Y':
                next[b ^ bit] += out[b] * (one ? cd(0, -1) : cd(0, 1));
                break;
            case 'Z':
                next[b] += one ? -out[b] : out[b];
                break;
            default:
                next[b] += out[b];
            }
        }
        out.swap(next);
    }
    return out;
}

} // namespace

TEST_CASE("every gate is unitary to 1e-12") {
    const std::size_t n = 4;
    const std::vector<GateOp> gates{GateOp::ry(0, 0.37),     GateOp::ry(3, -2.1),
                                    GateOp::h(2),            GateOp::cnot(0, 3),
                                    GateOp::cnot(3, 1),      GateOp::g1(1, 2, 0.9),
                                    GateOp::g1(3, 0, -1.7),  GateOp::g2(0, 1, 2, 3, 1.3),
                                    GateOp::g2(3, 1, 0, 2, -0.4)};
    for (const auto &g : gates) {
        CHECK(unitarity_defect(gate_matrix(g, n)) < 1e-12);
    }
}

TEST_CASE("RY and CNOT match their textbook matrices") {
    const double t = 0.8;
    const auto u = gate_matrix(GateOp::ry(0, t), 1);
    CHECK(std::abs(u[0][0] - std::cos(t / 2)) < 1e-15);
    CHECK(std::abs(u[0][1] + std::sin(t / 2)) < 1e-15);
    CHECK(std::abs(u[1][0] - std::sin(t / 2)) < 1e-15);
    CHECK(std::abs(u[1][1] - std::cos(t / 2)) < 1e-15);

    // Control on qubit 0 (MSB): |10> -> |11>.
    auto s = prepare_basis(2, "10");
    apply_gate(s, GateOp::cnot(0, 1));
    CHECK(s == prepare_basis(2, "11"));
    auto r = prepare_basis(2, "01");
    apply_gate(r, GateOp::cnot(0, 1));
    CHECK(r == prepare_basis(2, "01"));
}

TEST_CASE("Givens gates conserve particle number") {
    for (unsigned seed = 1; seed <= 3; ++seed) {
        auto s = random_state(5, seed);
        const auto before = number_distribution(s);
        const std::vector<GateOp> gates{GateOp::g1(0, 3, 0.7), GateOp::g2(4, 1, 2, 0, -1.1),
                                        GateOp::g1(2, 1, 2.9), GateOp::g2(0, 1, 3, 4, 0.35)};
        apply_circuit(s, gates);
        const auto after = number_distribution(s);
        for (std::size_t k = 0; k < before.size(); ++k) {
            CHECK(std::abs(before[k] - after[k]) < 1e-12);
        }
    }
}

TEST_CASE("G1(pi) moves |01> to |10> and G2(pi) moves |0011> to |1100>") {
    auto s = prepare_basis(2, "01");
    apply_gate(s, GateOp::g1(0, 1, kPi));
    const auto target = prepare_basis(2, "10");
    for (std::size_t b = 0; b < 4; ++b) {
        CHECK(std::abs(s.amps()[b] - target.amps()[b]) < 1e-15);
    }
    auto d = prepare_basis(4, "0011");
    apply_gate(d, GateOp::g2(0, 1, 2, 3, kPi));
    const auto dt = prepare_basis(4, "1100");
    for (std::size_t b = 0; b < 16; ++b) {
        CHECK(std::abs(d.amps()[b] - dt.amps()[b]) < 1e-15);
    }
}

TEST_CASE("expectation is linear in the Hamiltonian") {
    const auto s = random_state(3, 7);
    const Hamiltonian a(3, {{"XYZ", 0.3}, {"ZZI", -1.2}});
    const Hamiltonian b(3, {{"IYY", 0.8}, {"XII", 0.5}, {"III", 0.1}});
    const double alpha = -2.5;
    const Hamiltonian sum(3, {{"XYZ", 0.3}, {"ZZI", -1.2}, {"IYY", alpha * 0.8},
                              {"XII", alpha * 0.5}, {"III", alpha * 0.1}});
    EvalCounter c;
    const double lhs = expectation(s, sum, c);
    const double rhs = expectation(s, a, c) + alpha * expectation(s, b, c);
    CHECK(std::abs(lhs - rhs) < 1e-12);
    CHECK(c.value() == 3);
}

TEST_CASE("3-qubit expectations agree with dense exact diagonalization") {
    const Hamiltonian h(3, {{"XYZ", 0.3}, {"YYI", -0.7}, {"IZX", 1.1}, {"ZZI", 0.5}, {"ZIY", 0.4},
                            {"III", -0.2}});
    for (unsigned seed = 11; seed < 16; ++seed) {
        const auto s = random_state(3, seed);
        std::vector<cd> v(s.amps().begin(), s.amps().end());
        cd oracle = 0.0;
        for (const auto &t : h.terms()) {
            const auto pv = apply_pauli_string(v, t.pauli);
            for (std::size_t b = 0; b < v.size(); ++b) {
                oracle += t.coeff * std::conj(v[b]) * pv[b];
            }
        }
        EvalCounter c;
        CHECK(std::abs(expectation(s, h, c) - oracle.real()) < 1e-9);
    }
    // The ground state found by the dense solver attains the exact energy.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_matrix(h));
    StateVector g(3);
    for (std::size_t b = 0; b < 8; ++b) {
        g.amps()[b] = es.eigenvectors()(static_cast<Eigen::Index>(b), 0);
    }
    EvalCounter c;
    CHECK(std::abs(expectation(g, h, c) - exact_ground_energy(h)) < 1e-9);
}

TEST_CASE("overlap counts one evaluation and is symmetric") {
    const auto a = random_state(3, 1);
    const auto b = random_state(3, 2);
    EvalCounter c;
    const double ab = overlap(a, b, c);
    CHECK(std::abs(ab - overlap(b, a, c)) < 1e-14);
    CHECK(std::abs(overlap(a, a, c) - 1.0) < 1e-12);
    CHECK(c.value() == 3);
}

TEST_CASE("gate validation rejects bad targets and angles") {
    CHECK_THROWS_AS(validate_gate(GateOp::ry(3, 0.1), 3), std::invalid_argument);
    CHECK_THROWS_AS(validate_gate(GateOp::cnot(1, 1), 3), std::invalid_argument);
    CHECK_THROWS_AS(validate_gate(GateOp::g2(0, 1, 1, 2, 0.1), 3), std::invalid_argument);
    GateOp bad = GateOp::h(0);
    bad.angle = 0.3;
    CHECK_THROWS_AS(validate_gate(bad, 2), std::invalid_argument);
    CHECK_THROWS_AS(prepare_basis(2, "012"), std::invalid_argument);
}
