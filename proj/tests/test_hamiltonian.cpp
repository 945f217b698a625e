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
#include <cmath>
#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "flowvqe/hamiltonian.hpp"

using namespace flowvqe;
using Catch::Approx;
using cd = std::complex<double>;
using Mat = std::vector<std::vector<cd>>;

namespace {

Mat pauli2(char c) {
    const cd i(0.0, 1.0);
    switch (c) {
    case 'X':
        return {{0, 1}, {1, 0}};
    case 'Y':
        return {{0, -i}, {i, 0}};
    case 'Z':
        return {{1, 0}, {0, -1}};
    default:
        return {{1, 0}, {0, 1}};
    }
}

Mat kron(const Mat &a, const Mat &b) {
    const std::size_t n = a.size(), m = b.size();
    Mat out(n * m, std::vector<cd>(n * m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < m; ++k)
                for (std::size_t l = 0; l < m; ++l)
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
    return out;
}

/// Dense matrix by explicit Kronecker products, qubit 0 leftmost factor.
Mat kron_matrix(const Hamiltonian &h) {
    const std::size_t dim = std::size_t{1} << h.n_qubits();
    Mat out(dim, std::vector<cd>(dim));
    for (const auto &t : h.terms()) {
        Mat p{{1}};
        for (char c : t.pauli) {
            p = kron(p, pauli2(c));
        }
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                out[i][j] += t.coeff * p[i][j];
    }
    return out;
}

/// Cyclic Jacobi sweeps on a real symmetric matrix; returns the smallest eigenvalue.
double jacobi_min_eigenvalue(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += a[p][q] * a[p][q];
        if (off < 1e-26) {
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) {
                    continue;
                }
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    double m = a[0][0];
    for (std::size_t i = 1; i < n; ++i) {
        m = std::min(m, a[i][i]);
    }
    return m;
}

/// Real embedding [[A, -B], [B, A]] of a Hermitian A + iB; doubles each eigenvalue.
std::vector<std::vector<double>> real_embedding(const Mat &m) {
    const std::size_t n = m.size();
    std::vector<std::vector<double>> r(2 * n, std::vector<double>(2 * n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            r[i][j] = r[n + i][n + j] = m[i][j].real();
            r[n + i][j] = m[i][j].imag();
            r[i][n + j] = -m[i][j].imag();
        }
    return r;
}

} // namespace

TEST_CASE("pauli masks place qubit 0 on the most significant bit") {
    const auto m = pauli_mask("XIZY", 0.5);
    CHECK(m.x_mask == 0b1001);
    CHECK(m.z_mask == 0b0011);
    CHECK(m.y_count == 1);
    CHECK(m.coeff == 0.5);
    CHECK_THROWS_AS(pauli_mask("XQ"), std::invalid_argument);
    CHECK_THROWS_AS(pauli_mask(""), std::invalid_argument);
}

TEST_CASE("dense matrix matches explicit Kronecker products") {
    const Hamiltonian h(3, {{"XYZ", 0.3}, {"YYI", -0.7}, {"IZX", 1.1}, {"III", 0.25}, {"ZIY", 0.4}});
    const auto dense = dense_matrix(h);
    const auto oracle = kron_matrix(h);
    double worst = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            worst = std::max(worst, std::abs(dense(i, j) - oracle[i][j]));
    CHECK(worst < 1e-14);
}

TEST_CASE("exact ground energy agrees with a Jacobi eigensolver") {
    const Hamiltonian h(3, {{"XYZ", 0.3}, {"YYI", -0.7}, {"IZX", 1.1}, {"ZZI", 0.5}, {"ZIY", 0.4}});
    const double oracle = jacobi_min_eigenvalue(real_embedding(kron_matrix(h)));
    CHECK(std::abs(exact_ground_energy(h) - oracle) < 1e-9);

    const auto t = tfim(4, 1.0, 1.0);
    const double tfim_oracle = jacobi_min_eigenvalue(real_embedding(kron_matrix(t)));
    CHECK(std::abs(exact_ground_energy(t) - tfim_oracle) < 1e-9);
}

TEST_CASE("two-site TFIM ground energy has the closed form -sqrt(J^2 + 4 g^2)") {
    for (double g : {0.0, 0.3, 1.0, 2.5}) {
        CHECK(exact_ground_energy(tfim(2, 1.0, g)) == Approx(-std::sqrt(1.0 + 4.0 * g * g)).margin(1e-12));
    }
}

TEST_CASE("tfim term layout puts the ZZ block before the X block") {
    const auto h = tfim(3, 0.5, 2.0);
    const std::vector<std::string> order{"ZZI", "IZZ", "XII", "IXI", "IIX"};
    CHECK(h.term_order() == order);
    CHECK(h.coefficient("ZZI") == Approx(-0.5));
    CHECK(h.coefficient("IIX") == Approx(-2.0));
    CHECK_FALSE(h.coefficient("YYY").has_value());
    CHECK(h.family_id() == "tfim-n3");
    CHECK_THROWS_AS(tfim(1, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("hamiltonian JSON round trip keeps terms, labels and references") {
    Hamiltonian h(2, {{"ZI", -1.25}, {"XX", 0.5}}, "fam", "d=0.7", {-1.0, -1.5});
    const auto back = parse_hamiltonian(hamiltonian_to_json(h));
    CHECK(back.term_order() == h.term_order());
    CHECK(back.coefficient("ZI") == -1.25);
    CHECK(back.family_id() == "fam");
    CHECK(back.instance_label() == "d=0.7");
    CHECK(back.ref_energies().hf == -1.0);
    CHECK(back.ref_energies().exact == -1.5);

    const auto path = std::filesystem::temp_directory_path() / "flowvqe_ham_roundtrip.json";
    save_hamiltonian(h, path);
    CHECK(load_hamiltonian(path).coefficient("XX") == 0.5);
    std::filesystem::remove(path);

    const auto unset = parse_hamiltonian(
        R"({"n_qubits":1,"terms":[{"pauli":"Z","coeff":1}],"ref_energies":{"hf":null,"exact":-1}})");
    CHECK_FALSE(unset.ref_energies().hf.has_value());
    CHECK(unset.ref_energies().exact == -1.0);
}

TEST_CASE("malformed hamiltonian documents are rejected") {
    CHECK_THROWS_AS(parse_hamiltonian("{"), std::invalid_argument);
    CHECK_THROWS_AS(parse_hamiltonian("[1,2]"), std::invalid_argument);
    CHECK_THROWS_AS(parse_hamiltonian(R"({"n_qubits":2,"terms":[{"pauli":"ZZZ","coeff":1}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_hamiltonian(R"({"n_qubits":2,"terms":[{"pauli":"ZW","coeff":1}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        parse_hamiltonian(R"({"n_qubits":1,"terms":[{"pauli":"Z","coeff":1},{"pauli":"Z","coeff":2}]})"),
        std::invalid_argument);
    CHECK_THROWS_AS(parse_hamiltonian(R"({"n_qubits":1,"terms":[]})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_hamiltonian(R"({"format_version":2,"n_qubits":1,"terms":[{"pauli":"Z","coeff":1}]})"),
                    std::invalid_argument);
    CHECK_THROWS(load_hamiltonian("/nonexistent/h.json"));
}

TEST_CASE("shifted adds an identity term or merges into one") {
    const Hamiltonian h(2, {{"ZZ", 1.0}, {"II", 0.5}});
    const auto s = h.shifted(2.0);
    CHECK(s.coefficient("II") == Approx(2.5));
    CHECK(s.term_order() == h.term_order());
    const auto t = tfim(2, 1.0, 1.0).shifted(-3.0);
    CHECK(t.coefficient("II") == Approx(-3.0));
    CHECK(exact_ground_energy(t) == Approx(exact_ground_energy(tfim(2, 1.0, 1.0)) - 3.0).margin(1e-12));
}

TEST_CASE("family contexts follow the union order and skip the identity") {
    const Hamiltonian a(2, {{"II", 1.0}, {"ZI", 0.1}, {"XX", 0.2}});
    const Hamiltonian b(2, {{"YY", 0.3}, {"ZI", 0.4}});
    const std::vector<Hamiltonian> both{a, b};
    const auto order = family_term_order(both);
    CHECK(order == std::vector<std::string>{"ZI", "XX", "YY"});
    const auto ca = context_of(a, order);
    const auto cb = context_of(b, order);
    CHECK(ca.values == std::vector<double>{0.1, 0.2, 0.0});
    CHECK(cb.values == std::vector<double>{0.4, 0.0, 0.3});
}
