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
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "flowvqe/ansatz.hpp"

using namespace flowvqe;

namespace {

/// Brute-force count of spin-preserving singles and doubles: every occupied
/// set of size 1 or 2 paired with every virtual set of the same size and the
/// same number of alpha (even) orbitals.
std::size_t brute_force_gsd_count(std::size_t ne, std::size_t nso) {
    auto alpha = [](std::size_t p) { return p % 2 == 0 ? 1 : 0; };
    std::size_t count = 0;
    for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t a = ne; a < nso; ++a)
            count += alpha(i) == alpha(a);
    for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t j = i + 1; j < ne; ++j)
            for (std::size_t a = ne; a < nso; ++a)
                for (std::size_t b = a + 1; b < nso; ++b)
                    count += alpha(i) + alpha(j) == alpha(a) + alpha(b);
    return count;
}

} // namespace

TEST_CASE("parameter counts reproduce the reference values") {
    CHECK(AnsatzSpec::hea(5, 10).param_count() == 55);
    CHECK(AnsatzSpec::gsd(6, 10).param_count() == 54);
    CHECK(AnsatzSpec::gsd(6, 12).param_count() == 117);
    CHECK(brute_force_gsd_count(6, 10) == 54);
    CHECK(brute_force_gsd_count(6, 12) == 117);
    for (std::size_t ne : {2, 4}) {
        for (std::size_t nso : {6, 8}) {
            CHECK(AnsatzSpec::gsd(ne, nso).param_count() == brute_force_gsd_count(ne, nso));
        }
    }
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::size_t L = 0; L <= 4; ++L) {
            CHECK(AnsatzSpec::hea(n, L).param_count() == (L + 1) * n);
        }
    }
}

TEST_CASE("excitation lists are ordered and spin preserving") {
    const auto ex = enumerate_excitations(4, 8);
    for (std::size_t i = 1; i < ex.singles.size(); ++i) {
        const auto &p = ex.singles[i - 1], &q = ex.singles[i];
        CHECK((p.occ < q.occ || (p.occ == q.occ && p.virt < q.virt)));
    }
    for (const auto &s : ex.singles) {
        CHECK(s.occ % 2 == s.virt % 2);
        CHECK(s.occ < 4);
        CHECK(s.virt >= 4);
    }
    for (const auto &d : ex.doubles) {
        CHECK(d.occ1 < d.occ2);
        CHECK(d.virt1 < d.virt2);
        CHECK((d.occ1 % 2) + (d.occ2 % 2) == (d.virt1 % 2) + (d.virt2 % 2));
    }
}

TEST_CASE("zero parameters prepare the reference state") {
    const auto gsd = AnsatzSpec::gsd(4, 8);
    CHECK(gsd.reference_bits() == "11110000");
    const std::vector<double> zeros(gsd.param_count(), 0.0);
    CHECK(prepare_state(gsd, zeros) == prepare_basis(8, "11110000"));

    const auto hea = AnsatzSpec::hea(3, 2);
    const std::vector<double> z3(hea.param_count(), 0.0);
    CHECK(prepare_state(hea, z3) == StateVector(3));
}

TEST_CASE("GSD circuits stay in the fixed-particle-number sector") {
    const auto spec = AnsatzSpec::gsd(2, 6);
    std::vector<double> theta(spec.param_count());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] = 0.3 + 0.17 * static_cast<double>(i);
    }
    const auto s = prepare_state(spec, theta);
    double inside = 0.0;
    for (std::size_t b = 0; b < s.dim(); ++b) {
        if (std::popcount(b) == 2) {
            inside += std::norm(s.amps()[b]);
        }
    }
    CHECK(std::abs(inside - 1.0) < 1e-12);
    CHECK(std::abs(s.norm_squared() - 1.0) < 1e-12);
}

TEST_CASE("HEA layout: rotation layers interleaved with CNOT chains") {
    const auto spec = AnsatzSpec::hea(3, 2);
    std::vector<double> theta(spec.param_count(), 0.1);
    const auto gates = build_circuit(spec, theta);
    // 3 RY, then (2 CNOT + 3 RY) twice.
    REQUIRE(gates.size() == 13);
    CHECK(gates[3].kind == GateKind::CNOT);
    CHECK(gates[4].kind == GateKind::CNOT);
    CHECK(gates[5].kind == GateKind::RY);
    for (const auto kind : spec.param_kinds()) {
        CHECK(kind == ParamKind::PauliRotation);
    }
    for (const auto kind : AnsatzSpec::gsd(2, 4).param_kinds()) {
        CHECK(kind == ParamKind::Givens);
    }
}

TEST_CASE("energy counts one evaluation and rejects wrong parameter lengths") {
    const auto spec = AnsatzSpec::hea(2, 1);
    const auto h = tfim(2, 1.0, 0.5);
    EvalCounter c;
    const std::vector<double> theta(spec.param_count(), 0.0);
    CHECK(energy(spec, h, theta, c) == Catch::Approx(-1.0));
    CHECK(c.value() == 1);
    const std::vector<double> wrong(3, 0.0);
    CHECK_THROWS_AS(energy(spec, h, wrong, c), std::invalid_argument);
    CHECK_THROWS_AS(AnsatzSpec::hea(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(AnsatzSpec::gsd(7, 6), std::invalid_argument);
}
