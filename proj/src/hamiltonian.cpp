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
#include "flowvqe/hamiltonian.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace flowvqe {

namespace {

std::string format_label(double J, double g) {
    std::ostringstream os;
    os.precision(12);
    os << "J=" << J << ",g=" << g;
    return os.str();
}

} // namespace

PauliMask pauli_mask(std::string_view pauli, double coeff) {
    const std::size_t n = pauli.size();
    if (n == 0 || n > 64) {
        throw std::invalid_argument("pauli string length must be in [1, 64]");
    }
    PauliMask m;
    m.coeff = coeff;
    for (std::size_t q = 0; q < n; ++q) {
        const std::uint64_t bit = std::uint64_t{1} << (n - 1 - q);
        switch (pauli[q]) {
        case 'I':
            break;
        case 'X':
            m.x_mask |= bit;
            break;
        case 'Y':
            m.x_mask |= bit;
            m.z_mask |= bit;
            ++m.y_count;
            break;
        case 'Z':
            m.z_mask |= bit;
            break;
        default:
            throw std::invalid_argument("illegal Pauli character '" + std::string(1, pauli[q]) +
                                        "' in \"" + std::string(pauli) + "\"");
        }
    }
    return m;
}

Hamiltonian::Hamiltonian(std::size_t n_qubits, std::vector<PauliTerm> terms, std::string family_id,
                         std::string instance_label, ReferenceEnergies ref)
    : n_qubits_(n_qubits), terms_(std::move(terms)), family_id_(std::move(family_id)),
      instance_label_(std::move(instance_label)), ref_(ref) {
    if (n_qubits_ == 0) {
        throw std::invalid_argument("n_qubits must be positive");
    }
    if (n_qubits_ > kMaxQubits) {
        throw std::invalid_argument("n_qubits " + std::to_string(n_qubits_) +
                                    " exceeds the dense cap of " + std::to_string(kMaxQubits));
    }
    if (terms_.empty()) {
        throw std::invalid_argument("empty term list");
    }
    std::unordered_set<std::string> seen;
    masks_.reserve(terms_.size());
    for (const auto &t : terms_) {
        if (t.pauli.size() != n_qubits_) {
            throw std::invalid_argument("pauli string \"" + t.pauli + "\" has length " +
                                        std::to_string(t.pauli.size()) + ", expected " +
                                        std::to_string(n_qubits_));
        }
        if (!std::isfinite(t.coeff)) {
            throw std::invalid_argument("non-finite coefficient for \"" + t.pauli + "\"");
        }
        if (!seen.insert(t.pauli).second) {
            throw std::invalid_argument("duplicate pauli string \"" + t.pauli + "\"");
        }
        masks_.push_back(pauli_mask(t.pauli, t.coeff));
    }
}

std::optional<double> Hamiltonian::coefficient(std::string_view pauli) const {
    for (const auto &t : terms_) {
        if (t.pauli == pauli) {
            return t.coeff;
        }
    }
    return std::nullopt;
}

Hamiltonian Hamiltonian::shifted(double c) const {
    const std::string identity(n_qubits_, 'I');
    auto terms = terms_;
    bool merged = false;
    for (auto &t : terms) {
        if (t.pauli == identity) {
            t.coeff += c;
            merged = true;
        }
    }
    if (!merged) {
        terms.push_back({identity, c});
    }
    ReferenceEnergies ref = ref_;
    if (ref.hf) {
        *ref.hf += c;
    }
    if (ref.exact) {
        *ref.exact += c;
    }
    return {n_qubits_, std::move(terms), family_id_, instance_label_, ref};
}

std::vector<std::string> Hamiltonian::term_order() const {
    std::vector<std::string> out;
    out.reserve(terms_.size());
    for (const auto &t : terms_) {
        out.push_back(t.pauli);
    }
    return out;
}

Hamiltonian parse_hamiltonian(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error &e) {
        throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
    }
    try {
        if (!doc.is_object()) {
            throw std::invalid_argument("malformed JSON: top level must be an object");
        }
        if (doc.contains("format_version") && doc.at("format_version").get<int>() != 1) {
            throw std::invalid_argument("unsupported format_version");
        }
        const auto n = doc.at("n_qubits").get<long long>();
        if (n <= 0) {
            throw std::invalid_argument("n_qubits must be positive");
        }
        std::vector<PauliTerm> terms;
        for (const auto &t : doc.at("terms")) {
            terms.push_back({t.at("pauli").get<std::string>(), t.at("coeff").get<double>()});
        }
        ReferenceEnergies ref;
        if (doc.contains("ref_energies") && !doc.at("ref_energies").is_null()) {
            const auto &r = doc.at("ref_energies");
            if (r.contains("hf") && !r.at("hf").is_null()) {
                ref.hf = r.at("hf").get<double>();
            }
            if (r.contains("exact") && !r.at("exact").is_null()) {
                ref.exact = r.at("exact").get<double>();
            }
        }
        return {static_cast<std::size_t>(n), std::move(terms),
                doc.value("family_id", std::string{}), doc.value("instance_label", std::string{}),
                ref};
    } catch (const nlohmann::json::exception &e) {
        throw std::invalid_argument(std::string("malformed Hamiltonian document: ") + e.what());
    }
}

Hamiltonian load_hamiltonian(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open Hamiltonian file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_hamiltonian(buf.str());
}

std::string hamiltonian_to_json(const Hamiltonian &h) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["n_qubits"] = h.n_qubits();
    doc["family_id"] = h.family_id();
    doc["instance_label"] = h.instance_label();
    auto terms = nlohmann::ordered_json::array();
    for (const auto &t : h.terms()) {
        terms.push_back({{"pauli", t.pauli}, {"coeff", t.coeff}});
    }
    doc["terms"] = std::move(terms);
    const auto &ref = h.ref_energies();
    if (ref.hf || ref.exact) {
        nlohmann::ordered_json r = nlohmann::ordered_json::object();
        if (ref.hf) {
            r["hf"] = *ref.hf;
        }
        if (ref.exact) {
            r["exact"] = *ref.exact;
        }
        doc["ref_energies"] = std::move(r);
    }
    return doc.dump(2);
}

void save_hamiltonian(const Hamiltonian &h, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << hamiltonian_to_json(h) << '\n';
}

Hamiltonian tfim(std::size_t n, double J, double g) {
    if (n < 2) {
        throw std::invalid_argument("tfim requires n >= 2");
    }
    std::vector<PauliTerm> terms;
    terms.reserve(2 * n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::string p(n, 'I');
        p[i] = 'Z';
        p[i + 1] = 'Z';
        terms.push_back({std::move(p), -J});
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::string p(n, 'I');
        p[i] = 'X';
        terms.push_back({std::move(p), -g});
    }
    return {n, std::move(terms), "tfim-n" + std::to_string(n), format_label(J, g)};
}

namespace {

std::complex<double> phase_of(const PauliMask &m, std::uint64_t b) {
    // i^y_count * (-1)^popcount(b & z)
    static constexpr std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const double sign = (std::popcount(b & m.z_mask) & 1) != 0 ? -1.0 : 1.0;
    return sign * ipow[m.y_count & 3U];
}

void check_cap(const Hamiltonian &h, std::size_t max_qubits) {
    if (h.n_qubits() > max_qubits) {
        throw std::invalid_argument("n_qubits " + std::to_string(h.n_qubits()) +
                                    " exceeds dense cap " + std::to_string(max_qubits));
    }
}

} // namespace

Eigen::MatrixXcd dense_matrix(const Hamiltonian &h, std::size_t max_qubits) {
    check_cap(h, max_qubits);
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << h.n_qubits());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto &pm : h.masks()) {
        for (Eigen::Index col = 0; col < dim; ++col) {
            const auto b = static_cast<std::uint64_t>(col);
            m(static_cast<Eigen::Index>(b ^ pm.x_mask), col) += pm.coeff * phase_of(pm, b);
        }
    }
    return m;
}

double exact_ground_energy(const Hamiltonian &h, std::size_t max_qubits) {
    check_cap(h, max_qubits);
    bool real = true;
    for (const auto &pm : h.masks()) {
        real = real && (pm.y_count % 2 == 0);
    }
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << h.n_qubits());
    if (real) {
        // Even Y count: the matrix is real symmetric.
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto &pm : h.masks()) {
            for (Eigen::Index col = 0; col < dim; ++col) {
                const auto b = static_cast<std::uint64_t>(col);
                m(static_cast<Eigen::Index>(b ^ pm.x_mask), col) += pm.coeff * phase_of(pm, b).real();
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_matrix(h, max_qubits),
                                                       Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

ContextVector context_of(const Hamiltonian &h, std::span<const std::string> family_order) {
    std::unordered_set<std::string_view> seen;
    for (const auto &s : family_order) {
        if (!seen.insert(s).second) {
            throw std::invalid_argument("family order contains duplicate pauli string \"" + s +
                                        "\"");
        }
    }
    ContextVector ctx;
    ctx.term_order.assign(family_order.begin(), family_order.end());
    ctx.values.reserve(family_order.size());
    for (const auto &s : family_order) {
        ctx.values.push_back(h.coefficient(s).value_or(0.0));
    }
    return ctx;
}

std::vector<std::string> family_term_order(std::span<const Hamiltonian> instances) {
    std::vector<std::string> order;
    std::unordered_set<std::string> seen;
    for (const auto &h : instances) {
        for (const auto &t : h.terms()) {
            // The identity only offsets the energy and is left out of contexts.
            if (t.pauli.find_first_not_of('I') == std::string::npos) {
                continue;
            }
            if (seen.insert(t.pauli).second) {
                order.push_back(t.pauli);
            }
        }
    }
    return order;
}

} // namespace flowvqe
