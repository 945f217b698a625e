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
#include "flowvqe/baselines.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flowvqe {

OptimizerKind optimizer_from_string(const std::string &name) {
    if (name == "gd" || name == "GD") {
        return OptimizerKind::GD;
    }
    if (name == "adam" || name == "Adam" || name == "ADAM") {
        return OptimizerKind::Adam;
    }
    if (name == "qnspsa" || name == "QNSPSA") {
        return OptimizerKind::QNSPSA;
    }
    throw std::invalid_argument("unknown optimizer \"" + name + "\" (expected gd, adam, qnspsa)");
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
    case OptimizerKind::GD:
        return "gd";
    case OptimizerKind::Adam:
        return "adam";
    case OptimizerKind::QNSPSA:
        return "qnspsa";
    }
    return "?";
}

VqeRunState::VqeRunState(ParameterVector theta0)
    : theta(std::move(theta0)), adam(theta.size()),
      metric(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(theta.size()),
                                       static_cast<Eigen::Index>(theta.size()))) {}

std::vector<double> energy_gradient(const AnsatzSpec &spec, const Hamiltonian &h,
                                    std::span<const double> theta, EvalCounter &counter) {
    const std::size_t d = spec.param_count();
    if (theta.size() != d) {
        throw std::invalid_argument("gradient: parameter vector has length " +
                                    std::to_string(theta.size()) + ", ansatz expects " +
                                    std::to_string(d));
    }
    const auto kinds = spec.param_kinds();
    std::vector<double> grad(d);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(d); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const bool shift = kinds[i] == ParamKind::PauliRotation;
        const double step = shift ? std::numbers::pi / 2.0 : kGivensFdStep;
        ParameterVector plus(theta.begin(), theta.end());
        ParameterVector minus = plus;
        plus[i] += step;
        minus[i] -= step;
        EvalCounter local;
        const double ep = energy(spec, h, plus, local);
        const double em = energy(spec, h, minus, local);
        grad[i] = shift ? 0.5 * (ep - em) : (ep - em) / (2.0 * step);
    }
    counter.add(2 * d);
    return grad;
}

void gd_step(VqeRunState &state, std::span<const double> grad, double eta) {
    if (grad.size() != state.theta.size()) {
        throw std::invalid_argument("gradient length does not match parameters");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.theta[i] -= eta * grad[i];
    }
    ++state.iteration;
}

void adam_vqe_step(VqeRunState &state, std::span<const double> grad, double eta) {
    adam_update(state.theta, grad, state.adam, eta, 0.0);
    ++state.iteration;
}

Eigen::VectorXd spsa_gradient(const std::function<double(const ParameterVector &)> &f,
                              std::span<const double> theta, double eps,
                              const Eigen::VectorXd &direction) {
    if (static_cast<std::size_t>(direction.size()) != theta.size()) {
        throw std::invalid_argument("SPSA direction length does not match parameters");
    }
    ParameterVector plus(theta.begin(), theta.end());
    ParameterVector minus = plus;
    for (std::size_t i = 0; i < plus.size(); ++i) {
        plus[i] += eps * direction[static_cast<Eigen::Index>(i)];
        minus[i] -= eps * direction[static_cast<Eigen::Index>(i)];
    }
    const double e_plus = f(plus);
    const double e_minus = f(minus);
    return ((e_plus - e_minus) / (2.0 * eps)) * direction;
}

void qnspsa_step(VqeRunState &state, const AnsatzSpec &spec, const Hamiltonian &h, double eta,
                 const QnspsaConfig &cfg, Rng &rng) {
    const std::size_t d = state.theta.size();
    if (d != spec.param_count()) {
        throw std::invalid_argument("QNSPSA: parameter vector does not match the ansatz");
    }
    const double eps = cfg.epsilon;
    Eigen::VectorXd d1(static_cast<Eigen::Index>(d));
    Eigen::VectorXd d2(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        d1[static_cast<Eigen::Index>(i)] = rademacher(rng);
    }
    for (std::size_t i = 0; i < d; ++i) {
        d2[static_cast<Eigen::Index>(i)] = rademacher(rng);
    }
    auto shifted = [&](double a, double b) {
        ParameterVector t = state.theta;
        for (std::size_t i = 0; i < d; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            t[i] += eps * (a * d1[k] + b * d2[k]);
        }
        return t;
    };

    const Eigen::VectorXd grad = spsa_gradient(
        [&](const ParameterVector &t) { return energy(spec, h, t, state.counter); }, state.theta,
        eps, d1);

    const StateVector base = prepare_state(spec, state.theta);
    auto fidelity = [&](double a, double b) {
        return overlap(base, prepare_state(spec, shifted(a, b)), state.counter);
    };
    const double diff =
        fidelity(1.0, 1.0) - fidelity(1.0, 0.0) - fidelity(-1.0, 1.0) + fidelity(-1.0, 0.0);
    const Eigen::MatrixXd outer = 0.5 * (d1 * d2.transpose() + d2 * d1.transpose());
    const Eigen::MatrixXd estimate = (-0.5 * diff / (2.0 * eps * eps)) * outer;
    state.metric = cfg.smoothing * state.metric + (1.0 - cfg.smoothing) * estimate;

    // |metric| + lambda I via the symmetric eigendecomposition.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.metric);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("QNSPSA: metric eigendecomposition failed");
    }
    Eigen::VectorXd vals = eig.eigenvalues().cwiseAbs().array() + cfg.regularization;
    if (vals.minCoeff() <= 0.0) {
        throw std::runtime_error("QNSPSA: regularized metric is singular");
    }
    const Eigen::MatrixXd &V = eig.eigenvectors();
    const Eigen::VectorXd step = V * ((V.transpose() * grad).cwiseQuotient(vals));
    for (std::size_t i = 0; i < d; ++i) {
        state.theta[i] -= eta * step[static_cast<Eigen::Index>(i)];
    }
    ++state.iteration;
}

ParameterVector parameter_transfer(std::span<const double> source, const AnsatzSpec &target) {
    if (source.size() != target.param_count()) {
        throw std::invalid_argument("parameter transfer: source has " +
                                    std::to_string(source.size()) + " parameters, target ansatz " +
                                    std::to_string(target.param_count()));
    }
    return ParameterVector(source.begin(), source.end());
}

VqeResult run_optimizer(const AnsatzSpec &spec, const Hamiltonian &h,
                        std::span<const double> theta0, const VqeOptions &options,
                        const std::function<void(const VqePoint &)> &on_point) {
    if (theta0.size() != spec.param_count()) {
        throw std::invalid_argument("initial parameters have length " +
                                    std::to_string(theta0.size()) + ", ansatz expects " +
                                    std::to_string(spec.param_count()));
    }
    if (h.n_qubits() != spec.n_qubits()) {
        throw std::invalid_argument("Hamiltonian and ansatz qubit counts differ");
    }
    if (!(options.eta > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    const auto exact = h.ref_energies().exact;
    const auto start = std::chrono::steady_clock::now();
    VqeResult res{{}, VqeRunState(ParameterVector(theta0.begin(), theta0.end())), {}, {}, false};
    auto &state = res.final_state;
    Rng rng = substream(options.seed, {0x716e73ULL});
    EvalCounter monitor; // uncharged monitoring evaluations

    auto record = [&](double e) {
        VqePoint p;
        p.iteration = state.iteration;
        p.energy = e;
        p.best_energy = res.trajectory.empty() ? e : std::min(e, res.trajectory.back().best_energy);
        p.evaluations = state.counter.value();
        p.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        res.trajectory.push_back(p);
        if (on_point) {
            on_point(p);
        }
        if (exact) {
            const double err = std::abs(e - *exact);
            res.min_error = res.min_error ? std::min(*res.min_error, err) : err;
            if (options.threshold && err <= *options.threshold && !res.n_ca) {
                res.n_ca = p.evaluations;
                res.converged = true;
            }
        }
    };

    const double e0 = energy(spec, h, state.theta, state.counter);
    if (!std::isfinite(e0)) {
        throw std::runtime_error("non-finite initial energy");
    }
    record(e0);
    while (state.iteration < options.max_iters && !res.converged) {
        switch (options.method) {
        case OptimizerKind::GD:
            gd_step(state, energy_gradient(spec, h, state.theta, state.counter), options.eta);
            break;
        case OptimizerKind::Adam:
            adam_vqe_step(state, energy_gradient(spec, h, state.theta, state.counter), options.eta);
            break;
        case OptimizerKind::QNSPSA:
            qnspsa_step(state, spec, h, options.eta, options.qnspsa, rng);
            break;
        }
        const double e = energy(spec, h, state.theta, monitor);
        if (!std::isfinite(e)) {
            throw std::runtime_error("non-finite energy at iteration " +
                                     std::to_string(state.iteration));
        }
        record(e);
    }
    return res;
}

} // namespace flowvqe
