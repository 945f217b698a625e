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
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowvqe/ansatz.hpp"
#include "flowvqe/hamiltonian.hpp"
#include "flowvqe/random.hpp"
#include "flowvqe/simulator.hpp"
#include "flowvqe/training.hpp"

namespace flowvqe {

/// Central-difference step for Givens parameters.
inline constexpr double kGivensFdStep = 1e-4;

enum class OptimizerKind { GD, Adam, QNSPSA };

OptimizerKind optimizer_from_string(const std::string &name);
std::string to_string(OptimizerKind kind);

struct QnspsaConfig {
    double epsilon = 0.01;        ///< perturbation size for both directions
    double regularization = 1e-3; ///< lambda added to |metric|
    double smoothing = 0.99;      ///< weight of the previous metric estimate
};

struct VqeRunState {
    ParameterVector theta;
    std::size_t iteration = 0;
    EvalCounter counter;
    AdamState adam;
    /// Smoothed metric; starts at the identity.
    Eigen::MatrixXd metric;

    explicit VqeRunState(ParameterVector theta0);
};

/// Two evaluations per parameter: exact shift rule for RY parameters,
/// central differences for Givens parameters. Adds 2d to `counter`.
std::vector<double> energy_gradient(const AnsatzSpec &spec, const Hamiltonian &h,
                                    std::span<const double> theta, EvalCounter &counter);

void gd_step(VqeRunState &state, std::span<const double> grad, double eta);
void adam_vqe_step(VqeRunState &state, std::span<const double> grad, double eta);

/// Simultaneous-perturbation gradient estimate
/// (f(theta + eps d) - f(theta - eps d)) / (2 eps) * d for a +-1 direction d.
Eigen::VectorXd spsa_gradient(const std::function<double(const ParameterVector &)> &f,
                              std::span<const double> theta, double eps,
                              const Eigen::VectorXd &direction);

/// Quantum-natural SPSA step: 2 energies + 4 overlaps, counter += 6.
void qnspsa_step(VqeRunState &state, const AnsatzSpec &spec, const Hamiltonian &h, double eta,
                 const QnspsaConfig &cfg, Rng &rng);

/// Warm start from a converged vector of a structurally identical instance.
ParameterVector parameter_transfer(std::span<const double> source, const AnsatzSpec &target);

struct VqePoint {
    std::size_t iteration = 0;
    double energy = 0.0;
    double best_energy = 0.0;
    std::uint64_t evaluations = 0; ///< cumulative charged evaluations
    double wall_ms = 0.0;
};

struct VqeOptions {
    OptimizerKind method = OptimizerKind::Adam;
    double eta = 0.02;
    std::size_t max_iters = 1000;
    /// Stop once |E - exact| <= threshold; needs an exact reference.
    std::optional<double> threshold = 1.6e-3;
    std::uint64_t seed = 0;
    QnspsaConfig qnspsa;
};

struct VqeResult {
    std::vector<VqePoint> trajectory; ///< iteration 0 is the initial point
    VqeRunState final_state;
    /// Cumulative evaluations at the first point within threshold.
    std::optional<std::uint64_t> n_ca;
    /// Minimum |E - exact| over the trajectory, when exact is known.
    std::optional<double> min_error;
    bool converged = false;
    /// Evaluations spent on the initial energy (included in all counts).
    static constexpr std::uint64_t kInitialEvaluations = 1;
};

/// Runs the chosen optimizer from theta0. The initial energy is charged one
/// evaluation; per-iteration monitoring energies are not charged.
VqeResult run_optimizer(const AnsatzSpec &spec, const Hamiltonian &h,
                        std::span<const double> theta0, const VqeOptions &options,
                        const std::function<void(const VqePoint &)> &on_point = {});

} // namespace flowvqe
