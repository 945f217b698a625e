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
#include <vector>

#include "flowvqe/ansatz.hpp"
#include "flowvqe/flow.hpp"
#include "flowvqe/hamiltonian.hpp"
#include "flowvqe/random.hpp"

namespace flowvqe {

struct TrainConfig {
    std::size_t epochs = 1000;      ///< T
    std::size_t batch = 2;          ///< B, samples per context per epoch
    std::size_t buffer = 2;         ///< M, elite entries kept per context
    double learning_rate = 1e-4;    ///< eta
    double weight_decay = 1e-4;     ///< coupled L2
    double winner_noise_var = 1e-3; ///< variance of noise on pooled winners
    std::uint64_t seed = 0;
    /// Stop once every context with an exact reference has a buffered energy
    /// within this distance of it. Disabled when unset.
    std::optional<double> stop_accuracy;

    void validate() const;
};

struct EliteEntry {
    ParameterVector theta;
    double energy = 0.0;
};

/// Per-context archive of the M lowest energies seen, ascending; ties keep
/// the earlier entry first.
class EliteBuffer {
  public:
    EliteBuffer(std::size_t contexts, std::size_t capacity);

    void insert(std::size_t context, ParameterVector theta, double energy);

    [[nodiscard]] std::size_t contexts() const noexcept { return entries_.size(); }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] const std::vector<EliteEntry> &entries(std::size_t context) const;
    /// Lowest buffered energy; +inf when the context is still empty.
    [[nodiscard]] double best_energy(std::size_t context) const;

  private:
    std::size_t capacity_;
    std::vector<std::vector<EliteEntry>> entries_;
};

/// Copies of `winners` with i.i.d. N(0, var) noise added element-wise.
std::vector<ParameterVector> perturb_winners(std::span<const ParameterVector> winners, double var,
                                             Rng &rng);

struct AdamState {
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam step on `tau` in place; grad <- grad + wd * tau.
void adam_update(std::span<double> tau, std::span<const double> grad, AdamState &state, double lr,
                 double weight_decay);

/// One training instance: the Hamiltonian and the context derived from it.
struct TrainingContext {
    const Hamiltonian *hamiltonian = nullptr;
    ContextVector context;
};

struct EpochRecord {
    std::size_t epoch = 0;                ///< 1-based
    std::vector<double> batch_best;       ///< lowest energy sampled this epoch, per context
    std::vector<double> best_energy;      ///< best buffered energy, per context
    double loss = 0.0;                    ///< pooled negative log-likelihood before the step
    std::uint64_t evaluations = 0;        ///< cumulative circuit evaluations
    double wall_ms = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> trajectory;
    EliteBuffer buffer;
    std::uint64_t evaluations = 0;
    bool stopped_early = false;
    /// Winner sets fed to the likelihood step, per epoch; filled when
    /// record_winners is set.
    std::vector<std::vector<ParameterVector>> winners;
};

struct TrainOptions {
    bool record_winners = false;
    /// Called after every epoch; returning false stops training.
    std::function<bool(const EpochRecord &)> on_epoch;
};

/// Preference-based training loop: per epoch, per context, sample B
/// parameter vectors, evaluate their energies and keep the M best; then pool
/// the buffered winners of all contexts, perturb copies, and take one Adam
/// step on their negative log-likelihood.
TrainResult train_flow_vqe(FlowModel &model, std::span<const TrainingContext> contexts,
                           const AnsatzSpec &spec, const TrainConfig &cfg,
                           const TrainOptions &options = {});

/// Score-function gradient (1/N) sum_i E_i grad log p(theta_i | ctx).
std::vector<double> reinforce_grad(const FlowModel &model, const ContextVector &ctx,
                                   std::span<const FlowSample> samples,
                                   std::span<const double> energies);

} // namespace flowvqe
