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
#include "flowvqe/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace flowvqe {

namespace {

/// Stream tag for winner noise, distinct from any context index.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

} // namespace

void TrainConfig::validate() const {
    if (epochs == 0) {
        throw std::invalid_argument("train.epochs must be at least 1");
    }
    if (batch == 0) {
        throw std::invalid_argument("train.batch must be at least 1");
    }
    if (buffer == 0) {
        throw std::invalid_argument("train.buffer must be at least 1");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("train.learning_rate must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw std::invalid_argument("train.weight_decay must be non-negative");
    }
    if (!(winner_noise_var >= 0.0)) {
        throw std::invalid_argument("train.winner_noise_var must be non-negative");
    }
}

EliteBuffer::EliteBuffer(std::size_t contexts, std::size_t capacity)
    : capacity_(capacity), entries_(contexts) {
    if (capacity == 0) {
        throw std::invalid_argument("buffer capacity must be at least 1");
    }
}

void EliteBuffer::insert(std::size_t context, ParameterVector theta, double energy) {
    if (!std::isfinite(energy)) {
        throw std::invalid_argument("non-finite energy offered to the elite buffer");
    }
    auto &list = entries_.at(context);
    // Insert after every entry with energy <= the new one, so earlier
    // samples win ties.
    auto pos = list.begin();
    while (pos != list.end() && pos->energy <= energy) {
        ++pos;
    }
    if (static_cast<std::size_t>(pos - list.begin()) >= capacity_) {
        return;
    }
    list.insert(pos, EliteEntry{std::move(theta), energy});
    if (list.size() > capacity_) {
        list.pop_back();
    }
}

const std::vector<EliteEntry> &EliteBuffer::entries(std::size_t context) const {
    return entries_.at(context);
}

double EliteBuffer::best_energy(std::size_t context) const {
    const auto &list = entries_.at(context);
    return list.empty() ? std::numeric_limits<double>::infinity() : list.front().energy;
}

std::vector<ParameterVector> perturb_winners(std::span<const ParameterVector> winners, double var,
                                             Rng &rng) {
    if (!(var >= 0.0)) {
        throw std::invalid_argument("noise variance must be non-negative");
    }
    std::vector<ParameterVector> out(winners.begin(), winners.end());
    if (var == 0.0) {
        return out;
    }
    const double sd = std::sqrt(var);
    for (auto &theta : out) {
        for (auto &x : theta) {
            x += sd * standard_normal(rng);
        }
    }
    return out;
}

void adam_update(std::span<double> tau, std::span<const double> grad, AdamState &state, double lr,
                 double weight_decay) {
    if (grad.size() != tau.size() || state.m.size() != tau.size() ||
        state.v.size() != tau.size()) {
        throw std::invalid_argument("Adam: parameter, gradient and moment lengths differ");
    }
    ++state.step;
    const double b1 = AdamState::kBeta1;
    const double b2 = AdamState::kBeta2;
    const auto t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double g = grad[i] + weight_decay * tau[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        tau[i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
}

TrainResult train_flow_vqe(FlowModel &model, std::span<const TrainingContext> contexts,
                           const AnsatzSpec &spec, const TrainConfig &cfg,
                           const TrainOptions &options) {
    cfg.validate();
    if (contexts.empty()) {
        throw std::invalid_argument("training needs at least one context");
    }
    if (model.dim() != spec.param_count()) {
        throw std::invalid_argument("flow dimension " + std::to_string(model.dim()) +
                                    " does not match ansatz parameter count " +
                                    std::to_string(spec.param_count()));
    }
    for (const auto &c : contexts) {
        if (c.hamiltonian == nullptr) {
            throw std::invalid_argument("training context without a Hamiltonian");
        }
        if (c.hamiltonian->n_qubits() != spec.n_qubits()) {
            throw std::invalid_argument("Hamiltonian \"" + c.hamiltonian->instance_label() +
                                        "\" has " + std::to_string(c.hamiltonian->n_qubits()) +
                                        " qubits, ansatz has " + std::to_string(spec.n_qubits()));
        }
    }

    const std::size_t K = contexts.size();
    const std::size_t B = cfg.batch;
    TrainResult result{{}, EliteBuffer(K, cfg.buffer), 0, false, {}};
    AdamState adam(model.parameter_count());
    const auto start = std::chrono::steady_clock::now();

    std::vector<ParameterVector> thetas(K * B);
    std::vector<double> energies(K * B);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<Conditioning> conds;
        conds.reserve(K);
        for (const auto &c : contexts) {
            conds.push_back(model.condition(c.context));
        }
        std::vector<std::string> errors(K * B);
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t job = 0; job < static_cast<std::int64_t>(K * B); ++job) {
            const auto j = static_cast<std::size_t>(job);
            const std::size_t k = j / B;
            const std::size_t b = j % B;
            try {
                Rng rng = substream(cfg.seed, {epoch, k, b});
                thetas[j] = model.sample_one(conds[k], rng).theta;
                EvalCounter local;
                energies[j] = energy(spec, *contexts[k].hamiltonian, thetas[j], local);
            } catch (const std::exception &e) {
                errors[j] = e.what();
            }
        }
        for (const auto &e : errors) {
            if (!e.empty()) {
                throw std::runtime_error("epoch " + std::to_string(epoch) + ": " + e);
            }
        }
        result.evaluations += K * B;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.batch_best.assign(K, std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t b = 0; b < B; ++b) {
                const double e = energies[k * B + b];
                if (!std::isfinite(e)) {
                    throw std::runtime_error("non-finite energy at epoch " + std::to_string(epoch) +
                                             ", context " + std::to_string(k));
                }
                rec.batch_best[k] = std::min(rec.batch_best[k], e);
                result.buffer.insert(k, thetas[k * B + b], e);
            }
        }

        std::vector<ParameterVector> pooled;
        std::vector<const ContextVector *> owners;
        for (std::size_t k = 0; k < K; ++k) {
            for (const auto &entry : result.buffer.entries(k)) {
                pooled.push_back(entry.theta);
                owners.push_back(&contexts[k].context);
            }
        }
        Rng noise_rng = substream(cfg.seed, {epoch, kNoiseStream});
        auto noisy = perturb_winners(pooled, cfg.winner_noise_var, noise_rng);
        std::vector<ConditionedSample> batch;
        batch.reserve(noisy.size());
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            batch.push_back({std::move(noisy[i]), owners[i]});
        }
        const auto nll = model.nll_and_grad(batch);
        adam_update(model.parameters(), nll.grad, adam, cfg.learning_rate, cfg.weight_decay);
        if (options.record_winners) {
            result.winners.push_back(std::move(pooled));
        }

        rec.loss = nll.loss;
        rec.evaluations = result.evaluations;
        rec.best_energy.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            rec.best_energy[k] = result.buffer.best_energy(k);
        }
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        result.trajectory.push_back(rec);

        bool keep_going = !options.on_epoch || options.on_epoch(rec);
        if (cfg.stop_accuracy) {
            bool all_within = true;
            bool any_ref = false;
            for (std::size_t k = 0; k < K; ++k) {
                const auto exact = contexts[k].hamiltonian->ref_energies().exact;
                if (exact) {
                    any_ref = true;
                    all_within = all_within && rec.best_energy[k] - *exact <= *cfg.stop_accuracy;
                }
            }
            if (any_ref && all_within) {
                result.stopped_early = true;
                keep_going = false;
            }
        }
        if (!keep_going) {
            break;
        }
    }
    return result;
}

std::vector<double> reinforce_grad(const FlowModel &model, const ContextVector &ctx,
                                   std::span<const FlowSample> samples,
                                   std::span<const double> energies) {
    if (samples.empty()) {
        throw std::invalid_argument("REINFORCE needs at least one sample");
    }
    if (samples.size() != energies.size()) {
        throw std::invalid_argument("REINFORCE: samples and energies differ in length");
    }
    std::vector<ConditionedSample> batch;
    std::vector<double> weights;
    batch.reserve(samples.size());
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        batch.push_back({samples[i].theta, &ctx});
        weights.push_back(energies[i] * inv_n);
    }
    return model.weighted_log_prob_grad(batch, weights).grad;
}

} // namespace flowvqe
