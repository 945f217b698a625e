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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowvqe/ansatz.hpp"
#include "flowvqe/hamiltonian.hpp"
#include "flowvqe/random.hpp"

namespace flowvqe {

struct FlowConfig {
    std::size_t dim = 1;         ///< circuit parameter count d
    std::size_t context_dim = 1; ///< raw context length (family term count)
    std::size_t layers = 7;      ///< K rotation + marginal pairs
    std::size_t mixture = 32;    ///< P logistic components per dimension
    std::size_t embed_dim = 16;
    std::size_t hidden_width = 256;
    std::size_t hidden_layers = 3;
    std::size_t reflections = 0; ///< Householder vectors per rotation; 0 means d
    double base_variance = 0.01;
    bool share_conditioner = false; ///< one conditioner for all layers
    std::uint64_t seed = 0;
};

/// Trainable parameter groups, used for gradient checks and checkpoints.
enum class ParamClass {
    EmbeddingWeight,
    EmbeddingBias,
    Householder,
    ConditionerWeight,
    ConditionerBias,
    Anchor,       ///< conditioner output bias feeding a mixture anchor
    LogBandwidth, ///< conditioner output bias feeding a log-bandwidth
};

struct ParamBlock {
    ParamClass cls;
    std::size_t offset;
    std::size_t size;
};

/// Mixture anchors and log-bandwidths for every layer under one context,
/// plus the activations needed to back-propagate into the conditioner.
struct Conditioning {
    /// [layer][dim][component], flattened; size K * d * P each.
    std::vector<double> anchors;
    std::vector<double> log_bw;
    std::vector<double> inv_bw;
    // Backprop cache.
    std::vector<double> context;
    std::vector<double> embedding;
    /// Per conditioner, per dense layer: pre-activation and activation.
    std::vector<std::vector<std::vector<double>>> pre;
    std::vector<std::vector<std::vector<double>>> act;
};

struct FlowSample {
    ParameterVector theta;
    double logp = 0.0;
};

struct InverseResult {
    std::vector<double> z;
    double logdet = 0.0;
};

struct NllResult {
    double loss = 0.0;
    std::vector<double> grad;
};

/// One training example: parameters paired with the context they condition on.
struct ConditionedSample {
    ParameterVector theta;
    const ContextVector *context = nullptr;
};

/**
 * Conditional Gaussianization flow.
 *
 * Generation (`forward`) maps a latent z ~ N(0, base_variance I) through K
 * layers, each a Householder-product rotation followed by the element-wise
 * marginal map Phi^-1(F(x)), where F is a P-component logistic mixture CDF.
 * The mixture anchors and log-bandwidths come from a conditioning MLP fed by
 * a linear embedding of the context. `inverse` runs the layers backwards,
 * inverting each F by safeguarded Newton/bisection.
 *
 * All trainable scalars live in one flat vector (`parameters()`), so an
 * optimizer can update them in place.
 */
class FlowModel {
  public:
    explicit FlowModel(const FlowConfig &cfg, std::vector<std::string> term_order = {});

    [[nodiscard]] const FlowConfig &config() const noexcept { return cfg_; }
    [[nodiscard]] std::size_t dim() const noexcept { return cfg_.dim; }
    [[nodiscard]] std::size_t layers() const noexcept { return cfg_.layers; }
    [[nodiscard]] std::size_t reflections() const noexcept { return reflections_; }
    [[nodiscard]] const std::vector<std::string> &term_order() const noexcept {
        return term_order_;
    }

    [[nodiscard]] std::span<double> parameters() noexcept { return params_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }
    [[nodiscard]] const std::vector<ParamBlock> &blocks() const noexcept { return blocks_; }

    /// Mutable view of the i-th Householder vector of layer `layer`.
    [[nodiscard]] std::span<double> householder(std::size_t layer, std::size_t i);

    [[nodiscard]] Conditioning condition(const ContextVector &ctx) const;

    [[nodiscard]] ParameterVector forward(std::span<const double> z, const ContextVector &ctx) const;
    [[nodiscard]] ParameterVector forward(std::span<const double> z, const Conditioning &c,
                                          double *logdet_out = nullptr) const;

    [[nodiscard]] InverseResult inverse(std::span<const double> theta,
                                        const ContextVector &ctx) const;
    [[nodiscard]] InverseResult inverse(std::span<const double> theta, const Conditioning &c) const;

    [[nodiscard]] double log_prob(std::span<const double> theta, const ContextVector &ctx) const;
    [[nodiscard]] double log_prob(std::span<const double> theta, const Conditioning &c) const;

    /// `count` independent draws from one stream.
    [[nodiscard]] std::vector<FlowSample> sample(const ContextVector &ctx, std::size_t count,
                                                 Rng &rng) const;
    /// One draw from a precomputed conditioning.
    [[nodiscard]] FlowSample sample_one(const Conditioning &c, Rng &rng) const;

    /// -mean log p over the batch and its exact gradient w.r.t. parameters().
    [[nodiscard]] NllResult nll_and_grad(std::span<const ConditionedSample> batch) const;

    /// sum_i weights[i] * log p(theta_i | ctx_i) and its gradient.
    [[nodiscard]] NllResult weighted_log_prob_grad(std::span<const ConditionedSample> batch,
                                                   std::span<const double> weights) const;

    /// Binary checkpoint: magic, format version, JSON metadata (config, term
    /// order, parameter count), then the raw little-endian doubles.
    void save(const std::filesystem::path &path) const;
    [[nodiscard]] static FlowModel load(const std::filesystem::path &path);

  private:
    struct DenseLayer {
        std::size_t in, out;
        std::size_t w, b; // offsets into params_
    };
    struct Conditioner {
        std::size_t first_layer, layer_count;
        std::vector<DenseLayer> dense;
    };

    void build_layout();
    void initialize();
    std::size_t add_block(ParamClass cls, std::size_t size);

    [[nodiscard]] std::size_t hh_offset(std::size_t layer, std::size_t i) const;
    void check_context(const ContextVector &ctx) const;
    void check_dim(std::span<const double> v, const char *what) const;

    /// `grad` covers the Householder block only; `marginal_adj` receives the
    /// adjoints of every layer's anchors and log-bandwidths.
    void backprop_sample(std::span<const double> theta, const Conditioning &c, double weight,
                         std::span<double> marginal_adj, std::span<double> grad,
                         double &logp) const;
    void backprop_conditioner(const Conditioning &c, std::span<const double> marginal_adj,
                              std::span<double> grad) const;

    FlowConfig cfg_;
    std::size_t reflections_ = 0;
    std::vector<std::string> term_order_;
    std::vector<double> params_;
    std::vector<ParamBlock> blocks_;
    std::size_t embed_w_ = 0, embed_b_ = 0;
    std::size_t hh_begin_ = 0;
    std::vector<Conditioner> conditioners_;
};

} // namespace flowvqe
