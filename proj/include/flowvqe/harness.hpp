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
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowvqe/ansatz.hpp"
#include "flowvqe/baselines.hpp"
#include "flowvqe/flow.hpp"
#include "flowvqe/hamiltonian.hpp"
#include "flowvqe/training.hpp"

namespace flowvqe {

/// Default computational-accuracy threshold.
inline constexpr double kDefaultAccuracy = 1.6e-3;

// Geometry -----------------------------------------------------------------

struct Atom {
    std::string element;
    double x = 0.0, y = 0.0, z = 0.0;
};

/// Cartesian coordinates (Angstrom) of H2O, H4, NH3 or C6H6 as a function
/// of the distortion parameter d.
std::vector<Atom> geometry(std::string_view molecule, double d);

/// Standard XYZ block: atom count, comment line, one atom per line.
std::string to_xyz(std::span<const Atom> atoms, std::string_view comment);

// Cost model ---------------------------------------------------------------

struct CostReport {
    double c_pre = 0.0;
    double c_post_bar = 0.0;
    double c_vqe_bar = 0.0;
    std::size_t n_test = 0;
    double total_warm = 0.0; ///< c_pre + c_post_bar * n_test
    double total_vqe = 0.0;  ///< c_vqe_bar * n_test
    /// Smallest n with c_pre + c_post_bar * n < c_vqe_bar * n.
    std::optional<std::size_t> break_even;
};

/// `n_test` defaults to the number of post-training costs.
CostReport cost_report(double c_pre, std::span<const double> post_costs,
                       std::span<const double> vqe_costs,
                       std::optional<std::size_t> n_test = std::nullopt);

// Generation and warm starts ----------------------------------------------

struct PesPoint {
    std::string label;
    double e_min = 0.0;
    double e_mean = 0.0;
    std::optional<double> exact;
    std::optional<double> error_min;
    std::optional<double> error_mean;
    ParameterVector best_theta;
    std::vector<double> energies;
};

/// Draws `samples_per_point` parameter vectors per instance and evaluates
/// them; the counter grows by samples_per_point per instance.
std::vector<PesPoint> generate_pes(const FlowModel &model, std::span<const Hamiltonian> instances,
                                   const AnsatzSpec &spec, std::size_t samples_per_point,
                                   std::uint64_t seed, EvalCounter &counter);

/// Context of `h` in the model's family order. Throws when `h` carries a
/// non-identity term the family order does not know.
ContextVector family_context(const FlowModel &model, const Hamiltonian &h);

enum class WarmStartInit { Flow, Zero, Transfer };

WarmStartInit warm_start_init_from_string(const std::string &name);
std::string to_string(WarmStartInit init);

struct WarmStartResult {
    VqeResult run;
    /// Evaluations spent producing theta0 (flow sampling), added to N_ca.
    std::uint64_t init_cost = 0;
    std::optional<std::uint64_t> n_ca;
    std::optional<double> min_error;
};

WarmStartResult warm_start_post_train(std::span<const double> theta0, std::uint64_t init_cost,
                                      const AnsatzSpec &spec, const Hamiltonian &h,
                                      const VqeOptions &options);

// Run configuration --------------------------------------------------------

struct TfimFamily {
    std::size_t n = 0;
    double J = 1.0;
    std::vector<double> g;
};

struct InstanceSource {
    std::vector<std::filesystem::path> files;
    std::optional<TfimFamily> tfim;

    [[nodiscard]] bool empty() const { return files.empty() && !tfim; }
};

struct AnsatzConfig {
    AnsatzKind kind = AnsatzKind::HEA;
    std::size_t layers = 1;
    std::size_t electrons = 0;
    std::size_t spin_orbitals = 0;
};

struct RunConfig {
    std::string mode;
    std::string run_id = "run";
    InstanceSource instances;
    InstanceSource test_instances;
    std::optional<AnsatzConfig> ansatz;
    FlowConfig flow;
    bool flow_layers_set = false;
    TrainConfig train;
    VqeOptions vqe;
    std::vector<WarmStartInit> inits{WarmStartInit::Zero};
    std::optional<std::filesystem::path> transfer_params;
    std::optional<std::filesystem::path> checkpoint;
    double accuracy = kDefaultAccuracy;
    std::size_t samples_per_point = 16;
    /// Fill missing exact references by dense diagonalization up to this size.
    std::size_t compute_exact_max_qubits = 12;
    std::string molecule;
    std::vector<double> distances;
    double cost_pre = 0.0;
    std::vector<double> cost_post;
    std::vector<double> cost_vqe;
    std::optional<std::size_t> cost_n_test;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    bool csv = false;
};

inline constexpr std::string_view kModes[] = {"vqe",      "flow-s",      "flow-m",
                                              "generate", "warm-start",  "cost-report",
                                              "geometry", "gen-tfim",    "exact"};

/// Parses a run-config JSON document; relative paths resolve against
/// `base_dir`. Errors name the offending field. A non-empty `mode` supplies
/// the mode when the document has none and must agree with it otherwise.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path &base_dir,
                           std::string_view mode = {});
RunConfig load_run_config(const std::filesystem::path &path, std::string_view mode = {});

/// Loads or builds the instances of a source; exact references are filled
/// in when missing and the register is small enough.
std::vector<Hamiltonian> load_instances(const InstanceSource &src, std::size_t compute_exact_max);

/// HEA registers take `n_qubits`; GSD registers follow from the spin orbitals.
AnsatzSpec make_ansatz(const AnsatzConfig &cfg, std::size_t n_qubits);

// Metrics ------------------------------------------------------------------

struct MetricsRecord {
    std::string run_id;
    std::string mode;
    std::string instance_label;
    std::size_t step = 0; ///< epoch or iteration
    double energy = 0.0;
    double best_energy = 0.0;
    std::optional<double> error_vs_exact;
    std::uint64_t cumulative_evaluations = 0;
    std::optional<double> loss;
    double wall_ms = 0.0;
};

std::string to_jsonl(const MetricsRecord &r);
std::string csv_header();
std::string to_csv(const MetricsRecord &r);

/// Executes the configured mode, writing metrics.jsonl, summary.json, and
/// for flow modes checkpoint.bin into cfg.out_dir. Returns the exit status.
int run(const RunConfig &cfg, std::ostream &log);

} // namespace flowvqe
