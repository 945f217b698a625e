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
#include "flowvqe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace flowvqe {

using ojson = nlohmann::ordered_json;

namespace {

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string fmt_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

/// File-name-safe rendering of an instance label.
std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '.' || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "instance" : out;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ojson opt_json(const std::optional<double> &v) { return v ? ojson(*v) : ojson(nullptr); }

ojson opt_json(const std::optional<std::uint64_t> &v) {
    return v ? ojson(*v) : ojson("not reached");
}

} // namespace

// Geometry -----------------------------------------------------------------

std::vector<Atom> geometry(std::string_view molecule, double d) {
    if (!std::isfinite(d)) {
        throw std::invalid_argument("geometry distance must be finite");
    }
    if (molecule == "H2O") {
        const double half = 0.5 * 104.5 * std::numbers::pi / 180.0;
        const double x = d * std::sin(half);
        const double z = d * std::cos(half);
        return {{"O", 0.0, 0.0, 0.0}, {"H", x, 0.0, z}, {"H", -x, 0.0, z}};
    }
    if (molecule == "H4") {
        return {{"H", 0.0, 0.0, 0.0}, {"H", d, 0.0, 0.0}, {"H", 2.0 * d, 0.0, 0.0},
                {"H", 3.0 * d, 0.0, 0.0}};
    }
    if (molecule == "NH3") {
        const double h = std::sqrt(3.0) / 2.0;
        return {{"N", 0.0, 0.0, d}, {"H", 1.0, 0.0, 0.0}, {"H", -0.5, h, 0.0}, {"H", -0.5, -h, 0.0}};
    }
    if (molecule == "C6H6") {
        return {{"C", 1.3970, 0.0, 0.0},     {"C", 0.6985, 1.2098, 0.0},
                {"C", -0.6985, 1.2098, 0.0}, {"C", -1.3970, 0.0, 0.0},
                {"C", -0.6985, -1.2098, 0.0}, {"C", 0.6985, -1.2098, 0.0},
                {"H", 2.4810 + d, 0.0, 0.0}, {"H", 1.2405, 2.1486, 0.0},
                {"H", -1.2405, 2.1486, 0.0}, {"H", -2.4810, 0.0, 0.0},
                {"H", -1.2405, -2.1486, 0.0}, {"H", 1.2405, -2.1486, 0.0}};
    }
    throw std::invalid_argument("unknown molecule \"" + std::string(molecule) +
                                "\" (expected H2O, H4, NH3, C6H6)");
}

std::string to_xyz(std::span<const Atom> atoms, std::string_view comment) {
    std::ostringstream out;
    out << atoms.size() << '\n' << comment << '\n';
    for (const auto &a : atoms) {
        out << a.element << ' ' << fmt_coord(a.x) << ' ' << fmt_coord(a.y) << ' ' << fmt_coord(a.z)
            << '\n';
    }
    return out.str();
}

// Cost model ---------------------------------------------------------------

CostReport cost_report(double c_pre, std::span<const double> post_costs,
                       std::span<const double> vqe_costs, std::optional<std::size_t> n_test) {
    if (post_costs.empty() || vqe_costs.empty()) {
        throw std::invalid_argument("cost report needs non-empty post-training and VQE cost lists");
    }
    auto valid = [](double c) { return std::isfinite(c) && c >= 0.0; };
    if (!valid(c_pre) || !std::all_of(post_costs.begin(), post_costs.end(), valid) ||
        !std::all_of(vqe_costs.begin(), vqe_costs.end(), valid)) {
        throw std::invalid_argument("costs must be finite and non-negative");
    }
    CostReport r;
    r.c_pre = c_pre;
    r.c_post_bar = std::accumulate(post_costs.begin(), post_costs.end(), 0.0) /
                   static_cast<double>(post_costs.size());
    r.c_vqe_bar = std::accumulate(vqe_costs.begin(), vqe_costs.end(), 0.0) /
                  static_cast<double>(vqe_costs.size());
    r.n_test = n_test.value_or(post_costs.size());
    const auto n = static_cast<double>(r.n_test);
    r.total_warm = r.c_pre + r.c_post_bar * n;
    r.total_vqe = r.c_vqe_bar * n;
    const double margin = r.c_vqe_bar - r.c_post_bar;
    if (margin > 0.0) {
        auto wins = [&](std::size_t k) {
            const auto kd = static_cast<double>(k);
            return r.c_pre + r.c_post_bar * kd < r.c_vqe_bar * kd;
        };
        auto k = static_cast<std::size_t>(std::floor(r.c_pre / margin));
        k = std::max<std::size_t>(k, 1);
        while (k > 1 && wins(k - 1)) {
            --k;
        }
        while (!wins(k)) {
            ++k;
        }
        r.break_even = k;
    }
    return r;
}

// Generation and warm starts ----------------------------------------------

ContextVector family_context(const FlowModel &model, const Hamiltonian &h) {
    const auto &order = model.term_order();
    if (order.empty()) {
        throw std::invalid_argument("flow model carries no family term order");
    }
    std::unordered_set<std::string> known(order.begin(), order.end());
    for (const auto &t : h.terms()) {
        if (t.pauli.find_first_not_of('I') == std::string::npos) {
            continue;
        }
        if (known.count(t.pauli) == 0) {
            throw std::invalid_argument("family term order mismatch: instance \"" +
                                        h.instance_label() + "\" has term " + t.pauli +
                                        " unknown to the model");
        }
    }
    return context_of(h, order);
}

std::vector<PesPoint> generate_pes(const FlowModel &model, std::span<const Hamiltonian> instances,
                                   const AnsatzSpec &spec, std::size_t samples_per_point,
                                   std::uint64_t seed, EvalCounter &counter) {
    if (samples_per_point == 0) {
        throw std::invalid_argument("samples_per_point must be at least 1");
    }
    if (model.dim() != spec.param_count()) {
        throw std::invalid_argument("flow dimension does not match the ansatz parameter count");
    }
    std::vector<PesPoint> out;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto &h = instances[i];
        if (h.n_qubits() != spec.n_qubits()) {
            throw std::invalid_argument("instance \"" + h.instance_label() +
                                        "\" does not match the ansatz register");
        }
        Rng rng = substream(seed, {0x706573ULL, i});
        const auto samples = model.sample(family_context(model, h), samples_per_point, rng);
        PesPoint p;
        p.label = h.instance_label();
        p.e_min = std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (const auto &s : samples) {
            const double e = energy(spec, h, s.theta, counter);
            p.energies.push_back(e);
            sum += e;
            if (e < p.e_min) {
                p.e_min = e;
                p.best_theta = s.theta;
            }
        }
        p.e_mean = sum / static_cast<double>(samples.size());
        p.exact = h.ref_energies().exact;
        if (p.exact) {
            p.error_min = p.e_min - *p.exact;
            p.error_mean = p.e_mean - *p.exact;
        }
        out.push_back(std::move(p));
    }
    return out;
}

WarmStartInit warm_start_init_from_string(const std::string &name) {
    if (name == "flow") {
        return WarmStartInit::Flow;
    }
    if (name == "zero" || name == "hf" || name == "HF-zero") {
        return WarmStartInit::Zero;
    }
    if (name == "transfer") {
        return WarmStartInit::Transfer;
    }
    throw std::invalid_argument("unknown init \"" + name + "\" (expected flow, zero, transfer)");
}

std::string to_string(WarmStartInit init) {
    switch (init) {
    case WarmStartInit::Flow:
        return "flow";
    case WarmStartInit::Zero:
        return "zero";
    case WarmStartInit::Transfer:
        return "transfer";
    }
    return "?";
}

WarmStartResult warm_start_post_train(std::span<const double> theta0, std::uint64_t init_cost,
                                      const AnsatzSpec &spec, const Hamiltonian &h,
                                      const VqeOptions &options) {
    WarmStartResult r{run_optimizer(spec, h, theta0, options), init_cost, {}, {}};
    if (r.run.n_ca) {
        r.n_ca = init_cost + *r.run.n_ca;
    }
    r.min_error = r.run.min_error;
    return r;
}

// Run configuration --------------------------------------------------------

namespace {

[[noreturn]] void config_error(const std::string &field, const std::string &what) {
    throw std::invalid_argument("config field '" + field + "': " + what);
}

const ojson *find(const ojson &obj, const char *key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double get_real(const ojson &obj, const char *key, const std::string &where, double def) {
    const auto *v = find(obj, key);
    if (v == nullptr) {
        return def;
    }
    if (!v->is_number()) {
        config_error(where + key, "expected a number");
    }
    const double x = v->get<double>();
    if (!std::isfinite(x)) {
        config_error(where + key, "expected a finite number");
    }
    return x;
}

std::size_t get_count(const ojson &obj, const char *key, const std::string &where,
                      std::size_t def) {
    const auto *v = find(obj, key);
    if (v == nullptr) {
        return def;
    }
    if (!v->is_number_integer() || v->get<long long>() < 0) {
        config_error(where + key, "expected a non-negative integer");
    }
    return v->get<std::size_t>();
}

bool get_bool(const ojson &obj, const char *key, const std::string &where, bool def) {
    const auto *v = find(obj, key);
    if (v == nullptr) {
        return def;
    }
    if (!v->is_boolean()) {
        config_error(where + key, "expected true or false");
    }
    return v->get<bool>();
}

std::string get_string(const ojson &obj, const char *key, const std::string &where,
                       const std::string &def) {
    const auto *v = find(obj, key);
    if (v == nullptr) {
        return def;
    }
    if (!v->is_string()) {
        config_error(where + key, "expected a string");
    }
    return v->get<std::string>();
}

std::vector<double> get_reals(const ojson &obj, const char *key, const std::string &where) {
    const auto *v = find(obj, key);
    if (v == nullptr) {
        return {};
    }
    if (v->is_number()) {
        return {v->get<double>()};
    }
    if (!v->is_array()) {
        config_error(where + key, "expected a number or an array of numbers");
    }
    std::vector<double> out;
    for (const auto &x : *v) {
        if (!x.is_number()) {
            config_error(where + key, "expected an array of numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

const ojson &get_object(const ojson &obj, const char *key, const std::string &where) {
    static const ojson empty = ojson::object();
    const auto *v = find(obj, key);
    if (v == nullptr) {
        return empty;
    }
    if (!v->is_object()) {
        config_error(where + key, "expected an object");
    }
    return *v;
}

void reject_unknown(const ojson &obj, std::initializer_list<const char *> known,
                    const std::string &where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const auto &k = it.key();
        if (k == "comment" || k == "description" || (!k.empty() && k[0] == '_')) {
            continue;
        }
        if (std::none_of(known.begin(), known.end(), [&](const char *s) { return k == s; })) {
            config_error(where + k, "unknown field");
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

InstanceSource parse_source(const ojson &doc, const char *files_key, const char *tfim_key,
                            const std::filesystem::path &base) {
    InstanceSource src;
    if (const auto *v = find(doc, files_key)) {
        if (!v->is_array()) {
            config_error(files_key, "expected an array of file paths");
        }
        for (const auto &f : *v) {
            if (!f.is_string()) {
                config_error(files_key, "expected an array of file paths");
            }
            src.files.push_back(resolve(base, f.get<std::string>()));
        }
    }
    if (find(doc, tfim_key) != nullptr) {
        const auto &t = get_object(doc, tfim_key, "");
        const std::string where = std::string(tfim_key) + ".";
        reject_unknown(t, {"n", "J", "g"}, where);
        TfimFamily f;
        f.n = get_count(t, "n", where, 0);
        if (f.n < 2) {
            config_error(where + "n", "expected an integer >= 2");
        }
        f.J = get_real(t, "J", where, 1.0);
        f.g = get_reals(t, "g", where);
        if (f.g.empty()) {
            config_error(where + "g", "expected at least one field value");
        }
        src.tfim = f;
    }
    return src;
}

} // namespace

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path &base_dir,
                           std::string_view mode) {
    ojson doc;
    try {
        doc = ojson::parse(json_text);
    } catch (const nlohmann::json::parse_error &e) {
        throw std::invalid_argument(std::string("malformed run config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw std::invalid_argument("malformed run config: top level must be an object");
    }
    reject_unknown(doc,
                   {"mode", "run_id", "seed", "out_dir", "accuracy", "hamiltonians", "tfim",
                    "test_hamiltonians", "test_tfim", "ansatz", "flow", "train", "optimizer",
                    "init", "transfer_params", "checkpoint", "samples_per_point",
                    "compute_exact_max_qubits", "geometry", "cost", "csv"},
                   "");
    RunConfig cfg;
    cfg.mode = get_string(doc, "mode", "", std::string(mode));
    if (!mode.empty() && cfg.mode != mode) {
        config_error("mode", "\"" + cfg.mode + "\" does not match the requested mode \"" +
                                 std::string(mode) + "\"");
    }
    if (std::find(std::begin(kModes), std::end(kModes), cfg.mode) == std::end(kModes)) {
        config_error("mode", cfg.mode.empty() ? "missing" : "unknown mode \"" + cfg.mode + "\"");
    }
    cfg.run_id = get_string(doc, "run_id", "", cfg.mode);
    if (const auto *s = find(doc, "seed")) {
        if (!s->is_number_unsigned()) {
            config_error("seed", "expected a non-negative integer");
        }
        cfg.seed = s->get<std::uint64_t>();
    }
    cfg.out_dir = get_string(doc, "out_dir", "", "out");
    cfg.accuracy = get_real(doc, "accuracy", "", kDefaultAccuracy);
    if (!(cfg.accuracy > 0.0)) {
        config_error("accuracy", "expected a positive number");
    }
    cfg.csv = get_bool(doc, "csv", "", false);
    cfg.samples_per_point = get_count(doc, "samples_per_point", "", 16);
    if (cfg.samples_per_point == 0) {
        config_error("samples_per_point", "expected a positive integer");
    }
    cfg.compute_exact_max_qubits = get_count(doc, "compute_exact_max_qubits", "", 12);
    cfg.instances = parse_source(doc, "hamiltonians", "tfim", base_dir);
    cfg.test_instances = parse_source(doc, "test_hamiltonians", "test_tfim", base_dir);

    if (find(doc, "ansatz") != nullptr) {
        const auto &a = get_object(doc, "ansatz", "");
        reject_unknown(a, {"kind", "layers", "electrons", "spin_orbitals"}, "ansatz.");
        AnsatzConfig ac;
        const auto kind = get_string(a, "kind", "ansatz.", "");
        if (kind == "hea") {
            ac.kind = AnsatzKind::HEA;
            ac.layers = get_count(a, "layers", "ansatz.", 1);
        } else if (kind == "gsd") {
            ac.kind = AnsatzKind::GSD;
            ac.electrons = get_count(a, "electrons", "ansatz.", 0);
            ac.spin_orbitals = get_count(a, "spin_orbitals", "ansatz.", 0);
            if (ac.electrons == 0 || ac.spin_orbitals == 0) {
                config_error("ansatz", "gsd needs electrons and spin_orbitals");
            }
        } else {
            config_error("ansatz.kind", "expected \"hea\" or \"gsd\"");
        }
        cfg.ansatz = ac;
    }

    const auto &f = get_object(doc, "flow", "");
    reject_unknown(f,
                   {"layers", "mixture", "embed_dim", "hidden_width", "hidden_layers",
                    "reflections", "base_variance", "share_conditioner"},
                   "flow.");
    cfg.flow_layers_set = find(f, "layers") != nullptr;
    cfg.flow.layers = get_count(f, "layers", "flow.", cfg.mode == "flow-m" ? 20 : 7);
    cfg.flow.mixture = get_count(f, "mixture", "flow.", 32);
    cfg.flow.embed_dim = get_count(f, "embed_dim", "flow.", 16);
    cfg.flow.hidden_width = get_count(f, "hidden_width", "flow.", 256);
    cfg.flow.hidden_layers = get_count(f, "hidden_layers", "flow.", 3);
    cfg.flow.reflections = get_count(f, "reflections", "flow.", 0);
    cfg.flow.base_variance = get_real(f, "base_variance", "flow.", 0.01);
    cfg.flow.share_conditioner = get_bool(f, "share_conditioner", "flow.", false);
    cfg.flow.seed = cfg.seed;
    if (cfg.flow.mixture == 0) {
        config_error("flow.mixture", "expected a positive integer");
    }
    if (!(cfg.flow.base_variance > 0.0)) {
        config_error("flow.base_variance", "expected a positive number");
    }

    const auto &t = get_object(doc, "train", "");
    reject_unknown(t,
                   {"epochs", "batch", "buffer", "learning_rate", "weight_decay",
                    "winner_noise_var", "stop_at_accuracy"},
                   "train.");
    cfg.train.epochs = get_count(t, "epochs", "train.", 1000);
    cfg.train.batch = get_count(t, "batch", "train.", 2);
    cfg.train.buffer = get_count(t, "buffer", "train.", 2);
    cfg.train.learning_rate = get_real(t, "learning_rate", "train.", 1e-4);
    cfg.train.weight_decay = get_real(t, "weight_decay", "train.", 1e-4);
    cfg.train.winner_noise_var = get_real(t, "winner_noise_var", "train.", 1e-3);
    cfg.train.seed = cfg.seed;
    if (get_bool(t, "stop_at_accuracy", "train.", false)) {
        cfg.train.stop_accuracy = cfg.accuracy;
    }
    try {
        cfg.train.validate();
    } catch (const std::invalid_argument &e) {
        throw std::invalid_argument(std::string("config field ") + e.what());
    }

    const auto &o = get_object(doc, "optimizer", "");
    reject_unknown(o, {"method", "eta", "max_iters"}, "optimizer.");
    try {
        cfg.vqe.method = optimizer_from_string(get_string(o, "method", "optimizer.", "adam"));
    } catch (const std::invalid_argument &e) {
        config_error("optimizer.method", e.what());
    }
    cfg.vqe.eta = get_real(o, "eta", "optimizer.", 0.02);
    if (!(cfg.vqe.eta > 0.0)) {
        config_error("optimizer.eta", "expected a positive number");
    }
    cfg.vqe.max_iters = get_count(o, "max_iters", "optimizer.", 1000);
    cfg.vqe.threshold = cfg.accuracy;
    cfg.vqe.seed = cfg.seed;

    if (const auto *init = find(doc, "init")) {
        cfg.inits.clear();
        auto add = [&](const ojson &v) {
            if (!v.is_string()) {
                config_error("init", "expected a string or an array of strings");
            }
            try {
                cfg.inits.push_back(warm_start_init_from_string(v.get<std::string>()));
            } catch (const std::invalid_argument &e) {
                config_error("init", e.what());
            }
        };
        if (init->is_array()) {
            for (const auto &v : *init) {
                add(v);
            }
        } else {
            add(*init);
        }
        if (cfg.inits.empty()) {
            config_error("init", "expected at least one init");
        }
    }
    if (const auto *p = find(doc, "transfer_params")) {
        if (!p->is_string()) {
            config_error("transfer_params", "expected a file path");
        }
        cfg.transfer_params = resolve(base_dir, p->get<std::string>());
    }
    if (const auto *p = find(doc, "checkpoint")) {
        if (!p->is_string()) {
            config_error("checkpoint", "expected a file path");
        }
        cfg.checkpoint = resolve(base_dir, p->get<std::string>());
    }

    const auto &g = get_object(doc, "geometry", "");
    reject_unknown(g, {"molecule", "d"}, "geometry.");
    cfg.molecule = get_string(g, "molecule", "geometry.", "");
    cfg.distances = get_reals(g, "d", "geometry.");

    const auto &c = get_object(doc, "cost", "");
    reject_unknown(c, {"pre", "post", "vqe", "n_test"}, "cost.");
    cfg.cost_pre = get_real(c, "pre", "cost.", 0.0);
    cfg.cost_post = get_reals(c, "post", "cost.");
    cfg.cost_vqe = get_reals(c, "vqe", "cost.");
    if (find(c, "n_test") != nullptr) {
        cfg.cost_n_test = get_count(c, "n_test", "cost.", 0);
    }

    // Mode requirements.
    const std::string &m = cfg.mode;
    const bool needs_instances = m == "vqe" || m == "flow-s" || m == "flow-m" || m == "exact";
    if (needs_instances && cfg.instances.empty()) {
        config_error("hamiltonians", "mode " + m + " needs \"hamiltonians\" or \"tfim\"");
    }
    if ((m == "generate" || m == "warm-start") && cfg.instances.empty() &&
        cfg.test_instances.empty()) {
        config_error("test_hamiltonians", "mode " + m + " needs test instances");
    }
    const bool needs_ansatz =
        m == "vqe" || m == "flow-s" || m == "flow-m" || m == "generate" || m == "warm-start";
    if (needs_ansatz && !cfg.ansatz) {
        config_error("ansatz", "mode " + m + " needs an ansatz");
    }
    const bool uses_flow_init =
        std::find(cfg.inits.begin(), cfg.inits.end(), WarmStartInit::Flow) != cfg.inits.end();
    if ((m == "generate" || ((m == "warm-start" || m == "vqe") && uses_flow_init)) &&
        !cfg.checkpoint) {
        config_error("checkpoint", "mode " + m + " needs a flow checkpoint");
    }
    const bool uses_transfer =
        std::find(cfg.inits.begin(), cfg.inits.end(), WarmStartInit::Transfer) != cfg.inits.end();
    if ((m == "warm-start" || m == "vqe") && uses_transfer && !cfg.transfer_params) {
        config_error("transfer_params", "init \"transfer\" needs a parameter file");
    }
    if (m == "geometry" && (cfg.molecule.empty() || cfg.distances.empty())) {
        config_error("geometry", "mode geometry needs molecule and d");
    }
    if (m == "gen-tfim" && !cfg.instances.tfim) {
        config_error("tfim", "mode gen-tfim needs a tfim block");
    }
    if (m == "cost-report" && (cfg.cost_post.empty() || cfg.cost_vqe.empty())) {
        config_error("cost", "mode cost-report needs non-empty post and vqe lists");
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path, std::string_view mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open run config " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    auto base = path.parent_path();
    return parse_run_config(buf.str(), base.empty() ? std::filesystem::path(".") : base, mode);
}

std::vector<Hamiltonian> load_instances(const InstanceSource &src, std::size_t compute_exact_max) {
    std::vector<Hamiltonian> out;
    for (const auto &f : src.files) {
        if (!std::filesystem::exists(f)) {
            throw std::invalid_argument("Hamiltonian file not found: " + f.string());
        }
        out.push_back(load_hamiltonian(f));
    }
    if (src.tfim) {
        for (double g : src.tfim->g) {
            out.push_back(tfim(src.tfim->n, src.tfim->J, g));
        }
    }
    for (auto &h : out) {
        auto ref = h.ref_energies();
        if (!ref.exact && h.n_qubits() <= compute_exact_max) {
            ref.exact = exact_ground_energy(h);
            h.set_ref_energies(ref);
        }
    }
    return out;
}

AnsatzSpec make_ansatz(const AnsatzConfig &cfg, std::size_t n_qubits) {
    return cfg.kind == AnsatzKind::HEA ? AnsatzSpec::hea(n_qubits, cfg.layers)
                                       : AnsatzSpec::gsd(cfg.electrons, cfg.spin_orbitals);
}

// Metrics ------------------------------------------------------------------

std::string to_jsonl(const MetricsRecord &r) {
    ojson j;
    j["run_id"] = r.run_id;
    j["mode"] = r.mode;
    j["instance_label"] = r.instance_label;
    j["step"] = r.step;
    j["energy"] = r.energy;
    j["best_energy"] = r.best_energy;
    j["error_vs_exact"] = opt_json(r.error_vs_exact);
    j["cumulative_evaluations"] = r.cumulative_evaluations;
    j["loss"] = opt_json(r.loss);
    j["wall_ms"] = r.wall_ms;
    return j.dump();
}

std::string csv_header() {
    return "run_id,mode,instance_label,step,energy,best_energy,error_vs_exact,"
           "cumulative_evaluations,loss,wall_ms";
}

std::string to_csv(const MetricsRecord &r) {
    auto quote = [](const std::string &s) {
        std::string q = "\"";
        for (char c : s) {
            q += c == '"' ? std::string("\"\"") : std::string(1, c);
        }
        return q + "\"";
    };
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << quote(r.run_id) << ',' << r.mode << ',' << quote(r.instance_label) << ',' << r.step
        << ',' << num(r.energy) << ',' << num(r.best_energy) << ','
        << (r.error_vs_exact ? num(*r.error_vs_exact) : "") << ',' << r.cumulative_evaluations
        << ',' << (r.loss ? num(*r.loss) : "") << ',' << num(r.wall_ms);
    return out.str();
}

// Modes --------------------------------------------------------------------

namespace {

class MetricsSink {
  public:
    MetricsSink(const std::filesystem::path &dir, bool csv)
        : jsonl_(dir / "metrics.jsonl", std::ios::binary) {
        if (!jsonl_) {
            throw std::runtime_error("cannot write " + (dir / "metrics.jsonl").string());
        }
        if (csv) {
            csv_.open(dir / "metrics.csv", std::ios::binary);
            if (!csv_) {
                throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
            }
            csv_ << csv_header() << '\n';
        }
    }

    void write(const MetricsRecord &r) {
        jsonl_ << to_jsonl(r) << '\n';
        if (csv_.is_open()) {
            csv_ << to_csv(r) << '\n';
        }
    }

  private:
    std::ofstream jsonl_;
    std::ofstream csv_;
};

void write_summary(const std::filesystem::path &dir, const ojson &summary) {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    }
    out << summary.dump(2) << '\n';
}

AnsatzSpec resolve_ansatz(const RunConfig &cfg, const std::vector<Hamiltonian> &hs) {
    return make_ansatz(*cfg.ansatz, hs.empty() ? 1 : hs.front().n_qubits());
}

void check_registers(const std::vector<Hamiltonian> &hs, const AnsatzSpec &spec) {
    for (const auto &h : hs) {
        if (h.n_qubits() != spec.n_qubits()) {
            throw std::invalid_argument("instance \"" + h.instance_label() + "\" has " +
                                        std::to_string(h.n_qubits()) + " qubits, ansatz has " +
                                        std::to_string(spec.n_qubits()));
        }
    }
}

ojson base_summary(const RunConfig &cfg) {
    ojson s;
    s["run_id"] = cfg.run_id;
    s["mode"] = cfg.mode;
    s["seed"] = cfg.seed;
    s["accuracy"] = cfg.accuracy;
    return s;
}

std::optional<double> error_of(const Hamiltonian &h, double e) {
    const auto exact = h.ref_energies().exact;
    return exact ? std::optional<double>(e - *exact) : std::nullopt;
}

ojson flow_meta(const FlowModel &m) {
    const auto &c = m.config();
    ojson j;
    j["dim"] = c.dim;
    j["context_dim"] = c.context_dim;
    j["layers"] = c.layers;
    j["mixture"] = c.mixture;
    j["embed_dim"] = c.embed_dim;
    j["hidden_width"] = c.hidden_width;
    j["hidden_layers"] = c.hidden_layers;
    j["reflections"] = m.reflections();
    j["base_variance"] = c.base_variance;
    j["share_conditioner"] = c.share_conditioner;
    j["parameter_count"] = m.parameter_count();
    return j;
}

ojson train_meta(const TrainConfig &t) {
    ojson j;
    j["epochs"] = t.epochs;
    j["batch"] = t.batch;
    j["buffer"] = t.buffer;
    j["learning_rate"] = t.learning_rate;
    j["weight_decay"] = t.weight_decay;
    j["winner_noise_var"] = t.winner_noise_var;
    j["stop_at_accuracy"] = t.stop_accuracy.has_value();
    return j;
}

int run_flow(const RunConfig &cfg, std::ostream &log, bool multi) {
    const auto hs = load_instances(cfg.instances, cfg.compute_exact_max_qubits);
    const auto spec = resolve_ansatz(cfg, hs);
    check_registers(hs, spec);
    MetricsSink sink(cfg.out_dir, cfg.csv);
    ojson summary = base_summary(cfg);
    summary["train"] = train_meta(cfg.train);
    ojson instances = ojson::array();

    // Flow-VQE-S trains one model per instance; Flow-VQE-M one shared model.
    const std::size_t groups = multi ? 1 : hs.size();
    for (std::size_t gi = 0; gi < groups; ++gi) {
        std::vector<Hamiltonian> members =
            multi ? hs : std::vector<Hamiltonian>{hs[gi]};
        const auto order = family_term_order(members);
        if (order.empty()) {
            throw std::invalid_argument("instances carry no non-identity terms to condition on");
        }
        FlowConfig fc = cfg.flow;
        fc.dim = spec.param_count();
        fc.context_dim = order.size();
        fc.seed = mix64(cfg.seed + gi);
        FlowModel model(fc, order);
        std::vector<TrainingContext> ctxs;
        for (const auto &h : members) {
            ctxs.push_back({&h, context_of(h, order)});
        }
        const std::string run_id =
            multi ? cfg.run_id : cfg.run_id + "/" + members.front().instance_label();
        const std::size_t K = members.size();
        const std::size_t B = cfg.train.batch;
        TrainConfig tc = cfg.train;
        tc.seed = mix64(cfg.seed + gi);
        std::vector<std::optional<std::uint64_t>> first_hit(K);
        TrainOptions opts;
        opts.on_epoch = [&](const EpochRecord &rec) {
            for (std::size_t k = 0; k < K; ++k) {
                MetricsRecord r;
                r.run_id = run_id;
                r.mode = cfg.mode;
                r.instance_label = members[k].instance_label();
                r.step = rec.epoch;
                r.energy = rec.batch_best[k];
                r.best_energy = rec.best_energy[k];
                r.error_vs_exact = error_of(members[k], rec.best_energy[k]);
                r.cumulative_evaluations = (rec.epoch - 1) * B * K + (k + 1) * B;
                r.loss = rec.loss;
                r.wall_ms = rec.wall_ms;
                sink.write(r);
                if (!first_hit[k] && r.error_vs_exact && *r.error_vs_exact <= cfg.accuracy) {
                    first_hit[k] = r.cumulative_evaluations;
                }
            }
            return true;
        };
        const auto res = train_flow_vqe(model, ctxs, spec, tc, opts);
        const std::string ckpt =
            groups == 1 ? "checkpoint.bin" : "checkpoint-" + std::to_string(gi) + ".bin";
        model.save(cfg.out_dir / ckpt);
        for (std::size_t k = 0; k < K; ++k) {
            const auto &h = members[k];
            const double best = res.buffer.best_energy(k);
            ojson inst;
            inst["label"] = h.instance_label();
            inst["best_energy"] = best;
            inst["exact"] = opt_json(h.ref_energies().exact);
            inst["error"] = opt_json(error_of(h, best));
            inst["evaluations_to_accuracy"] = opt_json(first_hit[k]);
            inst["best_theta"] = res.buffer.entries(k).front().theta;
            if (!multi) {
                inst["checkpoint"] = ckpt;
                inst["epochs"] = res.trajectory.size();
                inst["evaluations"] = res.evaluations;
            }
            instances.push_back(inst);
            log << h.instance_label() << ": best " << best;
            if (h.ref_energies().exact) {
                log << " error " << best - *h.ref_energies().exact;
            }
            log << '\n';
        }
        if (multi) {
            summary["checkpoint"] = ckpt;
            summary["epochs"] = res.trajectory.size();
            summary["evaluations"] = res.evaluations;
            summary["flow"] = flow_meta(model);
        } else if (gi == 0) {
            summary["flow"] = flow_meta(model);
        }
    }
    summary["instances"] = instances;
    write_summary(cfg.out_dir, summary);
    return 0;
}

std::vector<Hamiltonian> test_set(const RunConfig &cfg) {
    return load_instances(cfg.test_instances.empty() ? cfg.instances : cfg.test_instances,
                          cfg.compute_exact_max_qubits);
}

int run_generate(const RunConfig &cfg, std::ostream &log) {
    const auto hs = test_set(cfg);
    const auto spec = resolve_ansatz(cfg, hs);
    check_registers(hs, spec);
    const FlowModel model = FlowModel::load(*cfg.checkpoint);
    EvalCounter counter;
    const auto pts = generate_pes(model, hs, spec, cfg.samples_per_point, cfg.seed, counter);
    MetricsSink sink(cfg.out_dir, cfg.csv);
    ojson summary = base_summary(cfg);
    summary["samples_per_point"] = cfg.samples_per_point;
    ojson arr = ojson::array();
    std::uint64_t cumulative = 0;
    std::vector<double> errors;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto &p = pts[i];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < p.energies.size(); ++s) {
            best = std::min(best, p.energies[s]);
            MetricsRecord r;
            r.run_id = cfg.run_id + "/" + p.label;
            r.mode = cfg.mode;
            r.instance_label = p.label;
            r.step = s + 1;
            r.energy = p.energies[s];
            r.best_energy = best;
            r.error_vs_exact = error_of(hs[i], best);
            r.cumulative_evaluations = ++cumulative;
            sink.write(r);
        }
        ojson j;
        j["label"] = p.label;
        j["e_min"] = p.e_min;
        j["e_mean"] = p.e_mean;
        j["exact"] = opt_json(p.exact);
        j["error_min"] = opt_json(p.error_min);
        j["error_mean"] = opt_json(p.error_mean);
        j["best_theta"] = p.best_theta;
        arr.push_back(j);
        if (p.error_min) {
            errors.push_back(*p.error_min);
        }
        log << p.label << ": E_min " << p.e_min << " E_mean " << p.e_mean << '\n';
    }
    summary["points"] = arr;
    summary["evaluations"] = counter.value();
    summary["median_error_min"] = errors.empty() ? ojson(nullptr) : ojson(median(errors));
    write_summary(cfg.out_dir, summary);
    return 0;
}

ParameterVector load_params(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open parameter file " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw std::invalid_argument("malformed parameter file " + path.string() + ": " + e.what());
    }
    if (j.is_object() && j.contains("theta")) {
        j = j.at("theta");
    }
    if (!j.is_array()) {
        throw std::invalid_argument("parameter file must hold an array or {\"theta\": [...]}");
    }
    return j.get<ParameterVector>();
}

int run_warm(const RunConfig &cfg, std::ostream &log, bool test_instances) {
    const auto hs = test_instances ? test_set(cfg)
                                   : load_instances(cfg.instances, cfg.compute_exact_max_qubits);
    const auto spec = resolve_ansatz(cfg, hs);
    check_registers(hs, spec);
    std::optional<FlowModel> model;
    if (std::find(cfg.inits.begin(), cfg.inits.end(), WarmStartInit::Flow) != cfg.inits.end()) {
        model = FlowModel::load(*cfg.checkpoint);
    }
    std::optional<ParameterVector> transfer;
    if (cfg.transfer_params) {
        transfer = load_params(*cfg.transfer_params);
    }
    MetricsSink sink(cfg.out_dir, cfg.csv);
    ojson summary = base_summary(cfg);
    summary["optimizer"] = {{"method", to_string(cfg.vqe.method)},
                            {"eta", cfg.vqe.eta},
                            {"max_iters", cfg.vqe.max_iters}};
    ojson arr = ojson::array();
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const auto &h = hs[i];
        ojson inst;
        inst["label"] = h.instance_label();
        inst["exact"] = opt_json(h.ref_energies().exact);
        for (const auto init : cfg.inits) {
            ParameterVector theta0(spec.param_count(), 0.0);
            std::uint64_t init_cost = 0;
            if (init == WarmStartInit::Flow) {
                EvalCounter c;
                const Hamiltonian one[] = {h};
                const auto pts = generate_pes(*model, one, spec, cfg.samples_per_point,
                                              mix64(cfg.seed + i), c);
                theta0 = pts.front().best_theta;
                init_cost = c.value();
            } else if (init == WarmStartInit::Transfer) {
                theta0 = parameter_transfer(*transfer, spec);
            }
            VqeOptions opt = cfg.vqe;
            opt.seed = mix64(cfg.seed + i);
            const std::string run_id = cfg.run_id + "/" + h.instance_label() + "/" + to_string(init);
            VqeResult run_res = run_optimizer(spec, h, theta0, opt, [&](const VqePoint &p) {
                MetricsRecord r;
                r.run_id = run_id;
                r.mode = cfg.mode;
                r.instance_label = h.instance_label();
                r.step = p.iteration;
                r.energy = p.energy;
                r.best_energy = p.best_energy;
                r.error_vs_exact = error_of(h, p.energy);
                r.cumulative_evaluations = init_cost + p.evaluations;
                r.wall_ms = p.wall_ms;
                sink.write(r);
            });
            WarmStartResult ws{std::move(run_res), init_cost, {}, {}};
            if (ws.run.n_ca) {
                ws.n_ca = init_cost + *ws.run.n_ca;
            }
            ws.min_error = ws.run.min_error;
            ojson j;
            j["init_cost"] = init_cost;
            j["n_ca"] = opt_json(ws.n_ca);
            j["n_ca_excluding_initial"] =
                ws.n_ca ? ojson(*ws.n_ca - VqeResult::kInitialEvaluations) : ojson("not reached");
            j["min_error"] = opt_json(ws.min_error);
            j["iterations"] = ws.run.final_state.iteration;
            j["evaluations"] = init_cost + ws.run.final_state.counter.value();
            j["final_energy"] = ws.run.trajectory.back().energy;
            j["final_theta"] = ws.run.final_state.theta;
            inst[to_string(init)] = j;
            log << h.instance_label() << " [" << to_string(init) << "]: N_ca "
                << (ws.n_ca ? std::to_string(*ws.n_ca) : "not reached") << '\n';
        }
        arr.push_back(inst);
    }
    summary["instances"] = arr;
    write_summary(cfg.out_dir, summary);
    return 0;
}

int run_exact(const RunConfig &cfg, std::ostream &log) {
    auto src = cfg.instances;
    const auto hs = load_instances(src, 0);
    ojson summary = base_summary(cfg);
    ojson arr = ojson::array();
    for (const auto &h : hs) {
        const double e0 = exact_ground_energy(h);
        log << (h.instance_label().empty() ? "instance" : h.instance_label()) << ": "
            << fmt_num(e0) << '\n';
        arr.push_back({{"label", h.instance_label()}, {"n_qubits", h.n_qubits()}, {"exact", e0}});
    }
    summary["instances"] = arr;
    write_summary(cfg.out_dir, summary);
    return 0;
}

int run_gen_tfim(const RunConfig &cfg, std::ostream &log) {
    const auto &f = *cfg.instances.tfim;
    ojson summary = base_summary(cfg);
    ojson files = ojson::array();
    for (double g : f.g) {
        Hamiltonian h = tfim(f.n, f.J, g);
        if (f.n <= cfg.compute_exact_max_qubits) {
            h.set_ref_energies({std::nullopt, exact_ground_energy(h)});
        }
        const std::string name = "tfim_n" + std::to_string(f.n) + "_J" + fmt_num(f.J) + "_g" +
                                 fmt_num(g) + ".json";
        save_hamiltonian(h, cfg.out_dir / name);
        files.push_back(name);
        log << name << '\n';
    }
    summary["files"] = files;
    write_summary(cfg.out_dir, summary);
    return 0;
}

int run_geometry(const RunConfig &cfg, std::ostream &log) {
    ojson summary = base_summary(cfg);
    summary["molecule"] = cfg.molecule;
    ojson arr = ojson::array();
    for (double d : cfg.distances) {
        const auto atoms = geometry(cfg.molecule, d);
        const std::string comment = cfg.molecule + " d=" + fmt_num(d);
        const std::string text = to_xyz(atoms, comment);
        const std::string name = slug(cfg.molecule + "_d" + fmt_num(d)) + ".xyz";
        std::ofstream out(cfg.out_dir / name, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + (cfg.out_dir / name).string());
        }
        out << text;
        log << text;
        ojson coords = ojson::array();
        for (const auto &a : atoms) {
            coords.push_back({a.element, a.x, a.y, a.z});
        }
        arr.push_back({{"d", d}, {"file", name}, {"atoms", coords}});
    }
    summary["geometries"] = arr;
    write_summary(cfg.out_dir, summary);
    return 0;
}

int run_cost(const RunConfig &cfg, std::ostream &log) {
    const auto r = cost_report(cfg.cost_pre, cfg.cost_post, cfg.cost_vqe, cfg.cost_n_test);
    ojson summary = base_summary(cfg);
    summary["c_pre"] = r.c_pre;
    summary["c_post_bar"] = r.c_post_bar;
    summary["c_vqe_bar"] = r.c_vqe_bar;
    summary["n_test"] = r.n_test;
    summary["total_warm"] = r.total_warm;
    summary["total_vqe"] = r.total_vqe;
    summary["break_even"] = r.break_even ? ojson(*r.break_even) : ojson("none");
    write_summary(cfg.out_dir, summary);
    log << "break-even: " << (r.break_even ? std::to_string(*r.break_even) : "none") << '\n';
    return 0;
}

} // namespace

int run(const RunConfig &cfg, std::ostream &log) {
    std::filesystem::create_directories(cfg.out_dir);
    const std::string &m = cfg.mode;
    if (m == "flow-s" || m == "flow-m") {
        return run_flow(cfg, log, m == "flow-m");
    }
    if (m == "vqe") {
        return run_warm(cfg, log, false);
    }
    if (m == "warm-start") {
        return run_warm(cfg, log, true);
    }
    if (m == "generate") {
        return run_generate(cfg, log);
    }
    if (m == "exact") {
        return run_exact(cfg, log);
    }
    if (m == "gen-tfim") {
        return run_gen_tfim(cfg, log);
    }
    if (m == "geometry") {
        return run_geometry(cfg, log);
    }
    if (m == "cost-report") {
        return run_cost(cfg, log);
    }
    throw std::invalid_argument("unknown mode \"" + m + "\"");
}

} // namespace flowvqe
