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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "flowvqe/harness.hpp"

using namespace flowvqe;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("flowvqe_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<nlohmann::json> read_jsonl(const fs::path &path) {
    std::ifstream in(path);
    std::vector<nlohmann::json> out;
    for (std::string line; std::getline(in, line);) {
        out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

nlohmann::json read_json(const fs::path &path) {
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

RunConfig parse(const std::string &text) { return parse_run_config(text, fs::temp_directory_path()); }

std::string config_error(const std::string &text) {
    try {
        parse(text);
    } catch (const std::invalid_argument &e) {
        return e.what();
    }
    return {};
}

/// Smallest n with pre + post n < vqe n, by direct search.
std::size_t break_even_oracle(double pre, double post, double vqe) {
    std::size_t n = 1;
    while (!(pre + post * static_cast<double>(n) < vqe * static_cast<double>(n))) {
        ++n;
    }
    return n;
}

int run_cli(const std::string &args) {
    const std::string cmd = std::string(FLOWGEN_VQE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("H4 is a collinear chain with spacing d") {
    const auto atoms = geometry("H4", 0.9);
    REQUIRE(atoms.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(atoms[i].element == "H");
        CHECK(std::abs(atoms[i].x - 0.9 * static_cast<double>(i)) < 1e-12);
        CHECK(atoms[i].y == 0.0);
        CHECK(atoms[i].z == 0.0);
    }
}

TEST_CASE("H2O is mirror symmetric with a 104.5 degree angle and bond length d") {
    const double d = 1.1;
    const auto a = geometry("H2O", d);
    REQUIRE(a.size() == 3);
    CHECK(a[0].element == "O");
    CHECK(std::abs(a[1].x + a[2].x) < 1e-12);
    CHECK(std::abs(a[1].z - a[2].z) < 1e-12);
    const double r1 = std::hypot(a[1].x - a[0].x, a[1].y - a[0].y, a[1].z - a[0].z);
    const double r2 = std::hypot(a[2].x - a[0].x, a[2].y - a[0].y, a[2].z - a[0].z);
    CHECK(std::abs(r1 - d) < 1e-12);
    CHECK(std::abs(r2 - d) < 1e-12);
    const double dot = a[1].x * a[2].x + a[1].y * a[2].y + a[1].z * a[2].z;
    const double angle = std::acos(dot / (r1 * r2)) * 180.0 / std::numbers::pi;
    CHECK(std::abs(angle - 104.5) < 1e-6);
}

TEST_CASE("C6H6 stretches only the first hydrogen") {
    const auto at0 = geometry("C6H6", 0.0);
    const auto at1 = geometry("C6H6", 0.35);
    REQUIRE(at1.size() == 12);
    CHECK(std::abs(at1[6].x - (2.4810 + 0.35)) < 1e-12);
    CHECK(at1[6].element == "H");
    for (std::size_t i = 0; i < 12; ++i) {
        if (i != 6) {
            CHECK(at0[i].x == at1[i].x);
        }
        CHECK(at0[i].y == at1[i].y);
    }
    CHECK(at1[0].element == "C");
    CHECK(std::abs(at1[1].y - 1.2098) < 1e-12);
    CHECK(std::abs(at1[7].x - 1.2405) < 1e-12);
}

TEST_CASE("NH3 lifts nitrogen to height d above the hydrogen plane") {
    const auto a = geometry("NH3", 0.4);
    REQUIRE(a.size() == 4);
    CHECK(a[0].element == "N");
    CHECK(std::abs(a[0].z - 0.4) < 1e-12);
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(a[i].z == 0.0);
        CHECK(std::abs(std::hypot(a[i].x, a[i].y) - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(geometry("CH4", 1.0), std::invalid_argument);
}

TEST_CASE("XYZ output lists the count, the comment and one atom per line") {
    const auto atoms = geometry("H4", 1.0);
    const auto text = to_xyz(atoms, "H4 d=1");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "4");
    std::getline(in, line);
    CHECK(line == "H4 d=1");
    std::getline(in, line);
    CHECK(line == "H 0.000000 0.000000 0.000000");
    std::getline(in, line);
    CHECK(line == "H 1.000000 0.000000 0.000000");
}

TEST_CASE("cost report reproduces the published break-even points") {
    const double nh3_post[] = {2527.0}, nh3_vqe[] = {5265.0};
    const auto nh3 = cost_report(12000.0, nh3_post, nh3_vqe);
    REQUIRE(nh3.break_even);
    CHECK(*nh3.break_even == 5);
    CHECK(*nh3.break_even == break_even_oracle(12000.0, 2527.0, 5265.0));

    const double c6_post[] = {2153.0}, c6_vqe[] = {10787.0};
    const auto c6 = cost_report(24000.0, c6_post, c6_vqe);
    REQUIRE(c6.break_even);
    CHECK(*c6.break_even == 3);
    CHECK(*c6.break_even == break_even_oracle(24000.0, 2153.0, 10787.0));
}

TEST_CASE("cost report totals and edge cases") {
    const double post[] = {100.0, 300.0}, vqe[] = {1000.0, 1400.0, 1200.0};
    const auto r = cost_report(5000.0, post, vqe);
    CHECK(r.c_post_bar == 200.0);
    CHECK(r.c_vqe_bar == 1200.0);
    CHECK(r.n_test == 2);
    CHECK(r.total_warm == 5400.0);
    CHECK(r.total_vqe == 2400.0);
    CHECK(*r.break_even == break_even_oracle(5000.0, 200.0, 1200.0));

    const auto zero = cost_report(5000.0, post, vqe, 0);
    CHECK(zero.total_warm == 5000.0);
    CHECK(zero.total_vqe == 0.0);

    // Exact division: 1000 / (300 - 100) = 5 is a tie, so 6 is needed.
    const double p2[] = {100.0}, v2[] = {300.0};
    CHECK(*cost_report(1000.0, p2, v2).break_even == 6);

    const double p3[] = {500.0}, v3[] = {400.0};
    CHECK_FALSE(cost_report(10.0, p3, v3).break_even.has_value());
    const double none[] = {1.0};
    CHECK_THROWS_AS(cost_report(1.0, std::span<const double>{}, none), std::invalid_argument);
    const double neg[] = {-1.0};
    CHECK_THROWS_AS(cost_report(1.0, neg, none), std::invalid_argument);
}

TEST_CASE("run config defaults and mode-dependent layer counts") {
    const auto s = parse(R"({"mode":"flow-s","tfim":{"n":3,"g":[1.0]},"ansatz":{"kind":"hea","layers":1}})");
    CHECK(s.flow.layers == 7);
    CHECK(s.train.batch == 2);
    CHECK(s.train.buffer == 2);
    CHECK(s.train.learning_rate == 1e-4);
    CHECK(s.train.winner_noise_var == 1e-3);
    CHECK(s.vqe.eta == 0.02);
    CHECK(s.accuracy == 1.6e-3);
    const auto m = parse(R"({"mode":"flow-m","tfim":{"n":3,"g":[1.0]},"ansatz":{"kind":"hea","layers":1}})");
    CHECK(m.flow.layers == 20);
    const auto k = parse(
        R"({"mode":"flow-m","tfim":{"n":3,"g":[1.0]},"ansatz":{"kind":"hea"},"flow":{"layers":3}})");
    CHECK(k.flow.layers == 3);
    CHECK(k.flow_layers_set);
}

TEST_CASE("run config errors name the offending field") {
    CHECK(config_error(R"({"mode":"vqe","tfim":{"n":3,"g":1},"ansatz":{"kind":"hea"},"bogus":1})")
              .find("'bogus'") != std::string::npos);
    CHECK(config_error(R"({"mode":"teleport"})").find("'mode'") != std::string::npos);
    CHECK(config_error(R"({"tfim":{"n":3,"g":1}})").find("'mode'") != std::string::npos);
    CHECK(config_error(R"({"mode":"vqe","ansatz":{"kind":"hea"}})").find("'hamiltonians'") !=
          std::string::npos);
    CHECK(config_error(R"({"mode":"vqe","tfim":{"n":3,"g":1}})").find("'ansatz'") !=
          std::string::npos);
    CHECK(config_error(R"({"mode":"vqe","tfim":{"n":3,"g":1},"ansatz":{"kind":"uccsd"}})")
              .find("'ansatz.kind'") != std::string::npos);
    CHECK(config_error(R"({"mode":"vqe","tfim":{"n":3,"g":1},"ansatz":{"kind":"hea"},"optimizer":{"eta":-1}})")
              .find("'optimizer.eta'") != std::string::npos);
    CHECK(config_error(R"({"mode":"flow-s","tfim":{"n":3,"g":1},"ansatz":{"kind":"hea"},"train":{"batch":"two"}})")
              .find("'train.batch'") != std::string::npos);
    CHECK(config_error(R"({"mode":"generate","test_tfim":{"n":3,"g":1},"ansatz":{"kind":"hea"}})")
              .find("'checkpoint'") != std::string::npos);
    CHECK(config_error(R"({"mode":"geometry","geometry":{"molecule":"H4"}})").find("'geometry'") !=
          std::string::npos);
    CHECK(config_error(R"({"mode":"cost-report","cost":{"pre":1,"post":[]}})").find("'cost'") !=
          std::string::npos);
    CHECK(config_error("{ not json").find("malformed") != std::string::npos);
    CHECK(config_error(R"({"mode":"exact","tfim":{"n":3,"g":1},"comment":"ok"})").empty());
    CHECK_THROWS_AS(parse_run_config(R"({"mode":"exact","tfim":{"n":3,"g":1}})", ".", "vqe"),
                    std::invalid_argument);
}

TEST_CASE("vqe runs write deterministic metrics and a summary") {
    const auto dir = scratch_dir("vqe");
    auto cfg = parse(R"({"mode":"vqe","run_id":"det","seed":3,"tfim":{"n":3,"g":[0.7]},
                         "ansatz":{"kind":"hea","layers":1},"optimizer":{"max_iters":30}})");
    std::ostringstream log;
    cfg.out_dir = dir / "a";
    CHECK(run(cfg, log) == 0);
    cfg.out_dir = dir / "b";
    CHECK(run(cfg, log) == 0);
    auto a = read_jsonl(dir / "a" / "metrics.jsonl");
    auto b = read_jsonl(dir / "b" / "metrics.jsonl");
    REQUIRE(a.size() == b.size());
    REQUIRE(!a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i].erase("wall_ms");
        b[i].erase("wall_ms");
        CHECK(a[i] == b[i]);
    }
    const auto &first = a.front();
    for (const char *key : {"run_id", "mode", "instance_label", "step", "energy", "best_energy",
                            "error_vs_exact", "cumulative_evaluations", "loss"}) {
        CHECK(first.contains(key));
    }
    CHECK(first["run_id"] == "det/J=1,g=0.7/zero");
    CHECK(first["cumulative_evaluations"] == 1);
    // Each gradient step costs 2d = 12 evaluations on top of the initial one.
    CHECK(a[1]["cumulative_evaluations"] == 13);
    const auto summary = read_json(dir / "a" / "summary.json");
    CHECK(summary["instances"][0].contains("zero"));
    CHECK(summary["instances"][0]["exact"].is_number());
}

TEST_CASE("flow-m metrics count B evaluations per context in order") {
    const auto dir = scratch_dir("flowm");
    auto cfg = parse(R"({"mode":"flow-m","seed":1,"tfim":{"n":3,"g":[0.5,1.5]},
                         "ansatz":{"kind":"hea","layers":1},
                         "flow":{"layers":1,"mixture":4,"embed_dim":4,"hidden_width":8},
                         "train":{"epochs":3,"batch":2,"buffer":2},"csv":true})");
    cfg.out_dir = dir;
    std::ostringstream log;
    REQUIRE(run(cfg, log) == 0);
    const auto rec = read_jsonl(dir / "metrics.jsonl");
    REQUIRE(rec.size() == 6);
    const int expected[] = {2, 4, 6, 8, 10, 12};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(rec[i]["cumulative_evaluations"] == expected[i]);
        CHECK(rec[i]["loss"].is_number());
    }
    CHECK(fs::exists(dir / "checkpoint.bin"));
    CHECK(fs::exists(dir / "metrics.csv"));
    const auto model = FlowModel::load(dir / "checkpoint.bin");
    CHECK(model.dim() == 6);

    SECTION("generate and warm-start reuse the checkpoint") {
        const std::string ckpt = "\"checkpoint\":\"" + (dir / "checkpoint.bin").string() + "\",";
        auto gen = parse("{" + ckpt + R"("mode":"generate","seed":2,"test_tfim":{"n":3,"g":[1.0]},
                             "ansatz":{"kind":"hea","layers":1},"samples_per_point":5})");
        gen.out_dir = dir / "gen";
        REQUIRE(run(gen, log) == 0);
        CHECK(read_jsonl(dir / "gen" / "metrics.jsonl").size() == 5);

        auto warm = parse("{" + ckpt + R"("mode":"warm-start","seed":2,"test_tfim":{"n":3,"g":[1.0]},
                              "ansatz":{"kind":"hea","layers":1},"samples_per_point":5,
                              "init":["flow","zero"],"optimizer":{"max_iters":5}})");
        warm.out_dir = dir / "warm";
        REQUIRE(run(warm, log) == 0);
        const auto recs = read_jsonl(dir / "warm" / "metrics.jsonl");
        // The flow-initialized run is charged its 5 samples up front.
        CHECK(recs.front()["run_id"] == "warm-start/J=1,g=1/flow");
        CHECK(recs.front()["cumulative_evaluations"] == 6);
        const auto summary = read_json(dir / "warm" / "summary.json");
        CHECK(summary["instances"][0]["flow"]["init_cost"] == 5);
        CHECK(summary["instances"][0]["zero"]["init_cost"] == 0);
    }
}

TEST_CASE("generate rejects instances outside the family order") {
    FlowConfig fc;
    fc.dim = 3;
    fc.context_dim = 2;
    fc.layers = 1;
    fc.mixture = 2;
    fc.embed_dim = 2;
    fc.hidden_width = 4;
    FlowModel model(fc, {"ZII", "XII"});
    const auto spec = AnsatzSpec::hea(3, 0);
    const std::vector<Hamiltonian> odd{Hamiltonian(3, {{"ZII", 1.0}, {"IIY", 0.5}})};
    EvalCounter c;
    CHECK_THROWS_AS(generate_pes(model, odd, spec, 2, 0, c), std::invalid_argument);
    const std::vector<Hamiltonian> ok{Hamiltonian(3, {{"ZII", 1.0}, {"III", 3.0}})};
    const auto pts = generate_pes(model, ok, spec, 4, 0, c);
    CHECK(c.value() == 4);
    CHECK(pts.front().energies.size() == 4);
}

TEST_CASE("gen-tfim, exact, geometry and cost-report modes") {
    const auto dir = scratch_dir("misc");
    std::ostringstream log;
    auto gt = parse(R"({"mode":"gen-tfim","tfim":{"n":3,"J":1.0,"g":[0.5,2.0]}})");
    gt.out_dir = dir / "tfim";
    REQUIRE(run(gt, log) == 0);
    const auto file = dir / "tfim" / "tfim_n3_J1_g0.5.json";
    REQUIRE(fs::exists(file));
    const auto h = load_hamiltonian(file);
    REQUIRE(h.ref_energies().exact);
    CHECK(*h.ref_energies().exact == Approx(exact_ground_energy(tfim(3, 1.0, 0.5))).margin(1e-12));

    auto ex = parse_run_config(R"({"mode":"exact","hamiltonians":["tfim/tfim_n3_J1_g2.json"]})", dir);
    ex.out_dir = dir / "exact";
    REQUIRE(run(ex, log) == 0);
    CHECK(read_json(dir / "exact" / "summary.json")["instances"][0]["exact"].get<double>() ==
          Approx(exact_ground_energy(tfim(3, 1.0, 2.0))).margin(1e-12));

    auto geo = parse(R"({"mode":"geometry","geometry":{"molecule":"H4","d":[0.5,1.0]}})");
    geo.out_dir = dir / "geo";
    REQUIRE(run(geo, log) == 0);
    CHECK(fs::exists(dir / "geo" / "H4_d0.5.xyz"));
    CHECK(fs::exists(dir / "geo" / "H4_d1.xyz"));

    auto cr = parse(R"({"mode":"cost-report","cost":{"pre":24000,"post":[2153],"vqe":[10787]}})");
    cr.out_dir = dir / "cost";
    REQUIRE(run(cr, log) == 0);
    CHECK(read_json(dir / "cost" / "summary.json")["break_even"] == 3);
}

TEST_CASE("command line interface") {
    const auto dir = scratch_dir("cli");
    {
        std::ofstream(dir / "cost.json") << R"({"cost":{"pre":12000,"post":[2527],"vqe":[5265]}})";
    }
    const std::string cfg = (dir / "cost.json").string();
    CHECK(run_cli("cost-report --config " + cfg + " --out " + (dir / "out").string()) == 0);
    CHECK(read_json(dir / "out" / "summary.json")["break_even"] == 5);
    CHECK(run_cli("teleport --config " + cfg) != 0);
    CHECK(run_cli("cost-report") != 0);
    CHECK(run_cli("vqe --config " + cfg) != 0);
    CHECK(run_cli("cost-report --config " + (dir / "missing.json").string()) != 0);
}
