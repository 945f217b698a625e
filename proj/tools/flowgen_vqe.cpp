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
#include <algorithm>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flowvqe/harness.hpp"

namespace {

std::string mode_list() {
    std::string s;
    for (auto m : flowvqe::kModes) {
        s += s.empty() ? "" : ", ";
        s += m;
    }
    return s;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Flow-based warm starts for variational quantum eigensolvers"};
    app.usage("flowgen-vqe <mode> --config <path.json> [--seed N] [--out DIR] [--csv]");
    std::string mode;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool csv = false;
    app.add_option("mode", mode, "one of: " + mode_list())->required();
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out", out_dir, "override the output directory");
    app.add_flag("--csv", csv, "also write metrics.csv");
    CLI11_PARSE(app, argc, argv);

    if (std::find(std::begin(flowvqe::kModes), std::end(flowvqe::kModes), mode) ==
        std::end(flowvqe::kModes)) {
        std::cerr << "unknown mode \"" << mode << "\"; expected one of: " << mode_list() << "\n\n"
                  << app.help();
        return 2;
    }
    try {
        auto cfg = flowvqe::load_run_config(config_path, mode);
        if (seed) {
            cfg.seed = *seed;
            cfg.flow.seed = *seed;
            cfg.train.seed = *seed;
            cfg.vqe.seed = *seed;
        }
        if (!out_dir.empty()) {
            cfg.out_dir = out_dir;
        }
        cfg.csv = cfg.csv || csv;
        return flowvqe::run(cfg, std::cout);
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
