/*
   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spde/parallel.hpp"
#include "spde/runner.hpp"

int main(int argc, char** argv) {
    using namespace spde;
    CLI::App app{"Galerkin SPDE experiments: coupling, Harnack and gradient checks, invariant measures"};
    std::string experiment, config_path, out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    unsigned workers = default_workers();
    bool allow_dt_override = false;

    app.add_option("experiment", experiment, "simulate | couple | harnack | gradient | invariant | ultrabound | yosida-table")
        ->required()
        ->check(CLI::IsMember(cli::experiment_names()));
    app.add_option("--config", config_path, "JSON configuration or manifest")->required();
    app.add_option("--seed", seed, "Override the configured seed");
    app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--override", overrides, "dotted.key=value, repeatable");
    app.add_flag("--allow-dt-override", allow_dt_override, "Proceed when dt exceeds alpha / 4");
    CLI11_PARSE(app, argc, argv);

    try {
        if (seed) overrides.push_back("seed=" + std::to_string(*seed));
        if (allow_dt_override) overrides.push_back("params.allow_dt_override=true");
        const auto doc = cli::resolve(config::load_json_file(config_path), experiment, overrides);
        const auto result = cli::run(doc, out_dir, workers);
        std::cout << experiment << ": " << (result.exit_code == cli::exit_pass ? "PASS" : "FAIL")
                  << " (report in " << out_dir << "/report.json)\n";
        return result.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return cli::exit_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_error;
    }
}
