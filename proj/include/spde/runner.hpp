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
#pragma once

#include <string>
#include <vector>

#include "spde/model_spec.hpp"

// Experiment runner behind the command-line tool.
namespace spde::cli {

using config::Json;

/// Exit codes: 0 pass, 2 statistical failure, 1 configuration or runtime error.
enum ExitCode : int { exit_pass = 0, exit_error = 1, exit_statistical = 2 };

const std::vector<std::string>& experiment_names();

/// Applies "dotted.path=value"; the value is parsed as JSON when possible
/// and kept as a string otherwise.
void apply_override(Json& doc, const std::string& assignment);

/// Merges defaults, the config's shared "params" and its
/// "experiments.<name>" section into a self-contained document
/// {experiment, seed, model, params}, applies overrides and validates.
/// A resolved document resolves to itself.
Json resolve(const Json& config, const std::string& experiment, const std::vector<std::string>& overrides = {});

struct RunResult {
    int exit_code = exit_error;
    Json report;
};

/// Runs a resolved document and writes report.json, manifest.json and
/// the experiment's CSV files into out_dir (created if missing).
RunResult run(const Json& resolved, const std::string& out_dir, unsigned workers);

/// Sampled yosida table: alpha, r, J_alpha(r), F_alpha(r), F_0(r), |F_alpha| - |F_0|.
struct YosidaRow {
    double alpha;
    double r;
    double resolvent;
    double yosida;
    double minimal;
    double excess;
};
std::vector<YosidaRow> yosida_table(const monotone::ScalarMap& map, const std::vector<double>& alpha_grid,
                                    const std::vector<double>& r_grid);

} // namespace spde::cli
