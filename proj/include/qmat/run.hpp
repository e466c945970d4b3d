// Copyright 2026 The qmat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmat/matrix.hpp"

namespace qmat {

/// One command per run. Everything that influences results is recorded in
/// the report, so a config + seed reproduces a run byte for byte.
struct RunConfig {
    std::string command;  // compile | verify | expect | trace | schatten | det | innerprod
    std::string expr;
    std::vector<std::string> matrix_files;
    std::vector<std::string> matrix_json;  // inline documents, same schema as files

    double t = 1.0;
    double eps = 0.01;      // compile budget; estimator commands treat it as
                            // the total relative-error target
    double p = 2.0;         // Schatten order
    std::uint64_t samples = 0;  // eigenvalue samples T; 0 = auto-size
    std::uint64_t shots = 10000;
    int qpe_bits = 6;
    std::uint64_t seed = 1;
    double confidence_a = 0.01;
    std::string mode = "circuit-qpe";  // or "ideal-sampler"
    double shift_c = 0.0;              // trace shift; <= 0 selects auto
    std::vector<Complex> x, y;         // vectors for innerprod / expect
    std::vector<double> sweep_eps;     // verify: extra budgets for error sweeps
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

/// Executes one command. Throws qmat::Error on failure; the report is an
/// ordered JSON document with stable field order (no timestamps), so equal
/// configs and seeds give byte-identical output.
nlohmann::ordered_json run(const RunConfig& cfg);

/// Parse-config-and-run wrapper used by the C API: never throws, errors are
/// reported as {"status":"error", "category", "code", "message"} and the
/// second element of the pair carries the exit code (0 on success).
std::pair<nlohmann::ordered_json, int> run_json(const std::string& config_json);

}  // namespace qmat
