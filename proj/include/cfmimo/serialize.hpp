// SPDX-License-Identifier: Apache-2.0
//
// cfmimo: max-min fair downlink beamforming for cell-free massive MIMO
// Copyright (C) 2026 the cfmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include <json.hpp>

#include "cfmimo/driver.hpp"
#include "cfmimo/scenario.hpp"
#include "cfmimo/solvers.hpp"

namespace cfmimo {

// Config and scenario files are versioned JSON documents; loaders reject
// unknown keys so a stale or misspelled field cannot silently change a run.

nlohmann::json scenario_config_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

/// Positions as [x, y], channels as nested [re, im] arrays in SI units,
/// noise in watts. The loader validates every shape against the config.
nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

nlohmann::json beamformers_to_json(int M, int N, int K,
                                   const std::vector<std::complex<double>>& v);
std::vector<std::complex<double>> beamformers_from_json(const nlohmann::json& j, int M,
                                                        int N, int K);

nlohmann::json check_outcome_to_json(double s_c, const Scenario& scenario,
                                     const SolveOutcome& outcome);
nlohmann::json maxmin_result_to_json(const Scenario& scenario, const MaxMinResult& r);
nlohmann::json qos_result_to_json(const Scenario& scenario, const QosResult& r);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace cfmimo
