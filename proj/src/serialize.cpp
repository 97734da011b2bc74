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

#include "cfmimo/serialize.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace cfmimo {

namespace {

using nlohmann::json;

constexpr const char* kScenarioConfigSchema = "cfmimo/scenario_config/1";
constexpr const char* kScenarioSchema = "cfmimo/scenario/1";
constexpr const char* kCheckSchema = "cfmimo/check_result/1";
constexpr const char* kMaxMinSchema = "cfmimo/maxmin_result/1";
constexpr const char* kQosSchema = "cfmimo/qos_result/1";

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
    }
  }
}

void check_schema(const json& obj, const char* expected, const std::string& where) {
  if (!obj.is_object() || !obj.contains("schema") || obj.at("schema") != expected) {
    throw std::invalid_argument(where + ": missing or unexpected schema field");
  }
}

}  // namespace

json scenario_config_to_json(const ScenarioConfig& config) {
  const ScenarioConfig cfg = config.resolved();
  json j;
  j["schema"] = kScenarioConfigSchema;
  j["num_aps"] = cfg.num_aps;
  j["antennas_per_ap"] = cfg.antennas_per_ap;
  j["num_users"] = cfg.num_users;
  j["area_side_m"] = cfg.area_side_m;
  j["per_ap_power_w"] = cfg.per_ap_power_w;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["shadow_std_db"] = cfg.shadow_std_db;
  j["pathloss_offset_db"] = cfg.pathloss_offset_db;
  j["pathloss_exponent_db_per_decade"] = cfg.pathloss_exponent_db_per_decade;
  j["correlation"] = cfg.correlation == CorrelationModel::LocalScattering
                         ? "local_scattering"
                         : "uncorrelated";
  j["angular_spread_deg"] = cfg.angular_spread_deg;
  j["seed"] = cfg.seed;
  return j;
}

ScenarioConfig scenario_config_from_json(const json& j) {
  check_schema(j, kScenarioConfigSchema, "scenario config");
  check_keys(j,
             {"schema", "num_aps", "antennas_per_ap", "num_users", "area_side_m",
              "per_ap_power_w", "bandwidth_hz", "shadow_std_db", "pathloss_offset_db",
              "pathloss_exponent_db_per_decade", "correlation", "angular_spread_deg",
              "seed"},
             "scenario config");
  ScenarioConfig cfg;
  if (j.contains("num_aps")) cfg.num_aps = j.at("num_aps").get<int>();
  if (j.contains("antennas_per_ap")) cfg.antennas_per_ap = j.at("antennas_per_ap").get<int>();
  if (j.contains("num_users")) cfg.num_users = j.at("num_users").get<int>();
  if (j.contains("area_side_m")) cfg.area_side_m = j.at("area_side_m").get<double>();
  if (j.contains("per_ap_power_w")) {
    const json& p = j.at("per_ap_power_w");
    if (p.is_number()) {
      cfg.per_ap_power_w.assign(static_cast<std::size_t>(std::max(cfg.num_aps, 0)),
                                p.get<double>());
    } else {
      cfg.per_ap_power_w = p.get<std::vector<double>>();
    }
  }
  if (j.contains("bandwidth_hz")) cfg.bandwidth_hz = j.at("bandwidth_hz").get<double>();
  if (j.contains("shadow_std_db")) cfg.shadow_std_db = j.at("shadow_std_db").get<double>();
  if (j.contains("pathloss_offset_db")) {
    cfg.pathloss_offset_db = j.at("pathloss_offset_db").get<double>();
  }
  if (j.contains("pathloss_exponent_db_per_decade")) {
    cfg.pathloss_exponent_db_per_decade =
        j.at("pathloss_exponent_db_per_decade").get<double>();
  }
  if (j.contains("correlation")) {
    const std::string model = j.at("correlation").get<std::string>();
    if (model == "local_scattering") {
      cfg.correlation = CorrelationModel::LocalScattering;
    } else if (model == "uncorrelated") {
      cfg.correlation = CorrelationModel::Uncorrelated;
    } else {
      throw std::invalid_argument("scenario config: correlation must be "
                                  "'uncorrelated' or 'local_scattering'");
    }
  }
  if (j.contains("angular_spread_deg")) {
    cfg.angular_spread_deg = j.at("angular_spread_deg").get<double>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg.resolved();
}

json scenario_to_json(const Scenario& scenario) {
  const ScenarioConfig cfg = scenario.config.resolved();
  json j;
  j["schema"] = kScenarioSchema;
  j["config"] = scenario_config_to_json(cfg);
  json aps = json::array();
  for (int m = 0; m < cfg.num_aps; ++m) {
    aps.push_back({scenario.ap_positions(0, m), scenario.ap_positions(1, m)});
  }
  j["ap_positions"] = std::move(aps);
  json users = json::array();
  for (int k = 0; k < cfg.num_users; ++k) {
    users.push_back({scenario.user_positions(0, k), scenario.user_positions(1, k)});
  }
  j["user_positions"] = std::move(users);
  json channels = json::array();
  for (int k = 0; k < cfg.num_users; ++k) {
    json per_user = json::array();
    for (int m = 0; m < cfg.num_aps; ++m) {
      json per_ap = json::array();
      const auto h = scenario.channel(k, m);
      for (int n = 0; n < cfg.antennas_per_ap; ++n) {
        per_ap.push_back({h(n).real(), h(n).imag()});
      }
      per_user.push_back(std::move(per_ap));
    }
    channels.push_back(std::move(per_user));
  }
  j["channels"] = std::move(channels);
  j["noise_power_w"] =
      std::vector<double>(scenario.noise_power_w.data(),
                          scenario.noise_power_w.data() + scenario.noise_power_w.size());
  return j;
}

Scenario scenario_from_json(const json& j) {
  check_schema(j, kScenarioSchema, "scenario");
  check_keys(j,
             {"schema", "config", "ap_positions", "user_positions", "channels",
              "noise_power_w"},
             "scenario");
  Scenario sc;
  sc.config = scenario_config_from_json(j.at("config"));
  const int M = sc.config.num_aps;
  const int N = sc.config.antennas_per_ap;
  const int K = sc.config.num_users;

  const json& aps = j.at("ap_positions");
  if (!aps.is_array() || static_cast<int>(aps.size()) != M) {
    throw std::invalid_argument("scenario: ap_positions must have num_aps entries");
  }
  sc.ap_positions.resize(2, M);
  for (int m = 0; m < M; ++m) {
    const json& p = aps.at(m);
    if (!p.is_array() || p.size() != 2) {
      throw std::invalid_argument("scenario: ap_positions entries must be [x, y]");
    }
    sc.ap_positions(0, m) = p.at(0).get<double>();
    sc.ap_positions(1, m) = p.at(1).get<double>();
  }

  const json& users = j.at("user_positions");
  if (!users.is_array() || static_cast<int>(users.size()) != K) {
    throw std::invalid_argument("scenario: user_positions must have num_users entries");
  }
  sc.user_positions.resize(2, K);
  for (int k = 0; k < K; ++k) {
    const json& p = users.at(k);
    if (!p.is_array() || p.size() != 2) {
      throw std::invalid_argument("scenario: user_positions entries must be [x, y]");
    }
    sc.user_positions(0, k) = p.at(0).get<double>();
    sc.user_positions(1, k) = p.at(1).get<double>();
  }

  const json& channels = j.at("channels");
  if (!channels.is_array() || static_cast<int>(channels.size()) != K) {
    throw std::invalid_argument("scenario: channels must have num_users entries");
  }
  sc.channels.resize(static_cast<Eigen::Index>(K) * M * N);
  for (int k = 0; k < K; ++k) {
    const json& per_user = channels.at(k);
    if (!per_user.is_array() || static_cast<int>(per_user.size()) != M) {
      throw std::invalid_argument("scenario: channels[k] must have num_aps entries");
    }
    for (int m = 0; m < M; ++m) {
      const json& per_ap = per_user.at(m);
      if (!per_ap.is_array() || static_cast<int>(per_ap.size()) != N) {
        throw std::invalid_argument(
            "scenario: channels[k][m] must have antennas_per_ap entries");
      }
      for (int n = 0; n < N; ++n) {
        const json& c = per_ap.at(n);
        if (!c.is_array() || c.size() != 2) {
          throw std::invalid_argument("scenario: channel entries must be [re, im]");
        }
        sc.channels((static_cast<Eigen::Index>(k) * M + m) * N + n) = {
            c.at(0).get<double>(), c.at(1).get<double>()};
      }
    }
  }

  const auto noise = j.at("noise_power_w").get<std::vector<double>>();
  if (static_cast<int>(noise.size()) != K) {
    throw std::invalid_argument("scenario: noise_power_w must have num_users entries");
  }
  sc.noise_power_w =
      Eigen::Map<const Eigen::VectorXd>(noise.data(), static_cast<Eigen::Index>(K));
  for (double s : noise) {
    if (!(s > 0.0)) throw std::invalid_argument("scenario: noise powers must be > 0");
  }
  if (!sc.channels.allFinite()) {
    throw std::invalid_argument("scenario: channel entries must be finite");
  }
  return sc;
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  write_json_file(scenario_to_json(scenario), path);
}

Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}

json beamformers_to_json(int M, int N, int K,
                         const std::vector<std::complex<double>>& v) {
  json out = json::array();
  for (int k = 0; k < K; ++k) {
    json per_user = json::array();
    for (int m = 0; m < M; ++m) {
      json per_ap = json::array();
      for (int n = 0; n < N; ++n) {
        const auto& c = v[(static_cast<std::size_t>(k) * M + m) * N + n];
        per_ap.push_back({c.real(), c.imag()});
      }
      per_user.push_back(std::move(per_ap));
    }
    out.push_back(std::move(per_user));
  }
  return out;
}

std::vector<std::complex<double>> beamformers_from_json(const json& j, int M, int N,
                                                        int K) {
  if (!j.is_array() || static_cast<int>(j.size()) != K) {
    throw std::invalid_argument("beamformers: wrong user count");
  }
  std::vector<std::complex<double>> out(static_cast<std::size_t>(K) * M * N);
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M; ++m) {
      for (int n = 0; n < N; ++n) {
        const json& c = j.at(k).at(m).at(n);
        out[(static_cast<std::size_t>(k) * M + m) * N + n] = {c.at(0).get<double>(),
                                                              c.at(1).get<double>()};
      }
    }
  }
  return out;
}

json check_outcome_to_json(double s_c, const Scenario& scenario,
                           const SolveOutcome& outcome) {
  const ScenarioConfig cfg = scenario.config.resolved();
  const Eigen::VectorXd rates = achieved_rates(scenario, outcome.beamformers);
  const Eigen::VectorXd powers = per_ap_powers(scenario, outcome.beamformers);
  json j;
  j["schema"] = kCheckSchema;
  j["rate"] = s_c;
  j["verdict"] = to_string(outcome.verdict);
  j["final_f"] = outcome.final_f;
  j["iterations"] = outcome.iterations;
  j["stop_reason"] = to_string(outcome.stop_reason);
  j["power_scale"] = outcome.power_scale;
  j["per_user_rates"] = std::vector<double>(rates.data(), rates.data() + rates.size());
  j["per_ap_power_w"] =
      std::vector<double>(powers.data(), powers.data() + powers.size());
  j["beamformers"] = beamformers_to_json(cfg.num_aps, cfg.antennas_per_ap,
                                         cfg.num_users, outcome.beamformers);
  return j;
}

json maxmin_result_to_json(const Scenario& scenario, const MaxMinResult& r) {
  const ScenarioConfig cfg = scenario.config.resolved();
  json j;
  j["schema"] = kMaxMinSchema;
  j["rate_interval"] = {r.s_min, r.s_max};
  j["certified_rate"] = r.certified_rate;
  j["rate_slack"] = r.rate_slack;
  j["per_user_rates"] = std::vector<double>(r.per_user_rates.data(),
                                            r.per_user_rates.data() +
                                                r.per_user_rates.size());
  j["per_ap_power_w"] = std::vector<double>(r.per_ap_power_w.data(),
                                            r.per_ap_power_w.data() +
                                                r.per_ap_power_w.size());
  j["checks_performed"] = r.checks_performed;
  j["upper_bracket_saturated"] = r.upper_bracket_saturated;
  j["setup_ms"] = r.setup_ms;
  j["solve_ms"] = r.solve_ms;
  json checks = json::array();
  for (const CheckSummary& c : r.checks) {
    checks.push_back({{"s_c", c.s_c},
                      {"verdict", to_string(c.verdict)},
                      {"iterations", c.iterations},
                      {"final_f", c.final_f},
                      {"stop_reason", to_string(c.stop_reason)},
                      {"setup_ms", c.setup_ms},
                      {"solve_ms", c.solve_ms}});
  }
  j["checks"] = std::move(checks);
  j["beamformers"] = beamformers_to_json(cfg.num_aps, cfg.antennas_per_ap,
                                         cfg.num_users, r.beamformers);
  return j;
}

json qos_result_to_json(const Scenario& scenario, const QosResult& r) {
  const ScenarioConfig cfg = scenario.config.resolved();
  json j;
  j["schema"] = kQosSchema;
  j["rate"] = r.s_c;
  j["verdict"] = to_string(r.verdict);
  j["total_power_w"] = r.total_power_w;
  j["per_user_rates"] = std::vector<double>(r.per_user_rates.data(),
                                            r.per_user_rates.data() +
                                                r.per_user_rates.size());
  j["iterations"] = r.iterations;
  j["stop_reason"] = to_string(r.stop_reason);
  j["setup_ms"] = r.setup_ms;
  j["solve_ms"] = r.solve_ms;
  j["beamformers"] = beamformers_to_json(cfg.num_aps, cfg.antennas_per_ap,
                                         cfg.num_users, r.beamformers);
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return json::parse(in);
}

}  // namespace cfmimo
