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

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfmimo/driver.hpp"
#include "cfmimo/serialize.hpp"
#include "cfmimo/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cfmimo;

namespace {

constexpr int kExitFeasible = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitError = 2;
constexpr int kExitUndecided = 3;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for hashing: " + path);
  std::uint64_t hash = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

/// Shared solver flags; the solver seed drives block selection only.
struct SolverFlags {
  double beta = 1.0;
  double alpha = 0.05;
  double alpha_bar = 0.01;
  int max_iter = 5000;
  double opg_tol = 1e-10;
  double feas_tol = 1e-7;
  std::uint64_t seed = 0;
  bool theory_mode = false;
  int threads = 1;
  std::string solver = "randomized";

  void add_to(CLI::App& cmd) {
    cmd.add_option("--beta", beta, "penalty parameter");
    cmd.add_option("--alpha", alpha, "block selection probability (randomized)");
    cmd.add_option("--alpha-bar", alpha_bar, "proximal weight (randomized)");
    cmd.add_option("--max-iter", max_iter, "iteration cap per solve");
    cmd.add_option("--opg-tol", opg_tol, "stop when ||v^t - v^{t-1}|| <= tol");
    cmd.add_option("--feas-tol", feas_tol, "feasibility objective threshold");
    cmd.add_option("--seed", seed, "solver RNG seed (block selection)");
    cmd.add_flag("--theory-mode", theory_mode,
                 "enforce the sufficient convergence condition on alpha, alpha_bar");
    cmd.add_option("--threads", threads, "intra-solve threads (1 = serial)");
    cmd.add_option("--solver", solver, "standard or randomized")
        ->check(CLI::IsMember({"standard", "randomized"}));
  }

  SolverConfig to_config() const {
    SolverConfig cfg;
    cfg.beta = beta;
    cfg.alpha = alpha;
    cfg.alpha_bar = alpha_bar;
    cfg.max_iter = max_iter;
    cfg.opg_tol = opg_tol;
    cfg.feas_tol = feas_tol;
    cfg.seed = seed;
    cfg.theory_mode = theory_mode;
    cfg.threads = threads;
    return cfg;
  }

  SolverKind kind() const {
    return solver == "standard" ? SolverKind::Standard : SolverKind::Randomized;
  }

  json to_json() const {
    return {{"beta", beta},           {"alpha", alpha},
            {"alpha_bar", alpha_bar}, {"max_iter", max_iter},
            {"opg_tol", opg_tol},     {"feas_tol", feas_tol},
            {"seed", seed},           {"theory_mode", theory_mode},
            {"threads", threads},     {"solver", solver}};
  }

  static SolverFlags from_json(const json& j) {
    SolverFlags f;
    f.beta = j.at("beta").get<double>();
    f.alpha = j.at("alpha").get<double>();
    f.alpha_bar = j.at("alpha_bar").get<double>();
    f.max_iter = j.at("max_iter").get<int>();
    f.opg_tol = j.at("opg_tol").get<double>();
    f.feas_tol = j.at("feas_tol").get<double>();
    f.seed = j.at("seed").get<std::uint64_t>();
    f.theory_mode = j.at("theory_mode").get<bool>();
    f.threads = j.at("threads").get<int>();
    f.solver = j.at("solver").get<std::string>();
    return f;
  }
};

void write_manifest(const std::string& command, const json& params, std::uint64_t seed,
                    const std::vector<std::string>& outputs,
                    const std::string& started_at, const json& input_hashes) {
  if (outputs.empty()) return;
  for (const std::string& path : outputs) {
    if (!fs::exists(path)) {
      throw std::runtime_error("manifest: output file missing: " + path);
    }
  }
  json m;
  m["schema"] = "cfmimo/manifest/1";
  m["version"] = kVersionString;
  m["command"] = command;
  m["params"] = params;
  m["seed"] = seed;
  m["started_at"] = started_at;
  m["finished_at"] = iso_timestamp();
  m["outputs"] = outputs;
  m["input_hashes"] = input_hashes;
  write_json_file(m, outputs.front() + ".manifest.json");
}

// ---------------------------------------------------------------------------
// generate

struct GenerateParams {
  std::string config_path;  // empty when config is inline (replay)
  json config_inline;
  std::string out_path;
  std::optional<std::uint64_t> seed_override;
};

int do_generate(const GenerateParams& p) {
  const std::string started = iso_timestamp();
  const json config_json =
      p.config_path.empty() ? p.config_inline : read_json_file(p.config_path);
  ScenarioConfig cfg = scenario_config_from_json(config_json);
  if (p.seed_override) cfg.seed = *p.seed_override;
  const Scenario scenario = generate_scenario(cfg);
  save_scenario(scenario, p.out_path);

  json params;
  params["config"] = scenario_config_to_json(cfg);  // full snapshot, replayable
  params["out"] = p.out_path;
  write_manifest("generate", params, cfg.seed, {p.out_path}, started, json::object());
  std::cout << "wrote " << p.out_path << "\n";
  return kExitFeasible;
}

// ---------------------------------------------------------------------------
// check

struct CheckParams {
  std::string scenario_path;
  double rate = 1.0;
  SolverFlags flags;
  std::string out_path;    // optional
  std::string trace_path;  // optional
};

int do_check(const CheckParams& p) {
  const std::string started = iso_timestamp();
  const Scenario scenario = load_scenario(p.scenario_path);
  const SolveOutcome outcome =
      check_feasibility(scenario, p.rate, p.flags.kind(), p.flags.to_config());
  std::cout << "verdict: " << to_string(outcome.verdict) << " (f = " << outcome.final_f
            << ", iterations = " << outcome.iterations << ")\n";

  std::vector<std::string> outputs;
  if (!p.out_path.empty()) {
    write_json_file(check_outcome_to_json(p.rate, scenario, outcome), p.out_path);
    outputs.push_back(p.out_path);
  }
  if (!p.trace_path.empty()) {
    write_trace_csv(outcome.trace, p.trace_path);
    outputs.push_back(p.trace_path);
  }
  if (!outputs.empty()) {
    json params;
    params["scenario"] = p.scenario_path;
    params["rate"] = p.rate;
    params["solver_flags"] = p.flags.to_json();
    params["out"] = p.out_path;
    params["trace"] = p.trace_path;
    write_manifest("check", params, p.flags.seed, outputs, started,
                   {{p.scenario_path, file_fingerprint(p.scenario_path)}});
  }
  switch (outcome.verdict) {
    case Verdict::Feasible: return kExitFeasible;
    case Verdict::Infeasible: return kExitInfeasible;
    default: return kExitUndecided;
  }
}

// ---------------------------------------------------------------------------
// bisect

struct BisectParams {
  std::string scenario_path;
  double s_min = 0.0;
  double s_max = 10.0;
  double s_ter = 0.01;
  bool warm_start = false;
  SolverFlags flags;
  std::string out_path;
  std::string trace_dir;  // optional, one CSV per feasibility check
};

int do_bisect(const BisectParams& p) {
  const std::string started = iso_timestamp();
  const Scenario scenario = load_scenario(p.scenario_path);
  BisectionConfig cfg;
  cfg.s_min = p.s_min;
  cfg.s_max = p.s_max;
  cfg.s_ter = p.s_ter;
  cfg.solver = p.flags.kind();
  cfg.solver_config = p.flags.to_config();
  cfg.warm_start = p.warm_start;
  cfg.keep_traces = !p.trace_dir.empty();

  const MaxMinResult result = bisection_maxmin(scenario, cfg);
  std::vector<std::string> outputs;
  write_json_file(maxmin_result_to_json(scenario, result), p.out_path);
  outputs.push_back(p.out_path);
  if (!p.trace_dir.empty()) {
    fs::create_directories(p.trace_dir);
    for (std::size_t i = 0; i < result.check_traces.size(); ++i) {
      std::ostringstream name;
      name << "check_" << std::setfill('0') << std::setw(2) << (i + 1) << ".csv";
      const std::string path = (fs::path(p.trace_dir) / name.str()).string();
      write_trace_csv(result.check_traces[i], path);
      outputs.push_back(path);
    }
  }

  std::cout << "certified rate: " << result.certified_rate << " bit/s/Hz in "
            << result.checks_performed << " checks\n";
  json params;
  params["scenario"] = p.scenario_path;
  params["s_min"] = p.s_min;
  params["s_max"] = p.s_max;
  params["s_ter"] = p.s_ter;
  params["warm_start"] = p.warm_start;
  params["solver_flags"] = p.flags.to_json();
  params["out"] = p.out_path;
  params["trace_dir"] = p.trace_dir;
  write_manifest("bisect", params, p.flags.seed, outputs, started,
                 {{p.scenario_path, file_fingerprint(p.scenario_path)}});
  return kExitFeasible;
}

// ---------------------------------------------------------------------------
// qos

struct QosParams {
  std::string scenario_path;
  double rate = 1.0;
  double power_cap_w = std::numeric_limits<double>::infinity();
  SolverFlags flags;
  std::string out_path;
  std::string trace_path;
};

int do_qos(const QosParams& p) {
  const std::string started = iso_timestamp();
  const Scenario scenario = load_scenario(p.scenario_path);
  SolverConfig cfg = p.flags.to_config();
  if (p.flags.kind() == SolverKind::Standard) {
    // Deterministic variant: every block is updated and the w-step is the
    // plain projection.
    cfg.alpha = 1.0;
    cfg.alpha_bar = 0.0;
  }
  const QosResult result = qos_min_power(scenario, p.rate, cfg, p.power_cap_w);
  std::cout << "verdict: " << to_string(result.verdict)
            << " (total power = " << result.total_power_w << " W, iterations = "
            << result.iterations << ")\n";

  std::vector<std::string> outputs;
  if (!p.out_path.empty()) {
    write_json_file(qos_result_to_json(scenario, result), p.out_path);
    outputs.push_back(p.out_path);
  }
  if (!p.trace_path.empty()) {
    write_trace_csv(result.trace, p.trace_path);
    outputs.push_back(p.trace_path);
  }
  if (!outputs.empty()) {
    json params;
    params["scenario"] = p.scenario_path;
    params["rate"] = p.rate;
    params["power_cap_w"] = std::isfinite(p.power_cap_w)
                                ? json(p.power_cap_w)
                                : json("inf");
    params["solver_flags"] = p.flags.to_json();
    params["out"] = p.out_path;
    params["trace"] = p.trace_path;
    write_manifest("qos", params, p.flags.seed, outputs, started,
                   {{p.scenario_path, file_fingerprint(p.scenario_path)}});
  }
  switch (result.verdict) {
    case Verdict::Feasible: return kExitFeasible;
    case Verdict::Infeasible: return kExitInfeasible;
    default: return kExitUndecided;
  }
}

// ---------------------------------------------------------------------------
// bench

struct BenchParams {
  std::string sweep_path;  // empty when sweep is inline (replay)
  json sweep_inline;
  std::string out_path;
  int jobs = 1;
};

struct BenchRow {
  int M = 0, N = 0, K = 0;
  double p_mw = 0.0;
  double alpha = 0.0;
  std::string solver;
  std::uint64_t seed = 0;
  bool failed = false;
  double certified_rate = 0.0;
  int checks = 0;
  long iters_total = 0;
  double setup_ms = 0.0;
  double solve_ms = 0.0;
};

int do_bench(const BenchParams& p) {
  const std::string started = iso_timestamp();
  const json sweep =
      p.sweep_path.empty() ? p.sweep_inline : read_json_file(p.sweep_path);
  if (!sweep.is_object() || !sweep.contains("schema") ||
      sweep.at("schema") != "cfmimo/bench_sweep/1") {
    throw std::invalid_argument("bench sweep: missing or unexpected schema field");
  }

  auto list_of = [&](const char* key, std::vector<double> fallback) {
    if (!sweep.contains(key)) return fallback;
    const json& v = sweep.at(key);
    if (v.is_number()) return std::vector<double>{v.get<double>()};
    return v.get<std::vector<double>>();
  };
  const std::vector<double> Ms = list_of("M", {4});
  const std::vector<double> Ns = list_of("N", {4});
  const std::vector<double> Ks = list_of("K", {8});
  const std::vector<double> powers_mw = list_of("p_mw", {10.0});
  const std::vector<double> alphas = list_of("alpha", {0.05});
  std::vector<std::string> solvers = {"standard", "randomized"};
  if (sweep.contains("solvers")) {
    solvers = sweep.at("solvers").get<std::vector<std::string>>();
  }
  std::vector<std::uint64_t> seeds = {1};
  if (sweep.contains("seeds")) {
    seeds = sweep.at("seeds").get<std::vector<std::uint64_t>>();
  } else if (sweep.contains("num_seeds")) {
    seeds.clear();
    for (std::uint64_t s = 1; s <= sweep.at("num_seeds").get<std::uint64_t>(); ++s) {
      seeds.push_back(s);
    }
  }

  BisectionConfig base;
  base.s_min = sweep.value("s_min", 0.0);
  base.s_max = sweep.value("s_max", 10.0);
  base.s_ter = sweep.value("s_ter", 0.01);
  base.solver_config.beta = sweep.value("beta", 1.0);
  base.solver_config.alpha_bar = sweep.value("alpha_bar", 0.01);
  base.solver_config.max_iter = sweep.value("max_iter", 5000);
  base.solver_config.opg_tol = sweep.value("opg_tol", 1e-10);
  base.solver_config.feas_tol = sweep.value("feas_tol", 1e-7);
  const std::string correlation = sweep.value("correlation", "local_scattering");

  std::vector<BenchRow> rows;
  for (double M : Ms)
    for (double N : Ns)
      for (double K : Ks)
        for (double p_mw : powers_mw)
          for (double alpha : alphas)
            for (const std::string& solver : solvers)
              for (std::uint64_t seed : seeds) {
                BenchRow row;
                row.M = static_cast<int>(M);
                row.N = static_cast<int>(N);
                row.K = static_cast<int>(K);
                row.p_mw = p_mw;
                row.alpha = alpha;
                row.solver = solver;
                row.seed = seed;
                rows.push_back(row);
              }

  // Cells are independent; a worker pool fills them in any order and the
  // rows are written back in sweep order. Each cell runs single-threaded.
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= rows.size()) return;
      BenchRow& row = rows[i];
      try {
        ScenarioConfig scfg;
        scfg.num_aps = row.M;
        scfg.antennas_per_ap = row.N;
        scfg.num_users = row.K;
        scfg.per_ap_power_w.assign(static_cast<std::size_t>(row.M),
                                   row.p_mw * 1e-3);
        scfg.correlation = correlation == "uncorrelated"
                               ? CorrelationModel::Uncorrelated
                               : CorrelationModel::LocalScattering;
        scfg.seed = row.seed;
        const Scenario scenario = generate_scenario(scfg);

        BisectionConfig cfg = base;
        cfg.solver = row.solver == "standard" ? SolverKind::Standard
                                              : SolverKind::Randomized;
        cfg.solver_config.alpha = row.alpha;
        cfg.solver_config.seed = row.seed;
        const MaxMinResult result = bisection_maxmin(scenario, cfg);

        row.certified_rate = result.certified_rate;
        row.checks = result.checks_performed;
        for (const CheckSummary& c : result.checks) row.iters_total += c.iterations;
        row.setup_ms = result.setup_ms;
        row.solve_ms = result.solve_ms;
      } catch (const std::exception& e) {
        row.failed = true;
        std::cerr << "bench cell failed (M=" << row.M << ",N=" << row.N
                  << ",K=" << row.K << ",solver=" << row.solver << "): " << e.what()
                  << "\n";
      }
    }
  };
  const int jobs = std::max(1, p.jobs);
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs - 1; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::ofstream out(p.out_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + p.out_path);
  out << "M,N,K,p_mw,alpha,solver,seed,certified_rate,checks,iters_total,setup_ms,"
         "solve_ms\n";
  out.precision(17);
  for (const BenchRow& row : rows) {
    out << row.M << "," << row.N << "," << row.K << "," << row.p_mw << ","
        << row.alpha << "," << row.solver << "," << row.seed << ",";
    if (row.failed) {
      out << "nan,0,0,nan,nan\n";
    } else {
      out << row.certified_rate << "," << row.checks << "," << row.iters_total << ","
          << row.setup_ms << "," << row.solve_ms << "\n";
    }
  }
  out.close();

  json params;
  params["sweep"] = sweep;
  params["out"] = p.out_path;
  params["jobs"] = p.jobs;
  write_manifest("bench", params, 0, {p.out_path}, started, json::object());
  std::cout << "wrote " << rows.size() << " rows to " << p.out_path << "\n";
  return kExitFeasible;
}

// ---------------------------------------------------------------------------
// replay

/// Wall-clock fields can never replay bit-identically; zero them before
/// comparing. Everything numerical must match exactly.
void scrub_volatile_json(json& j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "setup_ms" || it.key() == "solve_ms" || it.key() == "wall_ms" ||
          it.key() == "started_at" || it.key() == "finished_at") {
        *it = 0;
      } else {
        scrub_volatile_json(*it);
      }
    }
  } else if (j.is_array()) {
    for (auto& v : j) scrub_volatile_json(v);
  }
}

std::string scrub_volatile_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) return text;
  std::vector<std::string> columns;
  {
    std::istringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) columns.push_back(col);
  }
  std::vector<bool> volatile_col(columns.size(), false);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    volatile_col[i] = columns[i] == "wall_ms" || columns[i] == "setup_ms" ||
                      columns[i] == "solve_ms";
  }
  std::ostringstream out;
  out << header << "\n";
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string field;
    std::size_t i = 0;
    bool first = true;
    while (std::getline(ls, field, ',')) {
      if (!first) out << ",";
      out << (i < volatile_col.size() && volatile_col[i] ? "0" : field);
      first = false;
      ++i;
    }
    out << "\n";
  }
  return out.str();
}

bool outputs_match(const std::string& original, const std::string& replayed) {
  const fs::path path(original);
  if (path.extension() == ".json") {
    json a = read_json_file(original);
    json b = read_json_file(replayed);
    scrub_volatile_json(a);
    scrub_volatile_json(b);
    return a == b;
  }
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (path.extension() == ".csv") {
    return scrub_volatile_csv(slurp(original)) == scrub_volatile_csv(slurp(replayed));
  }
  return slurp(original) == slurp(replayed);
}

int do_replay(const std::string& manifest_path, std::string workdir) {
  const json manifest = read_json_file(manifest_path);
  if (!manifest.is_object() || manifest.value("schema", "") != "cfmimo/manifest/1") {
    throw std::invalid_argument("replay: not a manifest file");
  }
  const std::string command = manifest.at("command").get<std::string>();
  const json& params = manifest.at("params");
  if (workdir.empty()) {
    workdir = (fs::temp_directory_path() /
               ("cfmimo_replay_" + std::to_string(file_fingerprint(manifest_path))))
                  .string();
  }
  fs::create_directories(workdir);

  // Inputs must be unchanged for the replay to be meaningful.
  if (manifest.contains("input_hashes")) {
    for (auto it = manifest.at("input_hashes").begin();
         it != manifest.at("input_hashes").end(); ++it) {
      if (file_fingerprint(it.key()) != it.value().get<std::uint64_t>()) {
        std::cerr << "replay: input changed since the original run: " << it.key()
                  << "\n";
        return kExitError;
      }
    }
  }

  const auto original_outputs = manifest.at("outputs").get<std::vector<std::string>>();
  auto mapped = [&](const std::string& path) {
    return (fs::path(workdir) / fs::path(path).filename()).string();
  };

  if (command == "generate") {
    GenerateParams g;
    g.config_inline = params.at("config");
    g.out_path = mapped(params.at("out").get<std::string>());
    do_generate(g);
  } else if (command == "check") {
    CheckParams c;
    c.scenario_path = params.at("scenario").get<std::string>();
    c.rate = params.at("rate").get<double>();
    c.flags = SolverFlags::from_json(params.at("solver_flags"));
    if (!params.at("out").get<std::string>().empty()) {
      c.out_path = mapped(params.at("out").get<std::string>());
    }
    if (!params.at("trace").get<std::string>().empty()) {
      c.trace_path = mapped(params.at("trace").get<std::string>());
    }
    do_check(c);
  } else if (command == "bisect") {
    BisectParams b;
    b.scenario_path = params.at("scenario").get<std::string>();
    b.s_min = params.at("s_min").get<double>();
    b.s_max = params.at("s_max").get<double>();
    b.s_ter = params.at("s_ter").get<double>();
    b.warm_start = params.at("warm_start").get<bool>();
    b.flags = SolverFlags::from_json(params.at("solver_flags"));
    b.out_path = mapped(params.at("out").get<std::string>());
    if (!params.at("trace_dir").get<std::string>().empty()) {
      b.trace_dir = (fs::path(workdir) / "traces").string();
    }
    do_bisect(b);
  } else if (command == "qos") {
    QosParams q;
    q.scenario_path = params.at("scenario").get<std::string>();
    q.rate = params.at("rate").get<double>();
    q.power_cap_w = params.at("power_cap_w").is_string()
                        ? std::numeric_limits<double>::infinity()
                        : params.at("power_cap_w").get<double>();
    q.flags = SolverFlags::from_json(params.at("solver_flags"));
    if (!params.at("out").get<std::string>().empty()) {
      q.out_path = mapped(params.at("out").get<std::string>());
    }
    if (!params.at("trace").get<std::string>().empty()) {
      q.trace_path = mapped(params.at("trace").get<std::string>());
    }
    do_qos(q);
  } else if (command == "bench") {
    BenchParams b;
    b.sweep_inline = params.at("sweep");
    b.out_path = mapped(params.at("out").get<std::string>());
    b.jobs = params.at("jobs").get<int>();
    do_bench(b);
  } else {
    throw std::invalid_argument("replay: unknown command '" + command + "'");
  }

  bool all_match = true;
  for (const std::string& original : original_outputs) {
    const std::string replayed = mapped(original);
    const bool ok = fs::exists(replayed) && outputs_match(original, replayed);
    std::cout << (ok ? "  match : " : "  DIFFER: ") << original << "\n";
    all_match = all_match && ok;
  }
  std::cout << (all_match ? "replay identical" : "replay differs") << "\n";
  return all_match ? kExitFeasible : kExitInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"max-min fair beamforming solvers for cell-free massive MIMO"};
  app.set_version_flag("--version", kVersionString);
  app.require_subcommand(1);

  GenerateParams gen;
  std::uint64_t gen_seed = 0;
  auto* cmd_generate = app.add_subcommand("generate", "generate a channel scenario");
  cmd_generate->add_option("--config", gen.config_path, "scenario config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_generate->add_option("--out", gen.out_path, "output scenario JSON")->required();
  auto* seed_opt =
      cmd_generate->add_option("--seed", gen_seed, "override the config seed");

  CheckParams chk;
  auto* cmd_check = app.add_subcommand("check", "one feasibility check at a rate");
  cmd_check->add_option("scenario", chk.scenario_path, "scenario JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_check->add_option("--rate", chk.rate, "target rate in bit/s/Hz")->required();
  cmd_check->add_option("--out", chk.out_path, "result JSON");
  cmd_check->add_option("--trace", chk.trace_path, "convergence trace CSV");
  chk.flags.add_to(*cmd_check);

  BisectParams bis;
  auto* cmd_bisect = app.add_subcommand("bisect", "max-min rate via halving search");
  cmd_bisect->add_option("scenario", bis.scenario_path, "scenario JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_bisect->add_option("--s-min", bis.s_min, "initial lower rate");
  cmd_bisect->add_option("--s-max", bis.s_max, "initial upper rate");
  cmd_bisect->add_option("--s-ter", bis.s_ter, "bracket width at termination");
  cmd_bisect->add_flag("--warm-start", bis.warm_start,
                       "reuse the previous feasible iterate across checks");
  cmd_bisect->add_option("--out", bis.out_path, "result JSON")->required();
  cmd_bisect->add_option("--trace-dir", bis.trace_dir, "directory for per-check CSVs");
  bis.flags.add_to(*cmd_bisect);

  QosParams qos;
  auto* cmd_qos = app.add_subcommand("qos", "minimum power meeting a rate floor");
  cmd_qos->add_option("scenario", qos.scenario_path, "scenario JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_qos->add_option("--rate", qos.rate, "per-user rate floor in bit/s/Hz")
      ->required();
  cmd_qos->add_option("--power-cap", qos.power_cap_w,
                      "report infeasible when total power exceeds this (W)");
  cmd_qos->add_option("--out", qos.out_path, "result JSON");
  cmd_qos->add_option("--trace", qos.trace_path, "convergence trace CSV");
  qos.flags.add_to(*cmd_qos);

  BenchParams bench;
  auto* cmd_bench = app.add_subcommand("bench", "parameter sweep harness");
  cmd_bench->add_option("--sweep", bench.sweep_path, "sweep config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_bench->add_option("--out", bench.out_path, "aggregate CSV")->required();
  cmd_bench->add_option("--jobs", bench.jobs, "parallel sweep cells");

  std::string replay_manifest;
  std::string replay_workdir;
  auto* cmd_replay =
      app.add_subcommand("replay", "re-run a manifest and compare outputs");
  cmd_replay->add_option("manifest", replay_manifest, "manifest JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_replay->add_option("--workdir", replay_workdir, "directory for replayed outputs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_generate->parsed()) {
      if (seed_opt->count() > 0) gen.seed_override = gen_seed;
      return do_generate(gen);
    }
    if (cmd_check->parsed()) return do_check(chk);
    if (cmd_bisect->parsed()) return do_bisect(bis);
    if (cmd_qos->parsed()) return do_qos(qos);
    if (cmd_bench->parsed()) return do_bench(bench);
    if (cmd_replay->parsed()) return do_replay(replay_manifest, replay_workdir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
