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
//
// The threaded kernels only ever write disjoint slices and all reductions
// are accumulated serially, so every multi-threaded run must reproduce the
// single-threaded reference bit for bit.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfmimo/driver.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/solvers.hpp"

using namespace cfmimo;

namespace {

Scenario make_scenario(int M, int N, int K, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.num_aps = M;
  cfg.antennas_per_ap = N;
  cfg.num_users = K;
  cfg.per_ap_power_w.assign(static_cast<std::size_t>(M), 0.01);
  cfg.seed = seed;
  return generate_scenario(cfg);
}

bool bit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("blockwise projection matches the serial path exactly") {
  const Scenario sc = make_scenario(3, 2, 5, 1);
  const LiftedProblem p = build_problem(sc, 1.0);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd w(p.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    const Eigen::VectorXd serial = project_D(w, p.layout, ExecPolicy{1});
    const Eigen::VectorXd threaded = project_D(w, p.layout, ExecPolicy{4});
    CHECK(bit_equal(serial, threaded));
    CHECK(f_value(w, p.layout, ExecPolicy{1}) == f_value(w, p.layout, ExecPolicy{4}));
  }
}

TEST_CASE("block image matches the serial path exactly") {
  const Scenario sc = make_scenario(3, 2, 6, 3);
  const LiftedProblem p = build_problem(sc, 1.4);
  Rng rng(4);
  Eigen::VectorXd v(p.vtotal());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  Eigen::VectorXd serial(p.rows()), threaded(p.rows());
  apply_all_blocks_into(p, v, serial, ExecPolicy{1});
  apply_all_blocks_into(p, v, threaded, ExecPolicy{4});
  CHECK(bit_equal(serial, threaded));
}

TEST_CASE("solvers are thread-count invariant") {
  const Scenario sc = make_scenario(2, 2, 6, 5);
  for (const SolverKind kind : {SolverKind::Standard, SolverKind::Randomized}) {
    SolverConfig cfg;
    cfg.max_iter = 400;
    cfg.seed = 9;
    cfg.threads = 1;
    const SolveOutcome serial = check_feasibility(sc, 0.05, kind, cfg);
    cfg.threads = 4;
    const SolveOutcome threaded = check_feasibility(sc, 0.05, kind, cfg);
    CHECK(serial.verdict == threaded.verdict);
    CHECK(serial.final_f == threaded.final_f);
    CHECK(serial.iterations == threaded.iterations);
    REQUIRE(serial.beamformers.size() == threaded.beamformers.size());
    for (std::size_t i = 0; i < serial.beamformers.size(); ++i) {
      CHECK(serial.beamformers[i] == threaded.beamformers[i]);
    }
  }
}

TEST_CASE("qos solver is thread-count invariant") {
  const Scenario sc = make_scenario(2, 2, 4, 6);
  SolverConfig cfg;
  cfg.seed = 3;
  cfg.threads = 1;
  const QosResult serial = qos_min_power(sc, 0.4, cfg);
  cfg.threads = 4;
  const QosResult threaded = qos_min_power(sc, 0.4, cfg);
  CHECK(serial.total_power_w == threaded.total_power_w);
  CHECK(serial.iterations == threaded.iterations);
  CHECK(bit_equal(serial.per_user_rates, threaded.per_user_rates));
}
