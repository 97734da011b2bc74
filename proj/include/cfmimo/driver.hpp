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

#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include "cfmimo/scenario.hpp"
#include "cfmimo/solvers.hpp"

namespace cfmimo {

enum class SolverKind { Standard, Randomized };

const char* to_string(SolverKind kind);

struct BisectionConfig {
  double s_min = 0.0;   // bit/s/Hz
  double s_max = 10.0;  // bit/s/Hz
  double s_ter = 0.01;  // terminate when the bracket is this narrow
  SolverKind solver = SolverKind::Randomized;
  SolverConfig solver_config;
  /// Start each check from the previous feasible iterate instead of zero.
  bool warm_start = false;
  /// Retain the full per-check convergence traces in the result.
  bool keep_traces = false;

  void validate() const;
};

struct CheckSummary {
  double s_c = 0.0;
  Verdict verdict = Verdict::Undecided;
  int iterations = 0;
  double final_f = 0.0;
  StopReason stop_reason = StopReason::MaxIter;
  double setup_ms = 0.0;
  double solve_ms = 0.0;
};

struct MaxMinResult {
  double s_min = 0.0;  // bracket at exit
  double s_max = 0.0;
  double certified_rate = 0.0;  // last target certified feasible
  std::vector<std::complex<double>> beamformers;  // at the certified rate
  Eigen::VectorXd per_user_rates;
  Eigen::VectorXd per_ap_power_w;
  /// Certified rate minus this bound lower-bounds every user's achieved
  /// rate; derived from the final objective of the certifying check.
  double rate_slack = 0.0;
  int checks_performed = 0;
  /// Every check came back feasible: the optimum sits above the initial
  /// bracket, which is reported rather than silently extended.
  bool upper_bracket_saturated = false;
  std::vector<CheckSummary> checks;
  std::vector<ConvergenceTrace> check_traces;  // filled with keep_traces
  double setup_ms = 0.0;
  double solve_ms = 0.0;
};

struct QosResult {
  double s_c = 0.0;
  Verdict verdict = Verdict::Undecided;
  double total_power_w = 0.0;
  std::vector<std::complex<double>> beamformers;
  Eigen::VectorXd per_user_rates;
  int iterations = 0;
  StopReason stop_reason = StopReason::MaxIter;
  ConvergenceTrace trace;
  std::vector<double> power_trace;
  double setup_ms = 0.0;
  double solve_ms = 0.0;
};

/// Converts a bound on the feasibility objective into a rate shortfall: a
/// certified point with objective f may miss the target rate by at most
/// this many bit/s/Hz (power_scale is the uniform shrink applied to meet
/// the power budgets exactly).
double rate_slack_bound(double s_c, double final_f, double power_scale);

/// One feasibility check at a target rate. Rates at or below zero are
/// trivially met by the all-zero beamformer and return immediately. The
/// lifted problem is solved in noise- and power-normalized units; returned
/// beamformers are de-normalized and uniformly shrunk to meet every power
/// budget exactly.
SolveOutcome check_feasibility(const Scenario& scenario, double s_c, SolverKind kind,
                               const SolverConfig& config);

/// Halving search over the target rate. Feasible checks raise the lower
/// end, anything else lowers the upper end; the beamformers of the last
/// feasible check are retained.
MaxMinResult bisection_maxmin(const Scenario& scenario, const BisectionConfig& config);

/// Closed-form single-user optimum: per-AP powers saturated with phase
/// aligned maximum-ratio transmission, log2(1 + (sum_m sqrt(p_m) ||h[m]||)^2
/// / sigma^2). Requires K = 1.
double single_user_oracle(const Scenario& scenario);

/// Minimum total transmit power meeting a per-user rate floor. Infeasible
/// targets surface as unbounded power growth past power_cap_w.
QosResult qos_min_power(const Scenario& scenario, double s_c, const SolverConfig& config,
                        double power_cap_w = std::numeric_limits<double>::infinity());

}  // namespace cfmimo
