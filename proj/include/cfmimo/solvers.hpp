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
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/lifting.hpp"

namespace cfmimo {

struct SolverConfig {
  double beta = 1.0;       ///< augmented-Lagrangian penalty
  double alpha = 0.05;     ///< per-block selection probability, (0, 1]
  double alpha_bar = 0.01; ///< proximal weight of the randomized w-step, >= 0
  int max_iter = 5000;
  double opg_tol = 1e-10;  ///< stop when ||v^t - v^{t-1}|| falls below this
  double feas_tol = 1e-7;  ///< objective threshold, scaled by (1 + ||b||^2)
  std::uint64_t seed = 0;
  /// When set, reject parameters violating alpha*alpha_bar >= 1/alpha^2 - 1,
  /// the sufficient condition of the convergence analysis. Off by default:
  /// the bound is far more conservative than what works in practice.
  bool theory_mode = false;
  bool record_ergodic = false;  ///< keep per-iteration snapshots (memory-heavy)
  int threads = 1;

  void validate() const;
};

enum class Verdict { Feasible, Infeasible, Undecided };
enum class StopReason { OpgTol, MaxIter };

const char* to_string(Verdict verdict);
const char* to_string(StopReason reason);

struct IterRecord {
  int iter = 0;
  double f_value = 0.0;
  double opg = 0.0;
  double primal_residual = 0.0;
  double wall_ms = 0.0;
};

/// Optional per-iteration snapshots for the ergodic diagnostics.
struct IterateSnapshots {
  std::vector<Eigen::VectorXd> v;
  std::vector<Eigen::VectorXd> w;
  std::vector<Eigen::VectorXd> tau;  // running sum A v at the same iteration
};

struct ConvergenceTrace {
  std::vector<IterRecord> records;
  IterateSnapshots snapshots;  // populated only with record_ergodic
};

/// CSV with header iter,f_value,opg,primal_residual,wall_ms.
void write_trace_csv(const ConvergenceTrace& trace, const std::string& path);

struct SolveOutcome {
  Verdict verdict = Verdict::Undecided;
  double final_f = 0.0;
  int iterations = 0;
  StopReason stop_reason = StopReason::MaxIter;
  std::vector<std::complex<double>> beamformers;  // K x M x N, user-major
  ConvergenceTrace trace;
  /// Uniform down-scaling applied afterwards to meet the power budgets
  /// exactly (1.0 when untouched); set by the driver.
  double power_scale = 1.0;
  /// QoS mode only: sum ||v_i||^2 per iteration and at exit.
  std::vector<double> power_trace;
  double final_power = 0.0;
};

/// Read-only view of the solver state handed to observers after each
/// iteration (used by tests and diagnostics; never affects the iterates).
struct IterationView {
  int iter = 0;
  const Eigen::VectorXd& v;
  const Eigen::VectorXd& w;
  const Eigen::VectorXd& lambda;
  const Eigen::VectorXd& tau;
  const std::vector<std::uint8_t>& selected;  // per-block update flags
  bool w_step_done = true;  // false on the stopping iteration
};
using IterationObserver = std::function<void(const IterationView&)>;

/// Full-update ADMM: every block least-squares solve runs each iteration,
/// the w-step is the blockwise distance prox with weight beta, and the dual
/// ascends with step beta. Serves as the reference the randomized solver
/// degenerates to at alpha = 1, alpha_bar = 0.
SolveOutcome standard_admm(const LiftedProblem& problem, const WoodburyFactors& factors,
                           const SolverConfig& config,
                           const IterationObserver& observer = {},
                           const Eigen::VectorXd* initial_v = nullptr);

/// Randomized ADMM: each block is updated independently with probability
/// alpha; the w-step solves the alpha-weighted subproblem with an extra
/// alpha_bar proximal term (a prox at a convex combination of the current
/// splitting point and the previous w), and the dual step is damped by
/// alpha. The running sum of A_j v_j is maintained incrementally over the
/// selected blocks only.
SolveOutcome randomized_admm(const LiftedProblem& problem,
                             const WoodburyFactors& factors, const SolverConfig& config,
                             const IterationObserver& observer = {},
                             const Eigen::VectorXd* initial_v = nullptr);

/// Minimum-power mode on the cones-only problem: block solves carry a
/// 2/beta ridge from the power objective, and the w-step is an exact
/// projection. Block selection and the damped dual follow the randomized
/// scheme; alpha = 1, alpha_bar = 0 gives the deterministic variant.
SolveOutcome qos_admm(const LiftedProblem& problem, const SolverConfig& config,
                      double power_cap = std::numeric_limits<double>::infinity(),
                      const IterationObserver& observer = {});

/// Weighted ergodic averages of the iterates and their objective/residual
/// sequences, one entry per iteration count. Requires snapshots.
struct ErgodicDiagnostics {
  std::vector<double> f_values;          // f at the averaged splitting point
  std::vector<double> primal_residuals;  // ||A v_avg + b - w_avg||
  Eigen::VectorXd w_average;             // final averages
  Eigen::VectorXd v_average;
};
ErgodicDiagnostics ergodic_diagnostics(const LiftedProblem& problem,
                                       const IterateSnapshots& snapshots, double alpha);

}  // namespace cfmimo
