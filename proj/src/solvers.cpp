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

#include "cfmimo/solvers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {

constexpr int kRunningSumRefresh = 500;  // iterations between tau rebuilds
constexpr Eigen::Index kSnapshotGate = 25'000'000;  // doubles; ~200 MB

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Scratch shared by the iteration loops; one block-solve workspace per
/// thread so parallel block updates never share buffers.
struct EngineWork {
  Eigen::VectorXd v, w, lambda, tau;
  Eigen::VectorXd residual, splitting_point, combo, tvec, tau_fresh;
  Eigen::VectorXd block_sq_delta;  // per-block ||delta v_j||^2
  std::vector<BlockSolveScratch> scratch;
  std::vector<Eigen::VectorXd> new_block;  // per-thread solve output
  std::vector<Eigen::VectorXd> delta;      // per-thread v_j change
  std::vector<std::uint8_t> selected;

  EngineWork(const LiftedProblem& p, const SolverConfig& cfg,
             const Eigen::VectorXd* initial_v) {
    const int threads = std::max(cfg.threads, 1);
    v = Eigen::VectorXd::Zero(p.vtotal());
    if (initial_v != nullptr) {
      if (initial_v->size() != p.vtotal()) {
        throw std::invalid_argument("solver: initial iterate length mismatch");
      }
      v = *initial_v;
    }
    w = Eigen::VectorXd::Zero(p.rows());
    lambda = Eigen::VectorXd::Zero(p.rows());
    tau = Eigen::VectorXd::Zero(p.rows());
    if (initial_v != nullptr) apply_all_blocks_into(p, v, tau);
    residual.resize(p.rows());
    splitting_point.resize(p.rows());
    combo.resize(p.rows());
    tvec.resize(p.rows());
    tau_fresh.resize(p.rows());
    block_sq_delta = Eigen::VectorXd::Zero(p.K);
    scratch.resize(threads);
    new_block.resize(threads);
    delta.resize(threads);
    for (int t = 0; t < threads; ++t) {
      scratch[t].resize(p);
      new_block[t].resize(p.vdim());
      delta[t].resize(p.vdim());
    }
    selected.assign(static_cast<std::size_t>(p.K), 1);
  }
};

/// Least-squares update of the selected blocks; maintains the running sum
/// incrementally and returns ||v^t - v^{t-1}||. Blocks own disjoint rows of
/// tau, so the loop parallelizes without atomics.
double update_selected_blocks(const LiftedProblem& p, const WoodburyFactors& f,
                              EngineWork& work, const ExecPolicy& exec) {
  work.block_sq_delta.setZero();
  parallel_for(exec, p.K, [&](std::ptrdiff_t j, int tid) {
    if (!work.selected[static_cast<std::size_t>(j)]) return;
    auto v_j = work.v.segment(j * p.vdim(), p.vdim());
    solve_block_ls_into(p, f, static_cast<int>(j), work.residual, work.new_block[tid],
                        work.scratch[tid]);
    work.delta[tid] = work.new_block[tid] - v_j;
    work.block_sq_delta(j) = work.delta[tid].squaredNorm();
    v_j = work.new_block[tid];
    apply_block_add(p, static_cast<int>(j), work.delta[tid], work.tau);
  });
  // Serial sum in block order keeps the value thread-count independent.
  return std::sqrt(work.block_sq_delta.sum());
}

void refresh_running_sum(const LiftedProblem& p, EngineWork& work,
                         const ExecPolicy& exec) {
  apply_all_blocks_into(p, work.v, work.tau_fresh, exec);
  const double drift = (work.tau - work.tau_fresh).norm();
  if (!(drift <= 1e-9 * (1.0 + work.tau_fresh.norm()))) {
    throw std::logic_error("solver: running sum drifted from sum_j A_j v_j");
  }
  work.tau.swap(work.tau_fresh);
}

void check_finite(double opg, double f_now, double beta) {
  if (!std::isfinite(opg) || !std::isfinite(f_now)) {
    throw std::runtime_error("solver diverged: non-finite iterate (beta = " +
                             std::to_string(beta) + ")");
  }
}

Verdict decide_verdict(const LiftedProblem& p, const SolverConfig& cfg, double final_f,
                       StopReason reason, const std::vector<IterRecord>& records) {
  const double threshold = cfg.feas_tol * (1.0 + p.b.squaredNorm());
  if (final_f <= threshold) return Verdict::Feasible;
  if (reason == StopReason::MaxIter && records.size() > 100) {
    // Still descending by more than 1% per 100 iterations: call it undecided
    // rather than misclassifying slow convergence.
    const double before = records[records.size() - 101].f_value;
    const double now = records.back().f_value;
    if (now < 0.99 * before) return Verdict::Undecided;
  }
  return Verdict::Infeasible;
}

void maybe_snapshot(const LiftedProblem& p, const SolverConfig& cfg, EngineWork& work,
                    ConvergenceTrace& trace) {
  if (!cfg.record_ergodic) return;
  const auto per_iter = static_cast<std::size_t>(p.rows() * 2 + p.vtotal());
  if (per_iter * (trace.snapshots.w.size() + 1) >
      static_cast<std::size_t>(kSnapshotGate)) {
    throw std::runtime_error("record_ergodic: instance too large for snapshots");
  }
  trace.snapshots.v.push_back(work.v);
  trace.snapshots.w.push_back(work.w);
  trace.snapshots.tau.push_back(work.tau);
}

SolveOutcome finish(const LiftedProblem& p, const SolverConfig& cfg, EngineWork& work,
                    ConvergenceTrace&& trace, double final_f, int iterations,
                    StopReason reason) {
  SolveOutcome out;
  out.verdict = decide_verdict(p, cfg, final_f, reason, trace.records);
  out.final_f = final_f;
  out.iterations = iterations;
  out.stop_reason = reason;
  out.beamformers = reconstruct_beamformers(p.M, p.N, p.K, work.v);
  out.trace = std::move(trace);
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta: must be finite and > 0");
  }
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("alpha: must lie in (0, 1]");
  }
  if (!(alpha_bar >= 0.0) || !std::isfinite(alpha_bar)) {
    throw std::invalid_argument("alpha_bar: must be finite and >= 0");
  }
  if (max_iter < 1) throw std::invalid_argument("max_iter: must be >= 1");
  if (!(opg_tol >= 0.0)) throw std::invalid_argument("opg_tol: must be >= 0");
  if (!(feas_tol > 0.0)) throw std::invalid_argument("feas_tol: must be > 0");
  if (threads < 1) throw std::invalid_argument("threads: must be >= 1");
  if (theory_mode && alpha * alpha_bar < 1.0 / (alpha * alpha) - 1.0) {
    throw std::invalid_argument(
        "theory_mode: requires alpha*alpha_bar >= 1/alpha^2 - 1");
  }
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Feasible: return "feasible";
    case Verdict::Infeasible: return "infeasible";
    default: return "undecided";
  }
}

const char* to_string(StopReason reason) {
  return reason == StopReason::OpgTol ? "opg_tol" : "max_iter";
}

void write_trace_csv(const ConvergenceTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "iter,f_value,opg,primal_residual,wall_ms\n";
  out.precision(17);
  for (const IterRecord& r : trace.records) {
    out << r.iter << "," << r.f_value << "," << r.opg << "," << r.primal_residual << ","
        << r.wall_ms << "\n";
  }
}

SolveOutcome standard_admm(const LiftedProblem& problem, const WoodburyFactors& factors,
                           const SolverConfig& config, const IterationObserver& observer,
                           const Eigen::VectorXd* initial_v) {
  config.validate();
  const ExecPolicy exec{config.threads};
  EngineWork work(problem, config, initial_v);
  ConvergenceTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.max_iter));

  const double inv_beta = 1.0 / config.beta;
  double final_f = 0.0;
  int t = 0;
  StopReason reason = StopReason::MaxIter;
  for (t = 1; t <= config.max_iter; ++t) {
    const auto tic = Clock::now();
    if (t % kRunningSumRefresh == 0) refresh_running_sum(problem, work, exec);

    work.residual = problem.b - work.w + inv_beta * work.lambda;
    const double opg = update_selected_blocks(problem, factors, work, exec);

    work.tvec = work.tau + problem.b;
    final_f = f_value(work.tvec, problem.layout, exec);
    check_finite(opg, final_f, config.beta);

    // The very first step from a cold start cannot move v (the offset
    // lives in rows outside every block); arm the opg stop from t = 2.
    const bool stopping = (t > 1 && opg <= config.opg_tol) || t == config.max_iter;
    trace.records.push_back({t, final_f, opg, (work.tvec - work.w).norm(),
                             elapsed_ms(tic)});
    if (stopping) {
      // The output is v^t; the trailing w/dual updates would not change it.
      if (observer) observer({t, work.v, work.w, work.lambda, work.tau, work.selected,
                              false});
      reason = opg <= config.opg_tol ? StopReason::OpgTol : StopReason::MaxIter;
      break;
    }

    work.splitting_point = work.tvec + inv_beta * work.lambda;
    parallel_for(exec, static_cast<std::ptrdiff_t>(problem.layout.blocks.size()),
                 [&](std::ptrdiff_t i, int) {
                   const ConeBlock& blk = problem.layout.blocks[static_cast<std::size_t>(i)];
                   prox_distance_span(work.splitting_point.data() + blk.offset,
                                      work.w.data() + blk.offset, blk.length, blk.kind,
                                      blk.radius, config.beta);
                 });
    work.lambda += config.beta * (work.tvec - work.w);

    maybe_snapshot(problem, config, work, trace);
    if (observer) observer({t, work.v, work.w, work.lambda, work.tau, work.selected,
                            true});
    trace.records.back().wall_ms = elapsed_ms(tic);
  }
  return finish(problem, config, work, std::move(trace), final_f, std::min(t, config.max_iter),
                reason);
}

SolveOutcome randomized_admm(const LiftedProblem& problem,
                             const WoodburyFactors& factors, const SolverConfig& config,
                             const IterationObserver& observer,
                             const Eigen::VectorXd* initial_v) {
  config.validate();
  const ExecPolicy exec{config.threads};
  EngineWork work(problem, config, initial_v);
  ConvergenceTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.max_iter));
  Rng rng(config.seed);

  const double inv_beta = 1.0 / config.beta;
  const double inv_alpha_beta = 1.0 / (config.alpha * config.beta);
  const double combo_new = config.alpha / (config.alpha + config.alpha_bar);
  const double combo_old = config.alpha_bar / (config.alpha + config.alpha_bar);
  const double prox_weight = (config.alpha + config.alpha_bar) * config.beta;
  const double dual_step = config.alpha * config.beta;

  double final_f = 0.0;
  int t = 0;
  StopReason reason = StopReason::MaxIter;
  for (t = 1; t <= config.max_iter; ++t) {
    const auto tic = Clock::now();
    if (t % kRunningSumRefresh == 0) refresh_running_sum(problem, work, exec);

    // Independent Bernoulli(alpha) selection per block, drawn in block order.
    for (int j = 0; j < problem.K; ++j) {
      work.selected[static_cast<std::size_t>(j)] = rng.uniform01() < config.alpha;
    }

    work.residual = problem.b - work.w + inv_beta * work.lambda;
    const double opg = update_selected_blocks(problem, factors, work, exec);

    work.tvec = work.tau + problem.b;
    final_f = f_value(work.tvec, problem.layout, exec);
    check_finite(opg, final_f, config.beta);

    // The very first step from a cold start cannot move v (the offset
    // lives in rows outside every block); arm the opg stop from t = 2.
    const bool stopping = (t > 1 && opg <= config.opg_tol) || t == config.max_iter;
    trace.records.push_back({t, final_f, opg, (work.tvec - work.w).norm(),
                             elapsed_ms(tic)});
    if (stopping) {
      if (observer) observer({t, work.v, work.w, work.lambda, work.tau, work.selected,
                              false});
      reason = opg <= config.opg_tol ? StopReason::OpgTol : StopReason::MaxIter;
      break;
    }

    // w-step: blockwise prox at a convex combination of the splitting point
    // and the previous w, with the combined weight.
    work.splitting_point = work.tvec + inv_alpha_beta * work.lambda;
    work.combo = combo_new * work.splitting_point + combo_old * work.w;
    parallel_for(exec, static_cast<std::ptrdiff_t>(problem.layout.blocks.size()),
                 [&](std::ptrdiff_t i, int) {
                   const ConeBlock& blk = problem.layout.blocks[static_cast<std::size_t>(i)];
                   prox_distance_span(work.combo.data() + blk.offset,
                                      work.w.data() + blk.offset, blk.length, blk.kind,
                                      blk.radius, prox_weight);
                 });
    // Damped dual ascent; equals the merged two-stage multiplier update.
    work.lambda += dual_step * (work.tvec - work.w);

    maybe_snapshot(problem, config, work, trace);
    if (observer) observer({t, work.v, work.w, work.lambda, work.tau, work.selected,
                            true});
    trace.records.back().wall_ms = elapsed_ms(tic);
  }
  return finish(problem, config, work, std::move(trace), final_f, std::min(t, config.max_iter),
                reason);
}

SolveOutcome qos_admm(const LiftedProblem& problem, const SolverConfig& config,
                      double power_cap, const IterationObserver& observer) {
  config.validate();
  if (problem.with_power_blocks) {
    throw std::invalid_argument("qos_admm: expects the cones-only problem");
  }
  const ExecPolicy exec{config.threads};
  // The power objective adds a 2/beta ridge to every block normal matrix.
  const WoodburyFactors factors =
      WoodburyFactors::build(problem, 2.0 / config.beta);
  EngineWork work(problem, config, nullptr);
  ConvergenceTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.max_iter));
  Rng rng(config.seed);

  const double inv_beta = 1.0 / config.beta;
  const double inv_alpha_beta = 1.0 / (config.alpha * config.beta);
  const double combo_new = config.alpha / (config.alpha + config.alpha_bar);
  const double combo_old = config.alpha_bar / (config.alpha + config.alpha_bar);
  const double dual_step = config.alpha * config.beta;

  SolveOutcome out;
  out.power_trace.reserve(static_cast<std::size_t>(config.max_iter));

  double final_f = 0.0;
  double power = 0.0;
  bool cap_exceeded = false;
  int t = 0;
  StopReason reason = StopReason::MaxIter;
  for (t = 1; t <= config.max_iter; ++t) {
    const auto tic = Clock::now();
    if (t % kRunningSumRefresh == 0) refresh_running_sum(problem, work, exec);

    for (int j = 0; j < problem.K; ++j) {
      work.selected[static_cast<std::size_t>(j)] = rng.uniform01() < config.alpha;
    }

    work.residual = problem.b - work.w + inv_beta * work.lambda;
    const double opg = update_selected_blocks(problem, factors, work, exec);

    work.tvec = work.tau + problem.b;
    final_f = f_value(work.tvec, problem.layout, exec);
    power = work.v.squaredNorm();
    check_finite(opg, final_f + power, config.beta);
    out.power_trace.push_back(power);

    const bool stopping = (t > 1 && opg <= config.opg_tol) ||
                          t == config.max_iter || power > power_cap;
    trace.records.push_back({t, final_f, opg, (work.tvec - work.w).norm(),
                             elapsed_ms(tic)});
    if (stopping) {
      if (observer) observer({t, work.v, work.w, work.lambda, work.tau, work.selected,
                              false});
      cap_exceeded = power > power_cap;
      reason = opg <= config.opg_tol ? StopReason::OpgTol : StopReason::MaxIter;
      break;
    }

    // Exact projection of the combined point: the constraint set enters the
    // w-subproblem as an indicator here, not a squared distance.
    work.splitting_point = work.tvec + inv_alpha_beta * work.lambda;
    work.combo = combo_new * work.splitting_point + combo_old * work.w;
    project_D_into(work.combo, problem.layout, work.w, exec);
    work.lambda += dual_step * (work.tvec - work.w);

    maybe_snapshot(problem, config, work, trace);
    if (observer) observer({t, work.v, work.w, work.lambda, work.tau, work.selected,
                            true});
    trace.records.back().wall_ms = elapsed_ms(tic);
  }

  out.final_f = final_f;
  out.final_power = power;
  out.iterations = std::min(t, config.max_iter);
  out.stop_reason = reason;
  out.beamformers = reconstruct_beamformers(problem.M, problem.N, problem.K, work.v);
  out.trace = std::move(trace);
  if (cap_exceeded) {
    out.verdict = Verdict::Infeasible;
  } else if (reason == StopReason::OpgTol) {
    out.verdict = Verdict::Feasible;
  } else {
    out.verdict = Verdict::Undecided;
  }
  return out;
}

ErgodicDiagnostics ergodic_diagnostics(const LiftedProblem& problem,
                                       const IterateSnapshots& snapshots, double alpha) {
  const std::size_t total = snapshots.w.size();
  if (total == 0 || snapshots.v.size() != total || snapshots.tau.size() != total) {
    throw std::invalid_argument("ergodic_diagnostics: iterate snapshots absent");
  }
  ErgodicDiagnostics diag;
  diag.f_values.reserve(total);
  diag.primal_residuals.reserve(total);

  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(problem.rows());
  Eigen::VectorXd tau_sum = Eigen::VectorXd::Zero(problem.rows());
  Eigen::VectorXd v_sum = Eigen::VectorXd::Zero(problem.vtotal());
  Eigen::VectorXd w_avg, tau_avg, v_avg;
  for (std::size_t t = 1; t <= total; ++t) {
    const double denom = 1.0 + alpha * static_cast<double>(t - 1);
    w_avg = (snapshots.w[t - 1] + alpha * w_sum) / denom;
    tau_avg = (snapshots.tau[t - 1] + alpha * tau_sum) / denom;
    v_avg = (snapshots.v[t - 1] + alpha * v_sum) / denom;
    diag.f_values.push_back(f_value(w_avg, problem.layout));
    diag.primal_residuals.push_back((tau_avg + problem.b - w_avg).norm());
    w_sum += snapshots.w[t - 1];
    tau_sum += snapshots.tau[t - 1];
    v_sum += snapshots.v[t - 1];
  }
  diag.w_average = std::move(w_avg);
  diag.v_average = std::move(v_avg);
  return diag;
}

}  // namespace cfmimo
