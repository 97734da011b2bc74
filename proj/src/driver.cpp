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

#include "cfmimo/driver.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cfmimo {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// The solver tolerances assume O(1) data. Rescaling channels by
/// sqrt(p_max)/sigma_k and beamformers by 1/sqrt(p_max) keeps every SINR
/// and therefore the feasible set unchanged while moving the noise levels
/// to 1 and the power budgets to at most 1.
struct NormalizedScenario {
  Scenario scenario;
  double p_max = 1.0;
};

NormalizedScenario normalize(const Scenario& original) {
  NormalizedScenario out;
  out.scenario = original;
  Scenario& sc = out.scenario;
  sc.config = original.config.resolved();

  out.p_max = 0.0;
  for (double p : sc.config.per_ap_power_w) out.p_max = std::max(out.p_max, p);
  const double sqrt_p = std::sqrt(out.p_max);

  const int M = sc.num_aps();
  const int N = sc.antennas_per_ap();
  const int K = sc.num_users();
  for (int k = 0; k < K; ++k) {
    const double scale = sqrt_p / std::sqrt(original.noise_power_w(k));
    sc.channels.segment(static_cast<Eigen::Index>(k) * M * N, static_cast<Eigen::Index>(M) * N) *=
        scale;
    sc.noise_power_w(k) = 1.0;
  }
  for (double& p : sc.config.per_ap_power_w) p /= out.p_max;
  return out;
}

SolveOutcome trivially_feasible(const Scenario& scenario) {
  const ScenarioConfig cfg = scenario.config.resolved();
  SolveOutcome out;
  out.verdict = Verdict::Feasible;
  out.final_f = 0.0;
  out.iterations = 0;
  out.stop_reason = StopReason::OpgTol;
  out.beamformers.assign(static_cast<std::size_t>(cfg.num_users) * cfg.num_aps *
                             cfg.antennas_per_ap,
                         {0.0, 0.0});
  return out;
}

SolveOutcome run_kind(const LiftedProblem& problem, const WoodburyFactors& factors,
                      SolverKind kind, const SolverConfig& config,
                      const Eigen::VectorXd* initial_v) {
  if (kind == SolverKind::Standard) {
    return standard_admm(problem, factors, config, {}, initial_v);
  }
  return randomized_admm(problem, factors, config, {}, initial_v);
}

/// De-normalizes the solver iterate and shrinks it uniformly so every AP
/// meets its budget exactly; shrinking only lowers rates, which the slack
/// bound accounts for.
void denormalize_and_clamp(const Scenario& original, const NormalizedScenario& norm,
                           SolveOutcome& outcome) {
  const double sqrt_p = std::sqrt(norm.p_max);
  for (auto& c : outcome.beamformers) c *= sqrt_p;
  const ScenarioConfig cfg = original.config.resolved();
  const Eigen::VectorXd powers = per_ap_powers(original, outcome.beamformers);
  double clamp = 1.0;
  for (int m = 0; m < cfg.num_aps; ++m) {
    if (powers(m) > cfg.per_ap_power_w[static_cast<std::size_t>(m)]) {
      clamp = std::min(
          clamp, std::sqrt(cfg.per_ap_power_w[static_cast<std::size_t>(m)] / powers(m)));
    }
  }
  if (clamp < 1.0) {
    for (auto& c : outcome.beamformers) c *= clamp;
  }
  outcome.power_scale = clamp;
}

SolveOutcome check_feasibility_impl(const Scenario& original,
                                    const NormalizedScenario& norm, double s_c,
                                    SolverKind kind, const SolverConfig& config,
                                    const BaseGram* base, const Eigen::VectorXd* warm,
                                    double* setup_ms, double* solve_ms) {
  const auto setup_tic = Clock::now();
  const LiftedProblem problem = build_problem(norm.scenario, s_c);
  const WoodburyFactors factors = WoodburyFactors::build(problem, 1.0, base);
  if (setup_ms != nullptr) *setup_ms = elapsed_ms(setup_tic);

  const auto solve_tic = Clock::now();
  SolveOutcome outcome = run_kind(problem, factors, kind, config, warm);
  if (solve_ms != nullptr) *solve_ms = elapsed_ms(solve_tic);

  denormalize_and_clamp(original, norm, outcome);
  return outcome;
}

}  // namespace

const char* to_string(SolverKind kind) {
  return kind == SolverKind::Standard ? "standard" : "randomized";
}

void BisectionConfig::validate() const {
  if (!(s_min >= 0.0) || !std::isfinite(s_min)) {
    throw std::invalid_argument("s_min: must be finite and >= 0");
  }
  if (!(s_max > s_min) || !std::isfinite(s_max)) {
    throw std::invalid_argument("s_max: must be finite and > s_min");
  }
  if (!(s_ter > 0.0)) throw std::invalid_argument("s_ter: must be > 0");
  solver_config.validate();
}

double rate_slack_bound(double s_c, double final_f, double power_scale) {
  if (s_c <= 0.0) return 0.0;
  // A total squared distance f to the product set bounds the per-cone
  // violation by delta = sqrt(2 f). In noise-normalized units the cone
  // vector has norm at least 1, so the scaled signal term is at least
  // (1 - 2 delta) of the norm, and uniform shrinking by c costs at most a
  // factor c^2 of SINR.
  const double e = e_factor(s_c);
  const double delta = std::sqrt(2.0 * std::max(final_f, 0.0));
  const double a = 1.0 - 2.0 * delta;
  if (a <= 0.0) return s_c;
  const double a2 = a * a;
  if (e - a2 <= 0.0) return 0.0;  // violation too small to matter
  const double c2 = power_scale * power_scale;
  const double sinr_floor = c2 * a2 / (e - a2);
  const double slack = s_c - std::log2(1.0 + sinr_floor);
  return std::min(std::max(slack, 0.0), s_c);
}

SolveOutcome check_feasibility(const Scenario& scenario, double s_c, SolverKind kind,
                               const SolverConfig& config) {
  config.validate();
  if (s_c <= 0.0) return trivially_feasible(scenario);
  const NormalizedScenario norm = normalize(scenario);
  return check_feasibility_impl(scenario, norm, s_c, kind, config, nullptr, nullptr,
                                nullptr, nullptr);
}

MaxMinResult bisection_maxmin(const Scenario& scenario, const BisectionConfig& config) {
  config.validate();
  const auto setup_tic = Clock::now();
  const NormalizedScenario norm = normalize(scenario);
  // The Gram factor of the block solves does not depend on the target rate;
  // build it once and share it across all checks.
  const LiftedProblem probe = build_problem(norm.scenario, 1.0);
  const BaseGram base = BaseGram::build(probe, 1.0);

  MaxMinResult result;
  result.setup_ms = elapsed_ms(setup_tic);
  double lo = config.s_min;
  double hi = config.s_max;

  const ScenarioConfig cfg = scenario.config.resolved();
  result.beamformers.assign(static_cast<std::size_t>(cfg.num_users) * cfg.num_aps *
                                cfg.antennas_per_ap,
                            {0.0, 0.0});
  result.certified_rate = 0.0;
  result.rate_slack = 0.0;

  bool any_infeasible = false;
  std::optional<Eigen::VectorXd> warm;
  while (hi - lo > config.s_ter) {
    const double s_c = 0.5 * (lo + hi);
    CheckSummary summary;
    summary.s_c = s_c;
    SolveOutcome outcome = check_feasibility_impl(
        scenario, norm, s_c, config.solver, config.solver_config, &base,
        config.warm_start && warm ? &*warm : nullptr, &summary.setup_ms,
        &summary.solve_ms);
    summary.verdict = outcome.verdict;
    summary.iterations = outcome.iterations;
    summary.final_f = outcome.final_f;
    summary.stop_reason = outcome.stop_reason;
    result.checks.push_back(summary);
    if (config.keep_traces) result.check_traces.push_back(std::move(outcome.trace));
    result.setup_ms += summary.setup_ms;
    result.solve_ms += summary.solve_ms;

    if (outcome.verdict == Verdict::Feasible) {
      lo = s_c;
      result.certified_rate = s_c;
      result.rate_slack = rate_slack_bound(s_c, outcome.final_f, outcome.power_scale);
      result.beamformers = outcome.beamformers;
      if (config.warm_start) {
        const double sqrt_p = std::sqrt(norm.p_max);
        Eigen::VectorXd lifted = lift_beamformers(cfg.num_aps, cfg.antennas_per_ap,
                                                  cfg.num_users, outcome.beamformers);
        warm = lifted / sqrt_p;
      }
    } else {
      // Undecided counts as infeasible for the bracket: a slow check must
      // not certify a rate it never reached.
      hi = s_c;
      any_infeasible = true;
    }
  }

  result.s_min = lo;
  result.s_max = hi;
  result.checks_performed = static_cast<int>(result.checks.size());
  result.upper_bracket_saturated = !any_infeasible && result.checks_performed > 0;
  result.per_user_rates = achieved_rates(scenario, result.beamformers);
  result.per_ap_power_w = per_ap_powers(scenario, result.beamformers);
  return result;
}

double single_user_oracle(const Scenario& scenario) {
  const ScenarioConfig cfg = scenario.config.resolved();
  if (cfg.num_users != 1) {
    throw std::invalid_argument("single_user_oracle: requires exactly one user");
  }
  double amplitude = 0.0;
  for (int m = 0; m < cfg.num_aps; ++m) {
    amplitude += std::sqrt(cfg.per_ap_power_w[static_cast<std::size_t>(m)]) *
                 scenario.channel(0, m).norm();
  }
  return std::log2(1.0 + amplitude * amplitude / scenario.noise_power_w(0));
}

QosResult qos_min_power(const Scenario& scenario, double s_c, const SolverConfig& config,
                        double power_cap_w) {
  config.validate();
  if (!(s_c > 0.0) || !std::isfinite(s_c)) {
    throw std::invalid_argument("qos_min_power: target rate must be finite and > 0");
  }

  const auto setup_tic = Clock::now();
  // Per-user noise normalization only: beamformers keep their physical
  // scale because the total power is the objective here.
  Scenario scaled = scenario;
  scaled.config = scenario.config.resolved();
  const int M = scaled.num_aps();
  const int N = scaled.antennas_per_ap();
  const int K = scaled.num_users();
  for (int k = 0; k < K; ++k) {
    scaled.channels.segment(static_cast<Eigen::Index>(k) * M * N,
                            static_cast<Eigen::Index>(M) * N) /=
        std::sqrt(scenario.noise_power_w(k));
    scaled.noise_power_w(k) = 1.0;
  }
  const LiftedProblem problem = build_qos_problem(scaled, s_c);

  QosResult result;
  result.s_c = s_c;
  result.setup_ms = elapsed_ms(setup_tic);

  const auto solve_tic = Clock::now();
  SolveOutcome outcome = qos_admm(problem, config, power_cap_w);
  result.solve_ms = elapsed_ms(solve_tic);

  result.verdict = outcome.verdict;
  result.iterations = outcome.iterations;
  result.stop_reason = outcome.stop_reason;
  result.trace = std::move(outcome.trace);
  result.power_trace = std::move(outcome.power_trace);
  result.beamformers = std::move(outcome.beamformers);

  if (result.verdict != Verdict::Infeasible) {
    // The optimum activates every rate constraint; finite-precision exit can
    // sit a hair below the floor. Uniform up-scaling raises every SINR, so
    // the smallest factor restoring all floors is applied.
    const double sinr_target = std::exp2(s_c) - 1.0;
    double scale_sq = 1.0;
    bool fixable = true;
    for (int k = 0; k < K; ++k) {
      const auto h = scaled.joint_channel(k);
      double signal = 0.0;
      double interference = 0.0;
      for (int kp = 0; kp < K; ++kp) {
        const Eigen::Map<const Eigen::VectorXcd> v(
            result.beamformers.data() + static_cast<Eigen::Index>(kp) * M * N,
            static_cast<Eigen::Index>(M) * N);
        const double p = std::norm(h.dot(v));
        if (kp == k) {
          signal = p;
        } else {
          interference += p;
        }
      }
      const double headroom = signal / sinr_target - interference;
      if (headroom <= 0.0) {
        fixable = false;
        break;
      }
      scale_sq = std::max(scale_sq, 1.0 / headroom);  // noise power is 1 here
    }
    if (fixable) {
      const double scale = std::sqrt(scale_sq);
      for (auto& c : result.beamformers) c *= scale;
    } else {
      result.verdict = Verdict::Undecided;
    }
  }

  result.per_user_rates = achieved_rates(scenario, result.beamformers);
  double total = 0.0;
  for (const auto& c : result.beamformers) total += std::norm(c);
  result.total_power_w = total;
  return result;
}

}  // namespace cfmimo
