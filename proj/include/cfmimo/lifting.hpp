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
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/cones.hpp"
#include "cfmimo/parallel.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

/// SINR factor e(s) = 2^s / (2^s - 1); strictly decreasing, > 1. Throws for
/// s <= 0 (the driver treats non-positive target rates as trivially met and
/// never builds a lifted problem for them).
double e_factor(double s_c);

/// The real-valued feasibility problem for a target rate: find v with
/// A v + b in the product set D. A is never materialized; it acts through
/// the stacked per-user channel rows, the SINR row and an index permutation.
///
/// Row layout (0-based):
///   user block k occupies rows [k*(2K+2), (k+1)*(2K+2)):
///     rows 2j, 2j+1   : Re/Im of <h_k, v_j> for every user j
///     row 2K          : constant sigma_k (lives in b)
///     row 2K+1        : sqrt(e) * Re of <h_k, v_k>
///   power region (feasibility variant only) starts at K*(2K+2);
///   AP m owns rows [m*2KN, (m+1)*2KN) therein, holding Re/Im of v_j[m]
///   per user j.
///
/// Column block j is the real lift of user j's beamformer:
/// [Re v_j; Im v_j], AP-major within each half (length 2MN).
struct LiftedProblem {
  int M = 0;
  int N = 0;
  int K = 0;
  double s_c = 0.0;
  double e = 0.0;       // e(s_c)
  double sqrt_e = 0.0;  // absorbed into the SINR row
  bool with_power_blocks = true;

  /// 2K x 2MN; rows (2k, 2k+1) applied to a lifted v_j give
  /// [Re <h_k, v_j>; Im <h_k, v_j>]. Row 2k is also the SINR row of user k.
  Eigen::MatrixXd channel_rows;
  Eigen::VectorXd sigma;        // K noise standard deviations
  Eigen::VectorXd power_radii;  // M, sqrt(p_m); empty in the QoS variant
  Eigen::VectorXd b;            // offset, sigma_k in slot 2K of each user block
  ConeLayout layout;
  std::uint64_t id = 0;  // unique per build, used for factor staleness checks

  Eigen::Index vdim() const { return 2LL * M * N; }
  Eigen::Index vtotal() const { return vdim() * K; }
  Eigen::Index soc_len() const { return 2LL * K + 2; }
  Eigen::Index soc_rows() const { return soc_len() * K; }
  Eigen::Index power_offset() const { return soc_rows(); }
  Eigen::Index rows() const {
    return soc_rows() + (with_power_blocks ? vtotal() : 0);
  }
};

/// Feasibility problem with per-user rate cones and per-AP power balls.
LiftedProblem build_problem(const Scenario& scenario, double s_c);

/// QoS variant: rate cones only, used by the minimum-power mode.
LiftedProblem build_qos_problem(const Scenario& scenario, double s_c);

/// Rows where column block j is nonzero, as half-open [begin, end) ranges.
struct NonzeroMask {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
};
NonzeroMask nonzero_mask(const LiftedProblem& problem, int j);

// -- structured operator ------------------------------------------------------

/// out += sign * A_j v_j; touches only the rows in nonzero_mask(j).
void apply_block_add(const LiftedProblem& problem, int j,
                     const Eigen::Ref<const Eigen::VectorXd>& v_j,
                     Eigen::Ref<Eigen::VectorXd> out, double sign = 1.0);

Eigen::VectorXd apply_block(const LiftedProblem& problem, int j,
                            const Eigen::Ref<const Eigen::VectorXd>& v_j);

/// out = A_j^T r; reads only the rows in nonzero_mask(j).
void apply_block_transpose_into(const LiftedProblem& problem, int j,
                                const Eigen::Ref<const Eigen::VectorXd>& r,
                                Eigen::Ref<Eigen::VectorXd> out);

Eigen::VectorXd apply_block_transpose(const LiftedProblem& problem, int j,
                                      const Eigen::Ref<const Eigen::VectorXd>& r);

/// out = sum_j A_j v_j for a stacked v; block contributions write disjoint
/// rows, so the block loop parallelizes without reductions.
void apply_all_blocks_into(const LiftedProblem& problem,
                           const Eigen::Ref<const Eigen::VectorXd>& v_stacked,
                           Eigen::Ref<Eigen::VectorXd> out, const ExecPolicy& exec = {});

// -- Gram solves --------------------------------------------------------------

/// Rate-independent part of the block Gram factorizations, reusable across
/// target rates for one scenario (the bisection loop rebuilds the factors
/// roughly ten times per scenario).
struct BaseGram {
  double shift = 1.0;
  Eigen::MatrixXd gram;       // 2K x 2K, channel_rows * channel_rows^T
  Eigen::MatrixXd chol_base;  // lower Cholesky factor of shift*I + gram
  std::uint64_t channel_fingerprint = 0;

  static BaseGram build(const LiftedProblem& problem, double shift = 1.0);
};

/// Factorization of shift*I_perm + A_j^T A_j for every block. The inverse is
/// applied in O(MNK) through the low-rank structure: the shared Gram Cholesky
/// is bordered per block by the rate-scaled SINR column.
struct WoodburyFactors {
  std::uint64_t problem_id = 0;
  double shift = 1.0;  // 1 for the feasibility problem, 2/beta for QoS
  double e = 0.0;
  Eigen::MatrixXd gram;         // shared 2K x 2K Gram
  Eigen::MatrixXd chol_base;    // lower Cholesky factor of shift*I + gram
  Eigen::MatrixXd border;       // 2K x K, column j borders block j
  Eigen::VectorXd border_diag;  // K, final pivot per block

  /// Builds factors for the problem; pass a BaseGram to reuse the
  /// rate-independent Cholesky. Throws if the base does not match.
  static WoodburyFactors build(const LiftedProblem& problem, double shift = 1.0,
                               const BaseGram* base = nullptr);

  Eigen::Index capacitance_dim() const { return gram.rows() + 1; }

  /// z = (shift*I + Abar_j^T Abar_j)^{-1} t for the (2K+1)-dim capacitance.
  void capacitance_solve(int j, const Eigen::Ref<const Eigen::VectorXd>& t,
                         Eigen::Ref<Eigen::VectorXd> z) const;
};

/// Scratch buffers for one in-flight block solve (sized once per thread).
struct BlockSolveScratch {
  Eigen::VectorXd row_products;  // 2K
  Eigen::VectorXd cap_rhs;       // 2K+1
  Eigen::VectorXd cap_sol;       // 2K+1
  Eigen::VectorXd gathered;      // 2MN

  void resize(const LiftedProblem& problem);
};

/// Applies the inverse of the block normal matrix shift*I + U_j U_j^T,
/// where U_j stacks the channel rows and the rate-scaled SINR row of block
/// j. With shift = 1 this is (A_j^T A_j)^{-1} of the feasibility problem
/// (the permutation slice contributes the identity); O(MNK) per call.
void woodbury_solve_into(const LiftedProblem& problem, const WoodburyFactors& factors,
                         int j, const Eigen::Ref<const Eigen::VectorXd>& x,
                         Eigen::Ref<Eigen::VectorXd> out, BlockSolveScratch& scratch);

/// v_j = -(A_j^T A_j)^{-1} A_j^T r with r the full-length residual; reads only
/// the masked rows. Throws if the factors were built for a different problem.
Eigen::VectorXd solve_block_ls(const LiftedProblem& problem,
                               const WoodburyFactors& factors, int j,
                               const Eigen::Ref<const Eigen::VectorXd>& rhs);

void solve_block_ls_into(const LiftedProblem& problem, const WoodburyFactors& factors,
                         int j, const Eigen::Ref<const Eigen::VectorXd>& rhs,
                         Eigen::Ref<Eigen::VectorXd> out, BlockSolveScratch& scratch);

// -- layout helpers -----------------------------------------------------------

/// User-major lifted vector -> AP-major stacking (and back). The AP-major
/// form groups, per AP, the Re/Im coefficients of every user's beamformer.
Eigen::VectorXd permute_to_ap_major(const Eigen::Ref<const Eigen::VectorXd>& v, int M,
                                    int N, int K);
Eigen::VectorXd permute_from_ap_major(const Eigen::Ref<const Eigen::VectorXd>& v_ap,
                                      int M, int N, int K);

/// Lifted real vector of one user's beamformer -> complex coefficients.
std::vector<std::complex<double>> reconstruct_beamformers(
    int M, int N, int K, const Eigen::Ref<const Eigen::VectorXd>& v_stacked);

/// Inverse of reconstruct_beamformers.
Eigen::VectorXd lift_beamformers(int M, int N, int K,
                                 const std::vector<std::complex<double>>& beamformers);

/// Per-user achievable rates in bit/s/Hz for the given beamformers.
Eigen::VectorXd achieved_rates(const Scenario& scenario,
                               const std::vector<std::complex<double>>& beamformers);

/// Per-AP transmit powers sum_k ||v_k[m]||^2 in watts.
Eigen::VectorXd per_ap_powers(const Scenario& scenario,
                              const std::vector<std::complex<double>>& beamformers);

// -- debug/oracle path --------------------------------------------------------

/// Dense materialization of one column block; gated to 2MNK <= 512 and used
/// only for cross-checks against the structured operator.
Eigen::MatrixXd dense_block(const LiftedProblem& problem, int j);
Eigen::MatrixXd dense_full(const LiftedProblem& problem);

/// Writes the dense matrix in matrix-market array format for inspection.
void dump_dense_matrix(const LiftedProblem& problem, const std::string& path);

}  // namespace cfmimo
