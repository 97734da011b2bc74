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

#include "cfmimo/lifting.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace cfmimo {

namespace {

constexpr Eigen::Index kDenseGate = 512;  // max 2MNK for dense materialization

std::uint64_t next_problem_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 1469598103934665603ull;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

std::uint64_t channel_rows_fingerprint(const LiftedProblem& problem) {
  return fnv1a_bytes(problem.channel_rows.data(),
                     sizeof(double) * static_cast<std::size_t>(problem.channel_rows.size()));
}

LiftedProblem build_common(const Scenario& scenario, double s_c, bool with_power) {
  if (!(s_c > 0.0) || !std::isfinite(s_c)) {
    throw std::invalid_argument("build_problem: target rate must be finite and > 0");
  }
  const ScenarioConfig cfg = scenario.config.resolved();
  LiftedProblem p;
  p.M = cfg.num_aps;
  p.N = cfg.antennas_per_ap;
  p.K = cfg.num_users;
  p.s_c = s_c;
  p.e = e_factor(s_c);
  p.sqrt_e = std::sqrt(p.e);
  p.with_power_blocks = with_power;
  p.id = next_problem_id();

  const Eigen::Index mn = static_cast<Eigen::Index>(p.M) * p.N;
  p.channel_rows.resize(2 * p.K, 2 * mn);
  for (int k = 0; k < p.K; ++k) {
    const auto h = scenario.joint_channel(k);
    // Row 2k paired with row 2k+1 maps a lifted v to [Re <h,v>; Im <h,v>]
    // with <h,v> the conjugated inner product h^H v.
    p.channel_rows.row(2 * k).head(mn) = h.real().transpose();
    p.channel_rows.row(2 * k).tail(mn) = h.imag().transpose();
    p.channel_rows.row(2 * k + 1).head(mn) = -h.imag().transpose();
    p.channel_rows.row(2 * k + 1).tail(mn) = h.real().transpose();
  }

  p.sigma = scenario.noise_power_w.cwiseSqrt();
  p.b = Eigen::VectorXd::Zero(with_power ? p.soc_rows() + p.vtotal() : p.soc_rows());
  for (int k = 0; k < p.K; ++k) {
    p.b(k * p.soc_len() + 2 * p.K) = p.sigma(k);
  }

  if (with_power) {
    p.power_radii.resize(p.M);
    for (int m = 0; m < p.M; ++m) p.power_radii(m) = std::sqrt(cfg.per_ap_power_w[m]);
    p.layout = ConeLayout::product(p.K, p.soc_len(), p.power_radii,
                                   2LL * p.K * p.N);
  } else {
    p.layout = ConeLayout::soc_only(p.K, p.soc_len());
  }
  return p;
}

void check_block_index(const LiftedProblem& problem, int j) {
  if (j < 0 || j >= problem.K) {
    throw std::invalid_argument("block index out of range");
  }
}

void check_vdim(const LiftedProblem& problem, Eigen::Index size) {
  if (size != problem.vdim()) {
    throw std::invalid_argument("block vector: length mismatch");
  }
}

void check_rows(const LiftedProblem& problem, Eigen::Index size) {
  if (size != problem.rows()) {
    throw std::invalid_argument("residual vector: length mismatch");
  }
}

}  // namespace

double e_factor(double s_c) {
  if (!(s_c > 0.0) || !std::isfinite(s_c)) {
    throw std::invalid_argument("e_factor: rate must be finite and > 0");
  }
  const double pow2 = std::exp2(s_c);
  return pow2 / (pow2 - 1.0);
}

LiftedProblem build_problem(const Scenario& scenario, double s_c) {
  return build_common(scenario, s_c, /*with_power=*/true);
}

LiftedProblem build_qos_problem(const Scenario& scenario, double s_c) {
  return build_common(scenario, s_c, /*with_power=*/false);
}

NonzeroMask nonzero_mask(const LiftedProblem& problem, int j) {
  check_block_index(problem, j);
  NonzeroMask mask;
  const Eigen::Index soc_len = problem.soc_len();
  for (int k = 0; k < problem.K; ++k) {
    const Eigen::Index base = k * soc_len;
    mask.ranges.emplace_back(base + 2 * j, base + 2 * j + 2);
    if (k == j) {
      mask.ranges.emplace_back(base + 2 * problem.K + 1, base + 2 * problem.K + 2);
    }
  }
  if (problem.with_power_blocks) {
    const Eigen::Index per_ap = 2LL * problem.K * problem.N;
    const Eigen::Index two_n = 2LL * problem.N;
    for (int m = 0; m < problem.M; ++m) {
      const Eigen::Index begin = problem.power_offset() + m * per_ap + j * two_n;
      mask.ranges.emplace_back(begin, begin + two_n);
    }
  }
  return mask;
}

void apply_block_add(const LiftedProblem& problem, int j,
                     const Eigen::Ref<const Eigen::VectorXd>& v_j,
                     Eigen::Ref<Eigen::VectorXd> out, double sign) {
  check_block_index(problem, j);
  check_vdim(problem, v_j.size());
  check_rows(problem, out.size());

  const Eigen::VectorXd products = problem.channel_rows * v_j;  // 2K
  const Eigen::Index soc_len = problem.soc_len();
  for (int k = 0; k < problem.K; ++k) {
    out(k * soc_len + 2 * j) += sign * products(2 * k);
    out(k * soc_len + 2 * j + 1) += sign * products(2 * k + 1);
  }
  out(j * soc_len + 2 * problem.K + 1) += sign * problem.sqrt_e * products(2 * j);

  if (problem.with_power_blocks) {
    // Permutation slice: user j's AP-major coefficients.
    const Eigen::Index mn = static_cast<Eigen::Index>(problem.M) * problem.N;
    const Eigen::Index per_ap = 2LL * problem.K * problem.N;
    for (int m = 0; m < problem.M; ++m) {
      const Eigen::Index row = problem.power_offset() + m * per_ap + j * 2LL * problem.N;
      out.segment(row, problem.N) += sign * v_j.segment(m * problem.N, problem.N);
      out.segment(row + problem.N, problem.N) +=
          sign * v_j.segment(mn + m * problem.N, problem.N);
    }
  }
}

Eigen::VectorXd apply_block(const LiftedProblem& problem, int j,
                            const Eigen::Ref<const Eigen::VectorXd>& v_j) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(problem.rows());
  apply_block_add(problem, j, v_j, out);
  return out;
}

void apply_block_transpose_into(const LiftedProblem& problem, int j,
                                const Eigen::Ref<const Eigen::VectorXd>& r,
                                Eigen::Ref<Eigen::VectorXd> out) {
  check_block_index(problem, j);
  check_rows(problem, r.size());
  check_vdim(problem, out.size());

  const Eigen::Index soc_len = problem.soc_len();
  Eigen::VectorXd gathered(2 * problem.K);
  for (int k = 0; k < problem.K; ++k) {
    gathered(2 * k) = r(k * soc_len + 2 * j);
    gathered(2 * k + 1) = r(k * soc_len + 2 * j + 1);
  }
  gathered(2 * j) += problem.sqrt_e * r(j * soc_len + 2 * problem.K + 1);
  out.noalias() = problem.channel_rows.transpose() * gathered;

  if (problem.with_power_blocks) {
    const Eigen::Index mn = static_cast<Eigen::Index>(problem.M) * problem.N;
    const Eigen::Index per_ap = 2LL * problem.K * problem.N;
    for (int m = 0; m < problem.M; ++m) {
      const Eigen::Index row = problem.power_offset() + m * per_ap + j * 2LL * problem.N;
      out.segment(m * problem.N, problem.N) += r.segment(row, problem.N);
      out.segment(mn + m * problem.N, problem.N) += r.segment(row + problem.N, problem.N);
    }
  }
}

Eigen::VectorXd apply_block_transpose(const LiftedProblem& problem, int j,
                                      const Eigen::Ref<const Eigen::VectorXd>& r) {
  Eigen::VectorXd out(problem.vdim());
  apply_block_transpose_into(problem, j, r, out);
  return out;
}

void apply_all_blocks_into(const LiftedProblem& problem,
                           const Eigen::Ref<const Eigen::VectorXd>& v_stacked,
                           Eigen::Ref<Eigen::VectorXd> out, const ExecPolicy& exec) {
  if (v_stacked.size() != problem.vtotal()) {
    throw std::invalid_argument("apply_all_blocks: stacked vector length mismatch");
  }
  out.setZero();
  // Distinct blocks touch disjoint rows, so this loop is race-free.
  parallel_for(exec, problem.K, [&](std::ptrdiff_t j, int) {
    apply_block_add(problem, static_cast<int>(j),
                    v_stacked.segment(j * problem.vdim(), problem.vdim()), out);
  });
}

BaseGram BaseGram::build(const LiftedProblem& problem, double shift) {
  if (!(shift > 0.0)) throw std::invalid_argument("BaseGram: shift must be > 0");
  BaseGram base;
  base.shift = shift;
  base.gram.noalias() = problem.channel_rows * problem.channel_rows.transpose();
  Eigen::MatrixXd shifted = base.gram;
  shifted.diagonal().array() += shift;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("BaseGram: Cholesky factorization failed");
  }
  base.chol_base = llt.matrixL();
  base.channel_fingerprint = channel_rows_fingerprint(problem);
  return base;
}

WoodburyFactors WoodburyFactors::build(const LiftedProblem& problem, double shift,
                                       const BaseGram* base) {
  WoodburyFactors f;
  f.problem_id = problem.id;
  f.shift = shift;
  f.e = problem.e;
  if (base != nullptr) {
    if (base->shift != shift ||
        base->channel_fingerprint != channel_rows_fingerprint(problem) ||
        base->gram.rows() != 2 * problem.K) {
      throw std::invalid_argument("WoodburyFactors: base Gram does not match problem");
    }
    f.gram = base->gram;
    f.chol_base = base->chol_base;
  } else {
    const BaseGram fresh = BaseGram::build(problem, shift);
    f.gram = fresh.gram;
    f.chol_base = fresh.chol_base;
  }

  // Border the shared Cholesky with the rate-scaled SINR column of each
  // block: the capacitance of block j appends sqrt(e) * gram.col(2j) and the
  // corner shift + e * gram(2j, 2j).
  f.border.resize(2 * problem.K, problem.K);
  f.border_diag.resize(problem.K);
  const auto lower = f.chol_base.triangularView<Eigen::Lower>();
  for (int j = 0; j < problem.K; ++j) {
    f.border.col(j) = problem.sqrt_e * f.gram.col(2 * j);
    lower.solveInPlace(f.border.col(j));
    const double pivot =
        shift + problem.e * f.gram(2 * j, 2 * j) - f.border.col(j).squaredNorm();
    if (!(pivot > 0.0)) {
      throw std::runtime_error("WoodburyFactors: capacitance pivot not positive");
    }
    f.border_diag(j) = std::sqrt(pivot);
  }
  return f;
}

void WoodburyFactors::capacitance_solve(int j, const Eigen::Ref<const Eigen::VectorXd>& t,
                                        Eigen::Ref<Eigen::VectorXd> z) const {
  const Eigen::Index head = gram.rows();
  const auto lower = chol_base.triangularView<Eigen::Lower>();
  z.head(head) = t.head(head);
  lower.solveInPlace(z.head(head));
  const double w_last = (t(head) - border.col(j).dot(z.head(head))) / border_diag(j);
  const double z_last = w_last / border_diag(j);
  z.head(head) -= z_last * border.col(j);
  lower.transpose().solveInPlace(z.head(head));
  z(head) = z_last;
}

void BlockSolveScratch::resize(const LiftedProblem& problem) {
  row_products.resize(2 * problem.K);
  cap_rhs.resize(2 * problem.K + 1);
  cap_sol.resize(2 * problem.K + 1);
  gathered.resize(problem.vdim());
}

void woodbury_solve_into(const LiftedProblem& problem, const WoodburyFactors& factors,
                         int j, const Eigen::Ref<const Eigen::VectorXd>& x,
                         Eigen::Ref<Eigen::VectorXd> out, BlockSolveScratch& scratch) {
  // (shift*I + U U^T)^{-1} x = (x - U (shift*I + U^T U)^{-1} U^T x) / shift
  // with U = [channel_rows^T, sqrt(e) * sinr_row_j].
  scratch.row_products.noalias() = problem.channel_rows * x;
  scratch.cap_rhs.head(2 * problem.K) = scratch.row_products;
  scratch.cap_rhs(2 * problem.K) = problem.sqrt_e * scratch.row_products(2 * j);
  factors.capacitance_solve(j, scratch.cap_rhs, scratch.cap_sol);
  scratch.cap_sol(2 * j) += problem.sqrt_e * scratch.cap_sol(2 * problem.K);
  out.noalias() =
      problem.channel_rows.transpose() * scratch.cap_sol.head(2 * problem.K);
  out = (x - out) / factors.shift;
}

void solve_block_ls_into(const LiftedProblem& problem, const WoodburyFactors& factors,
                         int j, const Eigen::Ref<const Eigen::VectorXd>& rhs,
                         Eigen::Ref<Eigen::VectorXd> out, BlockSolveScratch& scratch) {
  if (factors.problem_id != problem.id) {
    throw std::logic_error("solve_block_ls: factorization is stale for this problem");
  }
  apply_block_transpose_into(problem, j, rhs, scratch.gathered);
  woodbury_solve_into(problem, factors, j, scratch.gathered, out, scratch);
  out = -out;
}

Eigen::VectorXd solve_block_ls(const LiftedProblem& problem,
                               const WoodburyFactors& factors, int j,
                               const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  BlockSolveScratch scratch;
  scratch.resize(problem);
  Eigen::VectorXd out(problem.vdim());
  solve_block_ls_into(problem, factors, j, rhs, out, scratch);
  return out;
}

Eigen::VectorXd permute_to_ap_major(const Eigen::Ref<const Eigen::VectorXd>& v, int M,
                                    int N, int K) {
  const Eigen::Index mn = static_cast<Eigen::Index>(M) * N;
  if (v.size() != 2 * mn * K) {
    throw std::invalid_argument("permute_to_ap_major: length mismatch");
  }
  Eigen::VectorXd out(v.size());
  for (int k = 0; k < K; ++k) {
    const Eigen::Index user_base = k * 2 * mn;
    for (int m = 0; m < M; ++m) {
      const Eigen::Index ap_base =
          static_cast<Eigen::Index>(m) * 2 * K * N + static_cast<Eigen::Index>(k) * 2 * N;
      out.segment(ap_base, N) = v.segment(user_base + m * N, N);
      out.segment(ap_base + N, N) = v.segment(user_base + mn + m * N, N);
    }
  }
  return out;
}

Eigen::VectorXd permute_from_ap_major(const Eigen::Ref<const Eigen::VectorXd>& v_ap,
                                      int M, int N, int K) {
  const Eigen::Index mn = static_cast<Eigen::Index>(M) * N;
  if (v_ap.size() != 2 * mn * K) {
    throw std::invalid_argument("permute_from_ap_major: length mismatch");
  }
  Eigen::VectorXd out(v_ap.size());
  for (int k = 0; k < K; ++k) {
    const Eigen::Index user_base = k * 2 * mn;
    for (int m = 0; m < M; ++m) {
      const Eigen::Index ap_base =
          static_cast<Eigen::Index>(m) * 2 * K * N + static_cast<Eigen::Index>(k) * 2 * N;
      out.segment(user_base + m * N, N) = v_ap.segment(ap_base, N);
      out.segment(user_base + mn + m * N, N) = v_ap.segment(ap_base + N, N);
    }
  }
  return out;
}

std::vector<std::complex<double>> reconstruct_beamformers(
    int M, int N, int K, const Eigen::Ref<const Eigen::VectorXd>& v_stacked) {
  const Eigen::Index mn = static_cast<Eigen::Index>(M) * N;
  if (v_stacked.size() != 2 * mn * K) {
    throw std::invalid_argument("reconstruct_beamformers: length mismatch");
  }
  std::vector<std::complex<double>> out(static_cast<std::size_t>(mn) * K);
  for (int k = 0; k < K; ++k) {
    const Eigen::Index base = k * 2 * mn;
    for (Eigen::Index i = 0; i < mn; ++i) {
      out[static_cast<std::size_t>(k) * mn + i] = {v_stacked(base + i),
                                                   v_stacked(base + mn + i)};
    }
  }
  return out;
}

Eigen::VectorXd lift_beamformers(int M, int N, int K,
                                 const std::vector<std::complex<double>>& beamformers) {
  const Eigen::Index mn = static_cast<Eigen::Index>(M) * N;
  if (beamformers.size() != static_cast<std::size_t>(mn) * K) {
    throw std::invalid_argument("lift_beamformers: length mismatch");
  }
  Eigen::VectorXd out(2 * mn * K);
  for (int k = 0; k < K; ++k) {
    const Eigen::Index base = k * 2 * mn;
    for (Eigen::Index i = 0; i < mn; ++i) {
      const auto& c = beamformers[static_cast<std::size_t>(k) * mn + i];
      out(base + i) = c.real();
      out(base + mn + i) = c.imag();
    }
  }
  return out;
}

Eigen::VectorXd achieved_rates(const Scenario& scenario,
                               const std::vector<std::complex<double>>& beamformers) {
  const int K = scenario.num_users();
  const Eigen::Index mn =
      static_cast<Eigen::Index>(scenario.num_aps()) * scenario.antennas_per_ap();
  if (beamformers.size() != static_cast<std::size_t>(mn) * K) {
    throw std::invalid_argument("achieved_rates: beamformer count mismatch");
  }
  Eigen::VectorXd rates(K);
  for (int k = 0; k < K; ++k) {
    const auto h = scenario.joint_channel(k);
    double signal = 0.0;
    double interference = 0.0;
    for (int kp = 0; kp < K; ++kp) {
      const Eigen::Map<const Eigen::VectorXcd> v(beamformers.data() + kp * mn, mn);
      const double power = std::norm(h.dot(v));  // |h^H v|^2
      if (kp == k) {
        signal = power;
      } else {
        interference += power;
      }
    }
    rates(k) = std::log2(1.0 + signal / (interference + scenario.noise_power_w(k)));
  }
  return rates;
}

Eigen::VectorXd per_ap_powers(const Scenario& scenario,
                              const std::vector<std::complex<double>>& beamformers) {
  const int M = scenario.num_aps();
  const int N = scenario.antennas_per_ap();
  const int K = scenario.num_users();
  Eigen::VectorXd powers = Eigen::VectorXd::Zero(M);
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M; ++m) {
      const Eigen::Map<const Eigen::VectorXcd> v(
          beamformers.data() + (static_cast<Eigen::Index>(k) * M + m) * N, N);
      powers(m) += v.squaredNorm();
    }
  }
  return powers;
}

Eigen::MatrixXd dense_block(const LiftedProblem& problem, int j) {
  if (problem.vtotal() > kDenseGate) {
    throw std::logic_error("dense_block: instance above the dense materialization gate");
  }
  Eigen::MatrixXd out(problem.rows(), problem.vdim());
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(problem.vdim());
  for (Eigen::Index c = 0; c < problem.vdim(); ++c) {
    unit(c) = 1.0;
    out.col(c) = apply_block(problem, j, unit);
    unit(c) = 0.0;
  }
  return out;
}

Eigen::MatrixXd dense_full(const LiftedProblem& problem) {
  Eigen::MatrixXd out(problem.rows(), problem.vtotal());
  for (int j = 0; j < problem.K; ++j) {
    out.middleCols(j * problem.vdim(), problem.vdim()) = dense_block(problem, j);
  }
  return out;
}

void dump_dense_matrix(const LiftedProblem& problem, const std::string& path) {
  const Eigen::MatrixXd dense = dense_full(problem);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_dense_matrix: cannot open " + path);
  out << "%%MatrixMarket matrix array real general\n";
  out << dense.rows() << " " << dense.cols() << "\n";
  out.precision(17);
  for (Eigen::Index c = 0; c < dense.cols(); ++c) {
    for (Eigen::Index r = 0; r < dense.rows(); ++r) {
      out << dense(r, c) << "\n";
    }
  }
}

}  // namespace cfmimo
