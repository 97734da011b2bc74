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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <complex>

#include "cfmimo/lifting.hpp"
#include "cfmimo/rng.hpp"
#include "oracles.hpp"

using namespace cfmimo;

namespace {

Scenario make_scenario(int M, int N, int K, std::uint64_t seed,
                       double power_w = 0.01) {
  ScenarioConfig cfg;
  cfg.num_aps = M;
  cfg.antennas_per_ap = N;
  cfg.num_users = K;
  cfg.per_ap_power_w.assign(static_cast<std::size_t>(M), power_w);
  cfg.correlation = CorrelationModel::LocalScattering;
  cfg.seed = seed;
  return generate_scenario(cfg);
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

std::vector<std::complex<double>> random_beamformers(Rng& rng, int M, int N, int K) {
  std::vector<std::complex<double>> v(static_cast<std::size_t>(M) * N * K);
  for (auto& c : v) c = {rng.normal(), rng.normal()};
  return v;
}

}  // namespace

TEST_CASE("e_factor") {
  CHECK(e_factor(1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(e_factor(std::log2(3.0)) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(e_factor(10.0) == doctest::Approx(1024.0 / 1023.0).epsilon(1e-15));
  CHECK(e_factor(0.5) > e_factor(1.0));  // strictly decreasing
  CHECK(e_factor(20.0) > 1.0);
  CHECK_THROWS_AS(e_factor(0.0), std::invalid_argument);
  CHECK_THROWS_AS(e_factor(-1.0), std::invalid_argument);
}

TEST_CASE("channel rows reproduce the complex inner product") {
  const Scenario sc = make_scenario(2, 3, 2, 5);
  const LiftedProblem p = build_problem(sc, 1.0);
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto bf = random_beamformers(rng, 2, 3, 2);
    const Eigen::VectorXd lifted = lift_beamformers(2, 3, 2, bf);
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd pair =
            p.channel_rows.middleRows(2 * k, 2) * lifted.segment(j * p.vdim(), p.vdim());
        const auto h = sc.joint_channel(k);
        const Eigen::Map<const Eigen::VectorXcd> v(bf.data() + j * 6, 6);
        const std::complex<double> inner = h.dot(v);  // h^H v
        CHECK(std::abs(pair(0) - inner.real()) <= 1e-12);
        CHECK(std::abs(pair(1) - inner.imag()) <= 1e-12);
      }
    }
  }
}

TEST_CASE("problem dimensions") {
  const Scenario sc = make_scenario(2, 2, 3, 6);
  const LiftedProblem p = build_problem(sc, 1.5);
  CHECK(p.rows() == 48);
  CHECK(p.vtotal() == 24);
  CHECK(p.vdim() == 8);
  CHECK(p.b.size() == 48);
  int nonzeros = 0;
  for (Eigen::Index i = 0; i < p.b.size(); ++i) nonzeros += p.b(i) != 0.0;
  CHECK(nonzeros == 3);
  const Eigen::MatrixXd dense = dense_full(p);
  CHECK(dense.rows() == 48);
  CHECK(dense.cols() == 24);

  SUBCASE("single user keeps one cone and the power balls") {
    const Scenario one = make_scenario(2, 2, 1, 7);
    const LiftedProblem q = build_problem(one, 1.0);
    CHECK(q.soc_len() == 4);
    CHECK(q.layout.num_soc == 1);
    CHECK(q.layout.num_ball == 2);
    CHECK(q.rows() == 4 + 8);
  }
}

TEST_CASE("assembled cone block matches complex recomputation") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int M = 1 + static_cast<int>(rng.raw() % 3);
    const int N = 1 + static_cast<int>(rng.raw() % 2);
    const int K = 1 + static_cast<int>(rng.raw() % 4);
    const Scenario sc = make_scenario(M, N, K, 100 + trial);
    const double s_c = 0.5 + 2.0 * rng.uniform01();
    const LiftedProblem p = build_problem(sc, s_c);
    const double sqrt_e = std::sqrt(e_factor(s_c));

    const auto bf = random_beamformers(rng, M, N, K);
    const Eigen::VectorXd lifted = lift_beamformers(M, N, K, bf);
    Eigen::VectorXd assembled = p.b;
    for (int j = 0; j < K; ++j) {
      apply_block_add(p, j, lifted.segment(j * p.vdim(), p.vdim()), assembled);
    }

    const Eigen::Index mn = static_cast<Eigen::Index>(M) * N;
    for (int k = 0; k < K; ++k) {
      const auto h = sc.joint_channel(k);
      const Eigen::Index base = k * p.soc_len();
      for (int j = 0; j < K; ++j) {
        const Eigen::Map<const Eigen::VectorXcd> v(bf.data() + j * mn, mn);
        const std::complex<double> inner = h.dot(v);
        CHECK(std::abs(assembled(base + 2 * j) - inner.real()) <= 1e-10);
        CHECK(std::abs(assembled(base + 2 * j + 1) - inner.imag()) <= 1e-10);
      }
      CHECK(assembled(base + 2 * K) ==
            doctest::Approx(std::sqrt(sc.noise_power_w(k))).epsilon(1e-14));
      const Eigen::Map<const Eigen::VectorXcd> vk(bf.data() + k * mn, mn);
      CHECK(std::abs(assembled(base + 2 * K + 1) - sqrt_e * h.dot(vk).real()) <= 1e-10);

      // Squared norm identity of the lifted cone vector.
      double sum = sc.noise_power_w(k);
      for (int j = 0; j < K; ++j) {
        const Eigen::Map<const Eigen::VectorXcd> v(bf.data() + j * mn, mn);
        sum += std::norm(h.dot(v));
      }
      const double rest_sq =
          assembled.segment(base, 2 * K + 1).squaredNorm();
      CHECK(rest_sq == doctest::Approx(sum).epsilon(1e-10));
    }

    // Power region is the AP-major permutation of the lifted vector.
    if (p.with_power_blocks) {
      const Eigen::VectorXd ap_major = permute_to_ap_major(lifted, M, N, K);
      CHECK((assembled.segment(p.power_offset(), p.vtotal()) - ap_major).norm() <=
            1e-12 * (1.0 + ap_major.norm()));
    }
  }
}

TEST_CASE("block operators: zero, orthogonality, dense agreement, adjoint") {
  const Scenario sc = make_scenario(2, 2, 3, 8);
  const LiftedProblem p = build_problem(sc, 1.2);
  const Eigen::MatrixXd dense = dense_full(p);
  Rng rng(3);

  CHECK(apply_block(p, 1, Eigen::VectorXd::Zero(p.vdim())).norm() == 0.0);
  CHECK(apply_block_transpose(p, 1, Eigen::VectorXd::Zero(p.rows())).norm() == 0.0);

  double max_cross = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd u = random_vector(rng, p.vdim());
    const Eigen::VectorXd w = random_vector(rng, p.vdim());
    for (int i = 0; i < p.K; ++i) {
      for (int j = 0; j < p.K; ++j) {
        if (i == j) continue;
        const double cross = apply_block(p, i, u).dot(apply_block(p, j, w)) /
                             (u.norm() * w.norm());
        max_cross = std::max(max_cross, std::abs(cross));
      }
    }
  }
  CHECK(max_cross <= 1e-12);

  for (int trial = 0; trial < 100; ++trial) {
    const int j = static_cast<int>(rng.raw() % 3);
    const Eigen::VectorXd u = random_vector(rng, p.vdim());
    const Eigen::VectorXd r = random_vector(rng, p.rows());
    const Eigen::VectorXd av = apply_block(p, j, u);
    const Eigen::VectorXd atr = apply_block_transpose(p, j, r);
    CHECK(std::abs(av.dot(r) - u.dot(atr)) <=
          1e-12 * (1.0 + av.norm() * r.norm()));
    // Dense cross-checks.
    const Eigen::MatrixXd a_j = dense.middleCols(j * p.vdim(), p.vdim());
    CHECK((av - a_j * u).norm() <= 1e-12 * (1.0 + av.norm()));
    CHECK((atr - a_j.transpose() * r).norm() <= 1e-12 * (1.0 + atr.norm()));
  }

  SUBCASE("masked rows cover exactly the nonzero rows") {
    for (int j = 0; j < p.K; ++j) {
      const NonzeroMask mask = nonzero_mask(p, j);
      std::vector<bool> masked(static_cast<std::size_t>(p.rows()), false);
      for (const auto& [begin, end] : mask.ranges) {
        for (Eigen::Index r = begin; r < end; ++r) masked[static_cast<std::size_t>(r)] = true;
      }
      const Eigen::MatrixXd a_j = dense.middleCols(j * p.vdim(), p.vdim());
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const bool nonzero = a_j.row(r).cwiseAbs().maxCoeff() > 0.0;
        if (nonzero) CHECK(masked[static_cast<std::size_t>(r)]);
        if (!masked[static_cast<std::size_t>(r)]) CHECK_FALSE(nonzero);
      }
    }
  }
}

TEST_CASE("woodbury solve matches dense normal equations") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int M = 1 + static_cast<int>(rng.raw() % 3);
    const int N = 1 + static_cast<int>(rng.raw() % 2);
    const int K = 1 + static_cast<int>(rng.raw() % 4);
    const Scenario sc = make_scenario(M, N, K, 300 + trial);
    const LiftedProblem p = build_problem(sc, 0.8 + rng.uniform01());
    const WoodburyFactors factors = WoodburyFactors::build(p);
    const Eigen::MatrixXd dense = dense_full(p);

    for (int j = 0; j < p.K; ++j) {
      const Eigen::MatrixXd a_j = dense.middleCols(j * p.vdim(), p.vdim());
      const Eigen::MatrixXd normal = a_j.transpose() * a_j;
      const Eigen::VectorXd rhs = random_vector(rng, p.rows());
      const Eigen::VectorXd mine = solve_block_ls(p, factors, j, rhs);
      const Eigen::VectorXd ref = -normal.ldlt().solve(a_j.transpose() * rhs);
      CHECK((mine - ref).norm() <= 1e-8 * (1.0 + ref.norm()));
      // Normal-equation residual of the structured solution.
      const Eigen::VectorXd res = a_j.transpose() * (a_j * mine + rhs);
      CHECK(res.norm() <= 1e-8 * (1.0 + rhs.norm()));
    }
  }

  SUBCASE("zero rhs and stale factors") {
    const Scenario sc = make_scenario(2, 2, 3, 11);
    const LiftedProblem p = build_problem(sc, 1.0);
    const WoodburyFactors factors = WoodburyFactors::build(p);
    CHECK(solve_block_ls(p, factors, 0, Eigen::VectorXd::Zero(p.rows())).norm() == 0.0);
    const LiftedProblem other = build_problem(sc, 1.1);
    CHECK_THROWS_AS(solve_block_ls(other, factors, 0, Eigen::VectorXd::Zero(other.rows())),
                    std::logic_error);
  }

  SUBCASE("base gram reuse across target rates") {
    const Scenario sc = make_scenario(2, 2, 3, 12);
    const LiftedProblem p1 = build_problem(sc, 0.7);
    const BaseGram base = BaseGram::build(p1);
    const LiftedProblem p2 = build_problem(sc, 2.9);
    const WoodburyFactors fresh = WoodburyFactors::build(p2);
    const WoodburyFactors reused = WoodburyFactors::build(p2, 1.0, &base);
    Rng local(99);
    const Eigen::VectorXd rhs = random_vector(local, p2.rows());
    for (int j = 0; j < p2.K; ++j) {
      CHECK((solve_block_ls(p2, fresh, j, rhs) - solve_block_ls(p2, reused, j, rhs))
                .norm() <= 1e-13);
    }
  }
}

TEST_CASE("block solve cost scales about linearly with the size" *
          doctest::skip(false)) {
  // Doubling M at fixed (N, K) should roughly double the per-solve time; a
  // dense factor-backed solve would quadruple it. Generous bound to absorb
  // noise and cache effects.
  auto time_solves = [](int M, int N, int K) {
    const Scenario sc = make_scenario(M, N, K, 77);
    const LiftedProblem p = build_problem(sc, 1.0);
    const WoodburyFactors f = WoodburyFactors::build(p);
    BlockSolveScratch scratch;
    scratch.resize(p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(p.rows());
    Eigen::VectorXd out(p.vdim());
    const int reps = 400;
    double best = 1e100;
    for (int attempt = 0; attempt < 5; ++attempt) {
      const auto tic = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) {
        solve_block_ls_into(p, f, r % K, rhs, out, scratch);
      }
      best = std::min(best, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - tic)
                                .count());
    }
    return best;
  };
  const double base = time_solves(8, 8, 16);
  const double doubled_m = time_solves(16, 8, 16);
  CHECK(doubled_m / base <= 3.2);
  const double doubled_k = time_solves(8, 8, 32);
  CHECK(doubled_k / base <= 3.4);
}

TEST_CASE("ap-major permutation") {
  Rng rng(5);
  const int M = 3, N = 2, K = 4;
  const Eigen::VectorXd v = random_vector(rng, 2LL * M * N * K);
  const Eigen::VectorXd ap = permute_to_ap_major(v, M, N, K);
  CHECK((permute_from_ap_major(ap, M, N, K) - v).norm() == 0.0);

  // Per-AP energy equals the complex recomputation.
  const auto bf = reconstruct_beamformers(M, N, K, v);
  for (int m = 0; m < M; ++m) {
    double expect = 0.0;
    for (int k = 0; k < K; ++k) {
      for (int n = 0; n < N; ++n) {
        expect += std::norm(bf[(static_cast<std::size_t>(k) * M + m) * N + n]);
      }
    }
    const double got = ap.segment(static_cast<Eigen::Index>(m) * 2 * K * N, 2LL * K * N)
                           .squaredNorm();
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("single user reorders by AP") {
    Eigen::VectorXd u(4);
    u << 1, 2, 3, 4;  // M=2, N=1, K=1: [Re ap0, Re ap1, Im ap0, Im ap1]
    const Eigen::VectorXd b = permute_to_ap_major(u, 2, 1, 1);
    Eigen::VectorXd expect(4);
    expect << 1, 3, 2, 4;  // per AP: [Re, Im]
    CHECK(b == expect);
  }

  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(permute_to_ap_major(Eigen::VectorXd::Zero(5), 2, 1, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("achieved rates") {
  const Scenario sc = make_scenario(2, 2, 3, 21);
  const int mn = 4;

  SUBCASE("all-zero beamformers give zero rates") {
    std::vector<std::complex<double>> zeros(3 * mn, {0.0, 0.0});
    CHECK(achieved_rates(sc, zeros).norm() == 0.0);
  }

  SUBCASE("single user matched filter hits the closed form") {
    const Scenario one = make_scenario(1, 2, 1, 22, 0.5);
    const auto h = one.joint_channel(0);
    std::vector<std::complex<double>> v(2);
    const double scale = std::sqrt(0.5) / h.norm();
    for (int n = 0; n < 2; ++n) v[static_cast<std::size_t>(n)] = scale * h(n);
    const double expect =
        std::log2(1.0 + 0.5 * h.squaredNorm() / one.noise_power_w(0));
    CHECK(achieved_rates(one, v)(0) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("duplicate-path oracle agreement") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      const auto bf = random_beamformers(rng, 2, 2, 3);
      const Eigen::VectorXd mine = achieved_rates(sc, bf);
      const Eigen::VectorXd ref = cfmimo::testing::rates_reference(sc, bf);
      CHECK((mine - ref).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("cone membership of the lifted point certifies rates and powers") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int M = 2, N = 2, K = 3;
    const Scenario sc = make_scenario(M, N, K, 500 + trial);
    // Phase-align and power-fit a random beamformer so its lifted image is a
    // cone member for targets at the achieved minimum.
    auto bf = random_beamformers(rng, M, N, K);
    const Eigen::Index mn = static_cast<Eigen::Index>(M) * N;
    for (int k = 0; k < K; ++k) {
      const auto h = sc.joint_channel(k);
      const Eigen::Map<Eigen::VectorXcd> v(bf.data() + k * mn, mn);
      const std::complex<double> inner = h.dot(v);
      v *= std::conj(inner) / std::abs(inner);
    }
    const Eigen::VectorXd powers = per_ap_powers(sc, bf);
    double shrink = 1.0;
    const ScenarioConfig cfg = sc.config.resolved();
    for (int m = 0; m < M; ++m) {
      shrink = std::min(shrink, std::sqrt(cfg.per_ap_power_w[static_cast<std::size_t>(m)] /
                                          powers(m)));
    }
    for (auto& c : bf) c *= shrink;

    const Eigen::VectorXd rates = achieved_rates(sc, bf);
    const double s_c = rates.minCoeff() * (1.0 - 1e-9);
    if (s_c <= 0.0) continue;

    const LiftedProblem p = build_problem(sc, s_c);
    Eigen::VectorXd lifted_image = p.b;
    const Eigen::VectorXd lifted = lift_beamformers(M, N, K, bf);
    for (int j = 0; j < K; ++j) {
      apply_block_add(p, j, lifted.segment(j * p.vdim(), p.vdim()), lifted_image);
    }
    // Membership in every block...
    CHECK(f_value(lifted_image, p.layout) <=
          1e-18 * (1.0 + lifted_image.squaredNorm()));
    // ...implies the complex-domain constraints.
    CHECK(rates.minCoeff() >= s_c - 1e-9);
    const Eigen::VectorXd final_powers = per_ap_powers(sc, bf);
    for (int m = 0; m < M; ++m) {
      CHECK(final_powers(m) <=
            cfg.per_ap_power_w[static_cast<std::size_t>(m)] + 1e-9);
    }
  }
}

TEST_CASE("dense dump is gated") {
  const Scenario big = make_scenario(4, 4, 9, 33);
  const LiftedProblem p = build_problem(big, 1.0);
  CHECK(p.vtotal() > 512);
  CHECK_THROWS_AS(dense_full(p), std::logic_error);
}
