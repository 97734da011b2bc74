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

#include <cmath>

#include "cfmimo/scenario.hpp"
#include "cfmimo/serialize.hpp"
#include "cfmimo/units.hpp"

using namespace cfmimo;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.num_aps = 2;
  cfg.antennas_per_ap = 3;
  cfg.num_users = 4;
  cfg.per_ap_power_w = {0.01, 0.02};
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("large_scale_fading_db matches the pathloss model") {
  CHECK(large_scale_fading_db(100.0, 0.0) == doctest::Approx(-110.53).epsilon(1e-12));
  CHECK(large_scale_fading_db(1.0, 0.0) == doctest::Approx(-34.53).epsilon(1e-12));
  CHECK(large_scale_fading_db(10.0, 5.0) == doctest::Approx(-67.53).epsilon(1e-12));
  // Distances below one meter clamp to one meter.
  CHECK(large_scale_fading_db(0.01, 0.0) == doctest::Approx(-34.53));
  CHECK_THROWS_AS(large_scale_fading_db(std::nan(""), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(large_scale_fading_db(10.0, INFINITY), std::invalid_argument);
}

TEST_CASE("noise_power_dbm") {
  CHECK(noise_power_dbm(2.0e7) == doctest::Approx(-100.9897).epsilon(1e-6));
  CHECK(noise_power_dbm(1.0) == doctest::Approx(-174.0));
  CHECK(noise_power_dbm(1e6) == doctest::Approx(-114.0));
}

TEST_CASE("generate_scenario is deterministic and shaped correctly") {
  const ScenarioConfig cfg = small_config();
  const Scenario a = generate_scenario(cfg);
  const Scenario b = generate_scenario(cfg);
  CHECK(a == b);

  SUBCASE("different seed differs") {
    ScenarioConfig other = cfg;
    other.seed = 43;
    CHECK_FALSE(generate_scenario(other) == a);
  }

  SUBCASE("minimal case") {
    ScenarioConfig tiny;
    tiny.num_aps = 1;
    tiny.antennas_per_ap = 1;
    tiny.num_users = 1;
    tiny.per_ap_power_w = {0.01};
    const Scenario sc = generate_scenario(tiny);
    CHECK(sc.channels.size() == 1);
    CHECK(sc.noise_power_w.size() == 1);
  }

  SUBCASE("headline shape") {
    ScenarioConfig big;
    big.num_aps = 16;
    big.antennas_per_ap = 36;
    big.num_users = 100;
    big.correlation = CorrelationModel::Uncorrelated;  // shape only
    big.seed = 9;
    const Scenario sc = generate_scenario(big);
    CHECK(sc.channels.size() == 100 * 16 * 36);
    CHECK(sc.channel(99, 15).size() == 36);
    CHECK(sc.channels.allFinite());
  }
}

TEST_CASE("config validation names the field") {
  ScenarioConfig cfg = small_config();
  cfg.num_users = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "num_users: must be >= 1",
                       std::invalid_argument);
  cfg = small_config();
  cfg.per_ap_power_w = {0.01, -1.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.bandwidth_hz = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("sample_channel basics") {
  Rng rng(1);
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(4, 4);

  SUBCASE("zero gain gives the zero vector") {
    CHECK(sample_channel(0.0, eye, rng).norm() == 0.0);
  }

  SUBCASE("identity correlation second moment") {
    const double gain = 2.5;
    double acc = 0.0;
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
      acc += sample_channel(gain, eye, rng).squaredNorm() / 4.0;
    }
    CHECK(acc / kDraws == doctest::Approx(gain).epsilon(0.05));
  }

  SUBCASE("rank-one correlation confines draws to the eigenvector") {
    Eigen::VectorXcd dir(3);
    dir << std::complex<double>(1, 0), std::complex<double>(0, 1),
        std::complex<double>(-1, 0);
    dir.normalize();
    const Eigen::MatrixXcd corr = 3.0 * (dir * dir.adjoint());
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXcd h = sample_channel(1.0, corr, rng);
      // Component orthogonal to dir must vanish.
      const Eigen::VectorXcd residual = h - dir * dir.dot(h);
      CHECK(residual.norm() <= 1e-10 * (1.0 + h.norm()));
    }
  }

  SUBCASE("non-PSD correlation rejected") {
    Eigen::MatrixXcd bad = eye;
    bad(0, 0) = -1.0;
    CHECK_THROWS_AS(sample_channel(1.0, bad, rng), std::invalid_argument);
    Eigen::MatrixXcd non_hermitian = eye;
    non_hermitian(0, 1) = std::complex<double>(0.5, 0.0);
    CHECK_THROWS_AS(sample_channel(1.0, non_hermitian, rng), std::invalid_argument);
  }
}

TEST_CASE("local scattering correlation is PSD with unit diagonal") {
  Rng rng(3);
  const Eigen::MatrixXcd corr = local_scattering_correlation(6, 0.7, 0.26, rng);
  CHECK(corr.rows() == 6);
  for (int i = 0; i < 6; ++i) CHECK(corr(i, i).real() == doctest::Approx(1.0));
  CHECK(corr.isApprox(corr.adjoint(), 1e-14));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(corr);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
  // trace(R) = N keeps E||h||^2 = gain * N.
  CHECK(corr.trace().real() == doctest::Approx(6.0));
}

TEST_CASE("empirical second moment matches the correlation matrix") {
  Rng rng(11);
  Eigen::MatrixXcd corr = local_scattering_correlation(3, -0.4, 0.2, rng);
  constexpr int kDraws = 100000;
  Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(3, 3);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3, 3);  // of |g_a conj(g_b)|
  std::vector<Eigen::MatrixXcd> draws;
  for (int i = 0; i < kDraws; ++i) {
    const Eigen::VectorXcd g = sample_channel(1.0, corr, rng);
    const Eigen::MatrixXcd outer = g * g.adjoint();
    mean += outer;
    second += outer.cwiseAbs2().real();
  }
  mean /= kDraws;
  second /= kDraws;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      // Standard error per entry from the empirical spread of the products.
      const double var = second(a, b) - std::norm(mean(a, b));
      const double se = std::sqrt(std::max(var, 0.0) / kDraws);
      CHECK(std::abs(mean(a, b) - corr(a, b)) <= 3.0 * se + 1e-12);
    }
  }
}

TEST_CASE("shadow fading variance") {
  // The generator draws shadow terms as shadow_std_db * normal; check the
  // sampler's variance against 100 dB^2 directly.
  Rng rng(5);
  constexpr int kDraws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double x = 10.0 * rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / kDraws;
  const double var = sum_sq / kDraws - mean * mean;
  CHECK(var == doctest::Approx(100.0).epsilon(0.05));
}

TEST_CASE("noise power equals the dBm conversion") {
  const Scenario sc = generate_scenario(small_config());
  const double expected = dbm_to_watt(noise_power_dbm(sc.config.bandwidth_hz));
  for (int k = 0; k < sc.num_users(); ++k) {
    CHECK(sc.noise_power_w(k) == expected);
  }
}

TEST_CASE("scenario JSON round trip") {
  const Scenario sc = generate_scenario(small_config());
  const auto j = scenario_to_json(sc);
  const Scenario back = scenario_from_json(j);
  CHECK(back == sc);

  SUBCASE("loader rejects shape mismatches") {
    auto broken = j;
    broken["channels"][0].erase(1);  // drop one AP from user 0
    CHECK_THROWS_AS(scenario_from_json(broken), std::invalid_argument);
    broken = j;
    broken["noise_power_w"] = {1.0};
    CHECK_THROWS_AS(scenario_from_json(broken), std::invalid_argument);
  }

  SUBCASE("loader rejects unknown keys") {
    auto extra = j;
    extra["surprise"] = 1;
    CHECK_THROWS_AS(scenario_from_json(extra), std::invalid_argument);
    auto extra_cfg = j;
    extra_cfg["config"]["surprise"] = 1;
    CHECK_THROWS_AS(scenario_from_json(extra_cfg), std::invalid_argument);
  }
}
