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

#include "cfmimo/scenario.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "cfmimo/units.hpp"

namespace cfmimo {

namespace {

constexpr double kMinDistanceM = 1.0;
constexpr double kPsdTolerance = 1e-10;

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

ScenarioConfig ScenarioConfig::resolved() const {
  ScenarioConfig out = *this;
  if (out.per_ap_power_w.empty()) {
    out.per_ap_power_w.assign(static_cast<std::size_t>(std::max(num_aps, 0)), 0.01);
  }
  return out;
}

void ScenarioConfig::validate() const {
  require(num_aps >= 1, "num_aps: must be >= 1");
  require(antennas_per_ap >= 1, "antennas_per_ap: must be >= 1");
  require(num_users >= 1, "num_users: must be >= 1");
  require(area_side_m > 0.0 && std::isfinite(area_side_m), "area_side_m: must be > 0");
  require(bandwidth_hz > 0.0 && std::isfinite(bandwidth_hz), "bandwidth_hz: must be > 0");
  require(shadow_std_db >= 0.0 && std::isfinite(shadow_std_db),
          "shadow_std_db: must be >= 0");
  require(std::isfinite(pathloss_offset_db), "pathloss_offset_db: must be finite");
  require(std::isfinite(pathloss_exponent_db_per_decade),
          "pathloss_exponent_db_per_decade: must be finite");
  require(angular_spread_deg >= 0.0 && std::isfinite(angular_spread_deg),
          "angular_spread_deg: must be >= 0");
  const ScenarioConfig r = resolved();
  require(static_cast<int>(r.per_ap_power_w.size()) == num_aps,
          "per_ap_power_w: length must equal num_aps");
  for (double p : r.per_ap_power_w) {
    require(p > 0.0 && std::isfinite(p), "per_ap_power_w: entries must be > 0");
  }
}

bool Scenario::operator==(const Scenario& other) const {
  const ScenarioConfig a = config.resolved();
  const ScenarioConfig b = other.config.resolved();
  const bool config_equal =
      a.num_aps == b.num_aps && a.antennas_per_ap == b.antennas_per_ap &&
      a.num_users == b.num_users && a.area_side_m == b.area_side_m &&
      a.per_ap_power_w == b.per_ap_power_w && a.bandwidth_hz == b.bandwidth_hz &&
      a.shadow_std_db == b.shadow_std_db && a.pathloss_offset_db == b.pathloss_offset_db &&
      a.pathloss_exponent_db_per_decade == b.pathloss_exponent_db_per_decade &&
      a.correlation == b.correlation && a.angular_spread_deg == b.angular_spread_deg &&
      a.seed == b.seed;
  return config_equal && ap_positions == other.ap_positions &&
         user_positions == other.user_positions && channels == other.channels &&
         noise_power_w == other.noise_power_w;
}

double large_scale_fading_db(double distance_m, double shadow_db, double offset_db,
                             double exponent_db_per_decade) {
  if (!std::isfinite(distance_m) || !std::isfinite(shadow_db)) {
    throw std::invalid_argument("large_scale_fading_db: non-finite input");
  }
  const double d = std::max(distance_m, kMinDistanceM);
  return offset_db - exponent_db_per_decade * std::log10(d) + shadow_db;
}

Eigen::MatrixXcd local_scattering_correlation(int num_antennas, double nominal_angle_rad,
                                              double angular_spread_rad, Rng& rng,
                                              int num_samples) {
  const int n = num_antennas;
  // The correlation only depends on the antenna index difference, so average
  // the first column and expand the Toeplitz structure.
  Eigen::VectorXcd first = Eigen::VectorXcd::Zero(n);
  for (int s = 0; s < num_samples; ++s) {
    const double angle = nominal_angle_rad + angular_spread_rad * rng.normal();
    const double sine = std::sin(angle);
    for (int d = 0; d < n; ++d) {
      first(d) += std::exp(std::complex<double>(0.0, M_PI * d * sine));
    }
  }
  first /= static_cast<double>(num_samples);
  Eigen::MatrixXcd corr(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      corr(a, b) = a >= b ? first(a - b) : std::conj(first(b - a));
    }
  }
  return corr;
}

Eigen::VectorXcd sample_channel(double gain_linear, const Eigen::MatrixXcd& correlation,
                                Rng& rng) {
  if (!(gain_linear >= 0.0) || !std::isfinite(gain_linear)) {
    throw std::invalid_argument("sample_channel: gain must be finite and >= 0");
  }
  const Eigen::Index n = correlation.rows();
  if (correlation.cols() != n) {
    throw std::invalid_argument("sample_channel: correlation must be square");
  }
  if (!correlation.isApprox(correlation.adjoint(), kPsdTolerance)) {
    throw std::invalid_argument("sample_channel: correlation must be Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(correlation);
  if (eig.info() != Eigen::Success) {
    throw std::invalid_argument("sample_channel: eigendecomposition failed");
  }
  const Eigen::VectorXd values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -kPsdTolerance * scale) {
    throw std::invalid_argument("sample_channel: correlation is not PSD");
  }
  Eigen::VectorXcd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.complex_normal();
  const Eigen::MatrixXcd sqrt_corr =
      eig.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return std::sqrt(gain_linear) * (sqrt_corr * z);
}

Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  const ScenarioConfig cfg = config.resolved();
  const int M = cfg.num_aps;
  const int N = cfg.antennas_per_ap;
  const int K = cfg.num_users;

  Scenario sc;
  sc.config = cfg;
  sc.ap_positions.resize(2, M);
  sc.user_positions.resize(2, K);
  sc.channels.resize(static_cast<Eigen::Index>(K) * M * N);
  sc.noise_power_w.resize(K);

  // One stream, fixed draw order: AP positions, user positions, then per
  // (user, AP) the shadow term, scattering angles and small-scale fading.
  Rng rng(cfg.seed);
  for (int m = 0; m < M; ++m) {
    sc.ap_positions(0, m) = rng.uniform(0.0, cfg.area_side_m);
    sc.ap_positions(1, m) = rng.uniform(0.0, cfg.area_side_m);
  }
  for (int k = 0; k < K; ++k) {
    sc.user_positions(0, k) = rng.uniform(0.0, cfg.area_side_m);
    sc.user_positions(1, k) = rng.uniform(0.0, cfg.area_side_m);
  }

  const double noise_w = dbm_to_watt(noise_power_dbm(cfg.bandwidth_hz));
  sc.noise_power_w.setConstant(noise_w);

  const double spread_rad = cfg.angular_spread_deg * M_PI / 180.0;
  const Eigen::MatrixXcd identity = Eigen::MatrixXcd::Identity(N, N);
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M; ++m) {
      const Eigen::Vector2d delta = sc.user_positions.col(k) - sc.ap_positions.col(m);
      const double distance = delta.norm();
      const double shadow = cfg.shadow_std_db * rng.normal();
      const double gain_db = large_scale_fading_db(
          distance, shadow, cfg.pathloss_offset_db, cfg.pathloss_exponent_db_per_decade);
      Eigen::MatrixXcd corr;
      if (cfg.correlation == CorrelationModel::LocalScattering) {
        const double nominal = std::atan2(delta.y(), delta.x());
        corr = local_scattering_correlation(N, nominal, spread_rad, rng);
      } else {
        corr = identity;
      }
      const Eigen::VectorXcd h = sample_channel(db_to_linear(gain_db), corr, rng);
      sc.channels.segment((static_cast<Eigen::Index>(k) * M + m) * N, N) = h;
    }
  }
  return sc;
}

}  // namespace cfmimo
