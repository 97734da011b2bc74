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
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/rng.hpp"

namespace cfmimo {

enum class CorrelationModel {
  Uncorrelated,     ///< R = I
  LocalScattering,  ///< half-wavelength ULA, Gaussian angular perturbations
};

struct ScenarioConfig {
  int num_aps = 16;          // M
  int antennas_per_ap = 36;  // N
  int num_users = 100;       // K
  double area_side_m = 500.0;
  /// Per-AP transmit power budget in watts. Empty means 10 mW for every AP.
  std::vector<double> per_ap_power_w;
  double bandwidth_hz = 2.0e7;
  double shadow_std_db = 10.0;
  double pathloss_offset_db = -34.53;
  double pathloss_exponent_db_per_decade = 38.0;
  CorrelationModel correlation = CorrelationModel::LocalScattering;
  double angular_spread_deg = 15.0;
  std::uint64_t seed = 1;

  /// Returns a copy with per_ap_power_w expanded to length num_aps.
  ScenarioConfig resolved() const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// A generated deployment: geometry, channels and noise, all in SI units.
/// The channel tensor is stored flat as user-major / AP / antenna.
struct Scenario {
  ScenarioConfig config;
  Eigen::Matrix2Xd ap_positions;    // 2 x M, meters
  Eigen::Matrix2Xd user_positions;  // 2 x K, meters
  Eigen::VectorXcd channels;        // K*M*N entries, index k*M*N + m*N + n
  Eigen::VectorXd noise_power_w;    // K

  int num_aps() const { return config.num_aps; }
  int antennas_per_ap() const { return config.antennas_per_ap; }
  int num_users() const { return config.num_users; }

  Eigen::Map<const Eigen::VectorXcd> channel(int user, int ap) const {
    const int n = config.antennas_per_ap;
    return {channels.data() + (static_cast<Eigen::Index>(user) * config.num_aps + ap) * n,
            n};
  }

  /// Joint channel of one user across all APs (length M*N).
  Eigen::Map<const Eigen::VectorXcd> joint_channel(int user) const {
    const Eigen::Index mn =
        static_cast<Eigen::Index>(config.num_aps) * config.antennas_per_ap;
    return {channels.data() + user * mn, mn};
  }

  bool operator==(const Scenario& other) const;
};

/// Large-scale fading in dB at a given distance, with an additive shadow
/// term. Distances below 1 m are clamped to 1 m.
double large_scale_fading_db(double distance_m, double shadow_db,
                             double offset_db = -34.53,
                             double exponent_db_per_decade = 38.0);

/// Spatial correlation of a half-wavelength ULA under local scattering:
/// the nominal arrival angle is perturbed by num_samples Gaussian draws of
/// the given spread and the rank-one terms are averaged, which keeps the
/// result Hermitian PSD by construction.
Eigen::MatrixXcd local_scattering_correlation(int num_antennas, double nominal_angle_rad,
                                              double angular_spread_rad, Rng& rng,
                                              int num_samples = 200);

/// Draws h = sqrt(gain) * L * z with L L^H = R and z standard complex
/// normal, so E||h||^2 = gain * trace(R). Throws if R is not Hermitian PSD
/// within tolerance 1e-10.
Eigen::VectorXcd sample_channel(double gain_linear, const Eigen::MatrixXcd& correlation,
                                Rng& rng);

/// Deterministic given (config, seed): same inputs produce a bit-identical
/// scenario.
Scenario generate_scenario(const ScenarioConfig& config);

}  // namespace cfmimo
