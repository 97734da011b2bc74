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

#include <vector>

#include <Eigen/Dense>

#include "cfmimo/parallel.hpp"

namespace cfmimo {

enum class ConeKind {
  SecondOrderCone,  ///< { (rest, last) : ||rest|| <= last }
  PowerBall,        ///< Euclidean ball of a given radius
};

struct ConeBlock {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
  ConeKind kind = ConeKind::SecondOrderCone;
  double radius = 0.0;  // PowerBall only
};

/// Cartesian product of per-user second-order cones followed by per-AP
/// power balls. The QoS variant carries the cones only.
struct ConeLayout {
  std::vector<ConeBlock> blocks;
  Eigen::Index total_length = 0;
  int num_soc = 0;
  int num_ball = 0;

  static ConeLayout product(int num_users, Eigen::Index soc_length,
                            const Eigen::VectorXd& ball_radii, Eigen::Index ball_length);
  static ConeLayout soc_only(int num_users, Eigen::Index soc_length);
};

// -- low-level kernels on raw spans (used inside the solver loops) ----------

/// Exact Euclidean projection onto { ||rest|| <= last }; x and out may alias.
void project_soc_span(const double* x, double* out, Eigen::Index n);

/// Exact projection onto the ball of the given radius; x and out may alias.
void project_ball_span(const double* x, double* out, Eigen::Index n, double radius);

/// Membership with tolerance 1e-12 * (1 + ||block||); boundary points count
/// as members so the proximal map below is continuous across the boundary.
bool in_cone_span(const double* x, Eigen::Index n, ConeKind kind, double radius);

/// prox of the half-squared-distance to the cone with weight `weight`:
/// returns x unchanged for members, else (weight*x + Proj(x)) / (1 + weight).
void prox_distance_span(const double* x, double* out, Eigen::Index n, ConeKind kind,
                        double radius, double weight);

// -- vector-level operations -------------------------------------------------

Eigen::VectorXd project_soc(const Eigen::VectorXd& x);
Eigen::VectorXd project_power_block(const Eigen::VectorXd& x, double radius);

/// Blockwise projection onto the whole product set.
Eigen::VectorXd project_D(const Eigen::VectorXd& w, const ConeLayout& layout,
                          const ExecPolicy& exec = {});
void project_D_into(const Eigen::VectorXd& w, const ConeLayout& layout,
                    Eigen::Ref<Eigen::VectorXd> out, const ExecPolicy& exec = {});

/// f(w) = 1/2 * dist(w, D)^2. Zero exactly on members of the product set.
double f_value(const Eigen::VectorXd& w, const ConeLayout& layout,
               const ExecPolicy& exec = {});

/// grad f(w) = w - Proj_D(w); 1-Lipschitz.
Eigen::VectorXd f_gradient(const Eigen::VectorXd& w, const ConeLayout& layout,
                           const ExecPolicy& exec = {});

/// Proximal map of the per-block half-squared-distance, see prox_distance_span.
Eigen::VectorXd prox_f_block(const Eigen::VectorXd& d, double weight, ConeKind kind,
                             double radius = 0.0);

}  // namespace cfmimo
