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
//
// Test-only reference implementations. Everything here recomputes results
// through an independent path (dense algebra, complex arithmetic, grid
// search) and must not call into the structured kernels it cross-checks.

#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/lifting.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo::testing {

/// Dense full-update ADMM state; all three steps use dense linear algebra on
/// a materialized constraint matrix.
struct DenseAdmmState {
  Eigen::VectorXd v;
  Eigen::VectorXd w;
  Eigen::VectorXd lambda;
};

DenseAdmmState dense_admm_init(const LiftedProblem& problem);

/// One full iteration: per-block dense normal-equation solves, blockwise
/// prox via an inline projection, dual ascent.
void dense_admm_iterate(const LiftedProblem& problem, const Eigen::MatrixXd& dense_a,
                        double beta, DenseAdmmState& state);

/// Independent reimplementation of the per-user rate formula with explicit
/// complex accumulation loops.
Eigen::VectorXd rates_reference(const Scenario& scenario,
                                const std::vector<std::complex<double>>& beamformers);

/// Best achievable single-user rate found by iterated grid refinement over
/// per-AP amplitudes and the relative phase; M = 2, N = 1 instances only.
double grid_search_single_user_rate(const Scenario& scenario, int rounds = 6,
                                    int steps = 21);

/// Nearest feasible point by iterated grid refinement; feasible(x) decides
/// membership. Dimension must stay tiny (the grid is dense).
Eigen::VectorXd grid_project(const Eigen::VectorXd& target,
                             const std::function<bool(const Eigen::VectorXd&)>& feasible,
                             double half_range, int rounds = 8, int steps = 21);

}  // namespace cfmimo::testing
