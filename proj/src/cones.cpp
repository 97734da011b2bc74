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

#include "cfmimo/cones.hpp"

#include <cmath>
#include <stdexcept>

namespace cfmimo {

namespace {

constexpr double kMembershipTol = 1e-12;

double span_norm(const double* x, Eigen::Index n) {
  return Eigen::Map<const Eigen::VectorXd>(x, n).norm();
}

void check_layout(const Eigen::VectorXd& w, const ConeLayout& layout) {
  if (w.size() != layout.total_length) {
    throw std::invalid_argument("cone layout: vector length mismatch");
  }
}

}  // namespace

ConeLayout ConeLayout::product(int num_users, Eigen::Index soc_length,
                               const Eigen::VectorXd& ball_radii,
                               Eigen::Index ball_length) {
  ConeLayout layout = soc_only(num_users, soc_length);
  for (Eigen::Index m = 0; m < ball_radii.size(); ++m) {
    layout.blocks.push_back({layout.total_length, ball_length, ConeKind::PowerBall,
                             ball_radii(m)});
    layout.total_length += ball_length;
    ++layout.num_ball;
  }
  return layout;
}

ConeLayout ConeLayout::soc_only(int num_users, Eigen::Index soc_length) {
  ConeLayout layout;
  layout.blocks.reserve(static_cast<std::size_t>(num_users));
  for (int k = 0; k < num_users; ++k) {
    layout.blocks.push_back(
        {layout.total_length, soc_length, ConeKind::SecondOrderCone, 0.0});
    layout.total_length += soc_length;
    ++layout.num_soc;
  }
  layout.num_soc = num_users;
  return layout;
}

void project_soc_span(const double* x, double* out, Eigen::Index n) {
  const Eigen::Index rest = n - 1;
  const double last = x[rest];
  const double rest_norm = span_norm(x, rest);
  if (rest_norm <= last) {
    if (out != x) std::copy(x, x + n, out);
    return;
  }
  if (rest_norm <= -last) {
    std::fill(out, out + n, 0.0);
    return;
  }
  // rest_norm > |last| >= 0 here, so the division is safe.
  const double scale = 0.5 * (1.0 + last / rest_norm);
  for (Eigen::Index i = 0; i < rest; ++i) out[i] = scale * x[i];
  out[rest] = 0.5 * (last + rest_norm);
}

void project_ball_span(const double* x, double* out, Eigen::Index n, double radius) {
  const double norm = span_norm(x, n);
  if (norm <= radius) {
    if (out != x) std::copy(x, x + n, out);
    return;
  }
  const double scale = radius / norm;
  for (Eigen::Index i = 0; i < n; ++i) out[i] = scale * x[i];
}

bool in_cone_span(const double* x, Eigen::Index n, ConeKind kind, double radius) {
  const double tol = kMembershipTol * (1.0 + span_norm(x, n));
  if (kind == ConeKind::SecondOrderCone) {
    return span_norm(x, n - 1) <= x[n - 1] + tol;
  }
  return span_norm(x, n) <= radius + tol;
}

void prox_distance_span(const double* x, double* out, Eigen::Index n, ConeKind kind,
                        double radius, double weight) {
  if (in_cone_span(x, n, kind, radius)) {
    if (out != x) std::copy(x, x + n, out);
    return;
  }
  Eigen::VectorXd projected(n);
  if (kind == ConeKind::SecondOrderCone) {
    project_soc_span(x, projected.data(), n);
  } else {
    project_ball_span(x, projected.data(), n, radius);
  }
  const double inv = 1.0 / (1.0 + weight);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = (weight * x[i] + projected(i)) * inv;
  }
}

Eigen::VectorXd project_soc(const Eigen::VectorXd& x) {
  if (x.size() < 2) throw std::invalid_argument("project_soc: length must be >= 2");
  Eigen::VectorXd out(x.size());
  project_soc_span(x.data(), out.data(), x.size());
  return out;
}

Eigen::VectorXd project_power_block(const Eigen::VectorXd& x, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_power_block: radius must be > 0");
  Eigen::VectorXd out(x.size());
  project_ball_span(x.data(), out.data(), x.size(), radius);
  return out;
}

void project_D_into(const Eigen::VectorXd& w, const ConeLayout& layout,
                    Eigen::Ref<Eigen::VectorXd> out, const ExecPolicy& exec) {
  check_layout(w, layout);
  parallel_for(exec, static_cast<std::ptrdiff_t>(layout.blocks.size()),
               [&](std::ptrdiff_t i, int) {
                 const ConeBlock& blk = layout.blocks[static_cast<std::size_t>(i)];
                 if (blk.kind == ConeKind::SecondOrderCone) {
                   project_soc_span(w.data() + blk.offset, out.data() + blk.offset,
                                    blk.length);
                 } else {
                   project_ball_span(w.data() + blk.offset, out.data() + blk.offset,
                                     blk.length, blk.radius);
                 }
               });
}

Eigen::VectorXd project_D(const Eigen::VectorXd& w, const ConeLayout& layout,
                          const ExecPolicy& exec) {
  Eigen::VectorXd out(w.size());
  project_D_into(w, layout, out, exec);
  return out;
}

double f_value(const Eigen::VectorXd& w, const ConeLayout& layout,
               const ExecPolicy& exec) {
  check_layout(w, layout);
  // Per-block contributions land in distinct slots and are summed serially
  // in block order, so the result does not depend on the thread count.
  Eigen::VectorXd partial = Eigen::VectorXd::Zero(layout.blocks.size());
  parallel_for(exec, static_cast<std::ptrdiff_t>(layout.blocks.size()),
               [&](std::ptrdiff_t i, int) {
                 const ConeBlock& blk = layout.blocks[static_cast<std::size_t>(i)];
                 Eigen::VectorXd projected(blk.length);
                 if (blk.kind == ConeKind::SecondOrderCone) {
                   project_soc_span(w.data() + blk.offset, projected.data(), blk.length);
                 } else {
                   project_ball_span(w.data() + blk.offset, projected.data(), blk.length,
                                     blk.radius);
                 }
                 partial(i) =
                     (w.segment(blk.offset, blk.length) - projected).squaredNorm();
               });
  return 0.5 * partial.sum();
}

Eigen::VectorXd f_gradient(const Eigen::VectorXd& w, const ConeLayout& layout,
                           const ExecPolicy& exec) {
  Eigen::VectorXd projected(w.size());
  project_D_into(w, layout, projected, exec);
  return w - projected;
}

Eigen::VectorXd prox_f_block(const Eigen::VectorXd& d, double weight, ConeKind kind,
                             double radius) {
  if (!(weight > 0.0)) throw std::invalid_argument("prox_f_block: weight must be > 0");
  Eigen::VectorXd out(d.size());
  prox_distance_span(d.data(), out.data(), d.size(), kind, radius, weight);
  return out;
}

}  // namespace cfmimo
