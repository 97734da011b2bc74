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

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfmimo {

/// Intra-solve threading control. threads == 1 runs the plain serial loops,
/// which are the reference the parallel path is tested against.
struct ExecPolicy {
  int threads = 1;

  bool parallel() const { return threads > 1; }
};

/// Runs body(i, thread_id) for i in [0, n). All parallel loops in this
/// project write to disjoint outputs, so the result is identical for any
/// thread count; reductions are always accumulated serially by the caller.
template <class F>
inline void parallel_for(const ExecPolicy& exec, std::ptrdiff_t n, F&& body) {
#ifdef _OPENMP
  if (exec.parallel() && n > 1) {
#pragma omp parallel for schedule(static) num_threads(exec.threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      body(i, omp_get_thread_num());
    }
    return;
  }
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    body(i, 0);
  }
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace cfmimo
