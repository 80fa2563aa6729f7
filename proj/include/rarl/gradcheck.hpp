// Copyright 2026 The rarl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rarl {

/// Analytic derivatives against central finite differences.
struct ProbeResult {
  std::string op;
  int probes = 0;
  /// Largest ||analytic - numeric|| / max(||analytic||, ||numeric||) over probes.
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int probes = 100;
  /// Names an op whose analytic result is deliberately corrupted (negative control).
  std::string perturb;
};

/// Ops: gaussian_grad_log_prob, gaussian_grad_log_prob_64x64, surrogate_gradient,
/// fisher_vector_product, softmax_grad_log_prob, softmax_fisher_vector_product.
std::vector<ProbeResult> run_gradcheck(const GradcheckOptions& options);
std::vector<std::string> gradcheck_ops();

}  // namespace rarl
