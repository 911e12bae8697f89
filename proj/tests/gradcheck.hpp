// Copyright 2026 The auscqa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference oracle for reverse-mode gradients. Test-only:
// it perturbs leaf values directly and never looks at backward closures.

#ifndef AUSCQA_TESTS_GRADCHECK_HPP_
#define AUSCQA_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "auscqa/tensor.hpp"

namespace auscqa::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "<leaf index>[<element>]"
};

// Relative error; the 1e-3 floor keeps exact zeros from dividing by ~0.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-3, std::abs(a), std::abs(b)});
}

// `loss_fn` must rebuild the graph from the current leaf values on every
// call. At most `max_elems` entries per leaf are probed (evenly strided).
inline GradCheckResult grad_check(const std::function<Tensor()>& loss_fn,
                                  std::vector<Tensor> leaves,
                                  std::size_t max_elems = 64) {
  for (auto& t : leaves) t.zero_grad();
  backward(loss_fn());
  GradCheckResult res;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& t = leaves[li];
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.numel(), 0.0);
    const std::size_t n = t.numel();
    const std::size_t step = std::max<std::size_t>(1, n / max_elems);
    for (std::size_t i = 0; i < n; i += step) {
      auto vals = t.mutable_values();
      const double x0 = vals[i];
      const double h = 1e-5 * std::max(1.0, std::abs(x0));
      vals[i] = x0 + h;
      const double up = loss_fn().item();
      vals[i] = x0 - h;
      const double down = loss_fn().item();
      vals[i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double e = rel_err(analytic[i], numeric);
      if (e > res.max_rel_err) {
        res.max_rel_err = e;
        res.worst = std::to_string(li) + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (auto& t : leaves) t.zero_grad();
  return res;
}

}  // namespace auscqa::testing

#endif  // AUSCQA_TESTS_GRADCHECK_HPP_
