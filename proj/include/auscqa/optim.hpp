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

#ifndef AUSCQA_OPTIM_HPP_
#define AUSCQA_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "auscqa/tensor.hpp"

namespace auscqa {

// Group tags used throughout the model.
inline constexpr const char* kGroupEncoder = "encoder";
inline constexpr const char* kGroupAdapter = "adapter";
inline constexpr const char* kGroupLm = "lm";

struct NamedParam {
  std::string name;
  std::string group;
  Tensor tensor;
};

// Owns the named trainable tensors of a model. Every parameter carries
// exactly one group tag.
class ParameterStore {
 public:
  Tensor add(const std::string& name, const std::string& group, Tensor t);
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<std::string> group_names() const;

  // Marks every tensor of `group` as (non-)trainable.
  void set_frozen(const std::string& group, bool frozen);
  bool is_frozen(const std::string& group) const;
  void zero_grad();

  // Copies values from `other` for every name present in both.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<NamedParam> params_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, bool> frozen_;
};

struct ParameterGroup {
  std::string name;
  std::vector<NamedParam> tensors;
  double learning_rate = 0.0;
  bool frozen = false;
};

// Builds one ParameterGroup per tag present in `store`. Tags missing from
// `learning_rates` get a rate of 0.
std::vector<ParameterGroup> make_groups(const ParameterStore& store,
                                        const std::map<std::string, double>& learning_rates);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with bias correction and decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : options_(options) {}

  // Advances the step counter and updates every non-frozen group. Throws if a
  // trainable tensor has no gradient.
  void step(std::span<const ParameterGroup> groups);
  std::int64_t steps() const { return step_; }
  const AdamWOptions& options() const { return options_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWOptions options_;
  std::int64_t step_ = 0;
  std::map<std::string, Moments> state_;
};

// Scales gradients of non-frozen groups so their global L2 norm is at most
// `max_norm`. Returns the norm before clipping.
double clip_grad_norm(std::span<const ParameterGroup> groups, double max_norm);

using Rng = std::mt19937_64;

// Normal(0, stddev) initialized values.
std::vector<double> normal_values(Rng& rng, std::size_t n, double stddev);

}  // namespace auscqa

#endif  // AUSCQA_OPTIM_HPP_
