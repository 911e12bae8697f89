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

#include "auscqa/optim.hpp"

#include <algorithm>
#include <cmath>

#include "auscqa/error.hpp"

namespace auscqa {

Tensor ParameterStore::add(const std::string& name, const std::string& group,
                           Tensor t) {
  if (index_.count(name)) {
    fail(ErrorKind::kInternal, "duplicate parameter name " + name);
  }
  t.set_requires_grad(!is_frozen(group));
  index_[name] = params_.size();
  params_.push_back({name, group, t});
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::kData, "unknown parameter " + name);
  return params_[it->second].tensor;
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::vector<std::string> ParameterStore::group_names() const {
  std::vector<std::string> names;
  for (const auto& p : params_) {
    if (std::find(names.begin(), names.end(), p.group) == names.end()) {
      names.push_back(p.group);
    }
  }
  return names;
}

void ParameterStore::set_frozen(const std::string& group, bool frozen) {
  frozen_[group] = frozen;
  for (auto& p : params_) {
    if (p.group == group) {
      p.tensor.set_requires_grad(!frozen);
      if (frozen) p.tensor.zero_grad();
    }
  }
}

bool ParameterStore::is_frozen(const std::string& group) const {
  auto it = frozen_.find(group);
  return it != frozen_.end() && it->second;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (auto& p : params_) {
    if (!other.contains(p.name)) continue;
    Tensor src = other.get(p.name);
    if (src.shape() != p.tensor.shape()) {
      shape_error("parameter " + p.name + " " + shape_str(p.tensor.shape()) +
                  " vs " + shape_str(src.shape()));
    }
    std::ranges::copy(src.values(), p.tensor.mutable_values().begin());
  }
}

std::vector<ParameterGroup> make_groups(
    const ParameterStore& store, const std::map<std::string, double>& learning_rates) {
  std::vector<ParameterGroup> groups;
  for (const auto& name : store.group_names()) {
    ParameterGroup g;
    g.name = name;
    auto it = learning_rates.find(name);
    g.learning_rate = it == learning_rates.end() ? 0.0 : it->second;
    g.frozen = store.is_frozen(name);
    for (const auto& p : store.params())
      if (p.group == name) g.tensors.push_back(p);
    groups.push_back(std::move(g));
  }
  return groups;
}

void AdamW::step(std::span<const ParameterGroup> groups) {
  ++step_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (const auto& group : groups) {
    if (group.frozen) continue;
    for (const auto& p : group.tensors) {
      Tensor t = p.tensor;
      if (!t.has_grad()) {
        fail(ErrorKind::kInternal,
             "missing gradient for trainable parameter " + p.name);
      }
      auto& st = state_[p.name];
      if (st.m.empty()) {
        st.m.assign(t.numel(), 0.0);
        st.v.assign(t.numel(), 0.0);
      }
      auto g = t.grad();
      auto w = t.mutable_values();
      const double lr = group.learning_rate;
      for (std::size_t i = 0; i < w.size(); ++i) {
        st.m[i] = options_.beta1 * st.m[i] + (1.0 - options_.beta1) * g[i];
        st.v[i] = options_.beta2 * st.v[i] + (1.0 - options_.beta2) * g[i] * g[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + options_.eps) +
                      options_.weight_decay * w[i]);
      }
    }
  }
}

double clip_grad_norm(std::span<const ParameterGroup> groups, double max_norm) {
  double sq = 0.0;
  for (const auto& group : groups) {
    if (group.frozen) continue;
    for (const auto& p : group.tensors)
      for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (const auto& group : groups) {
      if (group.frozen) continue;
      for (const auto& p : group.tensors) {
        if (!p.tensor.has_grad()) continue;
        // Gradients live on the leaf node; scale them in place.
        for (double& g : p.tensor.node()->grad) g *= s;
      }
    }
  }
  return norm;
}

std::vector<double> normal_values(Rng& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace auscqa
