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

#include "auscqa/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "auscqa/error.hpp"

namespace auscqa {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor() : Tensor(Shape{1}) {}

Tensor::Tensor(Shape shape) : node_(std::make_shared<detail::Node>()) {
  node_->value.assign(shape_numel(shape), 0.0);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != values.size()) {
    shape_error("tensor " + shape_str(shape) + " given " +
                std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

std::span<double> Tensor::mutable_values() {
  if (!node_->leaf) {
    fail(ErrorKind::kInternal, "in-place write to a non-leaf tensor");
  }
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    shape_error("item() on tensor " + shape_str(shape()));
  }
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) {
    fail(ErrorKind::kInternal, "requires_grad can only be set on leaves");
  }
  node_->requires_grad = on;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value); }

void accumulate_grad(const std::shared_ptr<detail::Node>& t,
                     std::span<const double> g) {
  if (!t->requires_grad) return;
  auto& buf = t->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents,
                   std::function<void(const std::vector<double>&)> grad_fn,
                   bool allow_inf) {
  if (!allow_inf) {
    for (double v : values) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::kNumeric,
             std::string("non-finite value produced by ") + op);
      }
    }
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->leaf = false;
  node->op = op;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->backward = std::move(grad_fn);
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  const auto& root = loss.node();
  if (root->value.size() != 1) {
    shape_error("backward() needs a scalar loss, got " + shape_str(root->shape));
  }
  if (root->consumed) {
    fail(ErrorKind::kInternal,
         "backward() called twice on the same graph; rebuild the forward pass");
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS; reversed it is a valid topological order.
  // `order` holds ownership so releasing parents mid-sweep frees nothing early.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      std::shared_ptr<detail::Node> p = node->parents[next++];
      if (p->requires_grad && !p->leaf && seen.insert(p.get()).second) {
        stack.emplace_back(std::move(p), 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = it->get();
    if (node->backward && !node->grad.empty()) node->backward(node->grad);
    node->backward = nullptr;
    node->parents.clear();
    node->consumed = true;
    if (node != root.get()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

}  // namespace auscqa
