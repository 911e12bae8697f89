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

// Dense row-major float64 tensors with a per-forward reverse-mode graph.
//
// A Tensor is a cheap handle to a graph node. Leaves (parameters, inputs) own
// their values; op results additionally hold a backward closure and their
// parents. The graph is consumed by backward(): intermediate nodes release
// their closures, and a second backward() through the same loss throws.
// Leaf gradients accumulate across distinct graphs until zero_grad().

#ifndef AUSCQA_TENSOR_HPP_
#define AUSCQA_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace auscqa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const std::vector<double>&)> backward;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor parameter(Shape shape, std::vector<double> values);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  // Leaves only: op results are immutable once built.
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Copy of the values as a fresh leaf with no graph history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Populates gradients of every requires_grad leaf reachable from `loss`.
// `loss` must hold exactly one element.
void backward(const Tensor& loss);

// Builds an op result. `grad_fn` is attached only if some parent requires
// gradients. Results are checked for NaN/Inf unless `allow_inf`.
Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents,
                   std::function<void(const std::vector<double>&)> grad_fn,
                   bool allow_inf = false);

// Accumulates `g` into the gradient of `t` (no-op if `t` does not require
// gradients). Used inside backward closures.
void accumulate_grad(const std::shared_ptr<detail::Node>& t,
                     std::span<const double> g);

}  // namespace auscqa

#endif  // AUSCQA_TENSOR_HPP_
