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

// Differentiable tensor operations. Matrices are rank-2 row-major tensors.
// Broadcasting exists only for trailing-dimension affine terms (add_rowvec,
// mul_rowvec, layernorm gain/bias).

#ifndef AUSCQA_OPS_HPP_
#define AUSCQA_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "auscqa/tensor.hpp"

namespace auscqa::ops {

// [n x k] * [k x m] -> [n x m]. Each output element accumulates its k terms
// in ascending order starting from 0.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// a * s where s is a one-element tensor (differentiable in both).
Tensor scale_by(const Tensor& a, const Tensor& s);
// a[..., c] + v[c]
Tensor add_rowvec(const Tensor& a, const Tensor& v);
// a[..., c] * v[c]
Tensor mul_rowvec(const Tensor& a, const Tensor& v);

Tensor tanh(const Tensor& a);
// Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);

// Normalizes each row over the last dimension (biased variance).
Tensor layernorm(const Tensor& t, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);

// Softmax over the last dimension with max subtraction. Entries equal to
// -inf are treated as masked and receive exactly 0. A row made only of
// masked entries is an error.
Tensor softmax_lastdim(const Tensor& t);

// Sets columns j with keep[j] == false to -inf (key-padding mask).
Tensor mask_columns(const Tensor& scores, std::span<const char> keep);
// Sets entries (i, j) with j > i to -inf.
Tensor mask_causal(const Tensor& scores);

// Non-overlapping 1-D convolution of a mono signal x[L] with
// kernel[d x P], stride == P: out[n][j] = sum_k x[nP + k] * kernel[j][k].
// Result is [L/P x d]; no bias.
Tensor conv1d_nonoverlap(const Tensor& x, const Tensor& kernel,
                         std::size_t stride);

// 2-D convolution with "same" padding (TensorFlow convention: output size
// ceil(in / stride), extra padding on the bottom/right).
// x[Cin x H x W], kernel[Cout x Cin x kh x kw], bias[Cout].
Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                   std::size_t stride_h, std::size_t stride_w);

// x[C x F x T] -> [T x C], averaging over F.
Tensor avgpool_freq(const Tensor& x);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// Rows table[ids[i]] stacked.
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Mean over `positions` of -log softmax(logits[p])[targets[i]].
// logits is [T x V]; positions and targets have equal length.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> positions,
                     std::span<const int> targets);

}  // namespace auscqa::ops

#endif  // AUSCQA_OPS_HPP_
