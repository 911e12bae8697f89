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

#include "auscqa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "auscqa/error.hpp"

namespace auscqa::ops {
namespace {

using NodePtr = std::shared_ptr<detail::Node>;
using Grad = std::vector<double>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    shape_error(std::string(op) + " expects rank " + std::to_string(rank) +
                ", got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    shape_error(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
  }
}

std::size_t last_dim(const Tensor& t) {
  if (t.rank() == 0) shape_error("rank-0 tensor");
  return t.shape().back();
}

// out[n x m] += a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out + i * m;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[n x m] += a[n x k] * b[m x k]^T
// Each dot product is summed from zero in p order, then added to out.
void gemm_nt(const double* a, const double* b, double* out, std::size_t n,
             std::size_t k, std::size_t m) {
  std::vector<double> bt(k * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * m + j] = b[j * k + p];
  std::vector<double> acc(m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = bt.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += av * brow[j];
    }
    double* orow = out + i * m;
    for (std::size_t j = 0; j < m; ++j) orow[j] += acc[j];
  }
}

// out[k x m] += a[n x k]^T * b[n x m]
void gemm_tn(const double* a, const double* b, double* out, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* orow = out + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    shape_error("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Grad out(n * m, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), n, k, m);
  NodePtr an = a.node(), bn = b.node();
  return make_result("matmul", {n, m}, std::move(out), {a, b},
                     [an, bn, n, k, m](const Grad& g) {
                       if (an->requires_grad) {
                         Grad ga(n * k, 0.0);
                         gemm_nt(g.data(), bn->value.data(), ga.data(), n, m, k);
                         accumulate_grad(an, ga);
                       }
                       if (bn->requires_grad) {
                         Grad gb(k * m, 0.0);
                         gemm_tn(an->value.data(), g.data(), gb.data(), n, k, m);
                         accumulate_grad(bn, gb);
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Grad out(r * c);
  auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  NodePtr an = a.node();
  return make_result("transpose", {c, r}, std::move(out), {a},
                     [an, r, c](const Grad& g) {
                       Grad ga(r * c);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           ga[i * c + j] = g[j * r + i];
                       accumulate_grad(an, ga);
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result("add", a.shape(), std::move(out), {a, b},
                     [an, bn](const Grad& g) {
                       accumulate_grad(an, g);
                       accumulate_grad(bn, g);
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result("sub", a.shape(), std::move(out), {a, b},
                     [an, bn](const Grad& g) {
                       accumulate_grad(an, g);
                       if (bn->requires_grad) {
                         Grad gb(g.size());
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
                         accumulate_grad(bn, gb);
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result("mul", a.shape(), std::move(out), {a, b},
                     [an, bn](const Grad& g) {
                       Grad t(g.size());
                       if (an->requires_grad) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           t[i] = g[i] * bn->value[i];
                         accumulate_grad(an, t);
                       }
                       if (bn->requires_grad) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           t[i] = g[i] * an->value[i];
                         accumulate_grad(bn, t);
                       }
                     });
}

Tensor scale(const Tensor& a, double s) {
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  NodePtr an = a.node();
  return make_result("scale", a.shape(), std::move(out), {a},
                     [an, s](const Grad& g) {
                       Grad ga(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * s;
                       accumulate_grad(an, ga);
                     });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) shape_error("scale_by expects a one-element scale");
  const double sv = s[0];
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * sv;
  NodePtr an = a.node(), sn = s.node();
  return make_result("scale_by", a.shape(), std::move(out), {a, s},
                     [an, sn](const Grad& g) {
                       const double sv = sn->value[0];
                       if (an->requires_grad) {
                         Grad ga(g.size());
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * sv;
                         accumulate_grad(an, ga);
                       }
                       if (sn->requires_grad) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < g.size(); ++i)
                           acc += g[i] * an->value[i];
                         accumulate_grad(sn, std::span<const double>(&acc, 1));
                       }
                     });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  const std::size_t c = last_dim(a);
  if (v.numel() != c) shape_error("add_rowvec width " + shape_str(v.shape()));
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + v[i % c];
  NodePtr an = a.node(), vn = v.node();
  return make_result("add_rowvec", a.shape(), std::move(out), {a, v},
                     [an, vn, c](const Grad& g) {
                       accumulate_grad(an, g);
                       if (vn->requires_grad) {
                         Grad gv(c, 0.0);
                         for (std::size_t i = 0; i < g.size(); ++i) gv[i % c] += g[i];
                         accumulate_grad(vn, gv);
                       }
                     });
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
  const std::size_t c = last_dim(a);
  if (v.numel() != c) shape_error("mul_rowvec width " + shape_str(v.shape()));
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * v[i % c];
  NodePtr an = a.node(), vn = v.node();
  return make_result("mul_rowvec", a.shape(), std::move(out), {a, v},
                     [an, vn, c](const Grad& g) {
                       if (an->requires_grad) {
                         Grad ga(g.size());
                         for (std::size_t i = 0; i < g.size(); ++i)
                           ga[i] = g[i] * vn->value[i % c];
                         accumulate_grad(an, ga);
                       }
                       if (vn->requires_grad) {
                         Grad gv(c, 0.0);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           gv[i % c] += g[i] * an->value[i];
                         accumulate_grad(vn, gv);
                       }
                     });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(a[i]);
  NodePtr an = a.node();
  return make_result("tanh", a.shape(), y, {a}, [an, y](const Grad& g) {
    Grad ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (1.0 - y[i] * y[i]);
    accumulate_grad(an, ga);
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  Grad out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  NodePtr an = a.node();
  return make_result("gelu", a.shape(), std::move(out), {a},
                     [an](const Grad& g) {
                       Grad ga(g.size());
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double x = an->value[i];
                         const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
                         const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
                         ga[i] = g[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
                       }
                       accumulate_grad(an, ga);
                     });
}

Tensor layernorm(const Tensor& t, const Tensor& gain, const Tensor& bias,
                 double eps) {
  const std::size_t c = last_dim(t);
  if (gain.numel() != c || bias.numel() != c) {
    shape_error("layernorm affine " + shape_str(gain.shape()) + "/" +
                shape_str(bias.shape()) + " for width " + std::to_string(c));
  }
  const std::size_t rows = t.numel() / c;
  Grad out(t.numel()), xhat(t.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = t.values().data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x[j] - mu) * is;
      xhat[r * c + j] = h;
      out[r * c + j] = h * gain[j] + bias[j];
    }
  }
  NodePtr tn = t.node(), gn = gain.node(), bn = bias.node();
  return make_result(
      "layernorm", t.shape(), std::move(out), {t, gain, bias},
      [tn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), c,
       rows](const Grad& g) {
        if (gn->requires_grad || bn->requires_grad) {
          Grad gg(c, 0.0), gb(c, 0.0);
          for (std::size_t i = 0; i < g.size(); ++i) {
            gg[i % c] += g[i] * xhat[i];
            gb[i % c] += g[i];
          }
          accumulate_grad(gn, gg);
          accumulate_grad(bn, gb);
        }
        if (!tn->requires_grad) return;
        Grad gx(g.size());
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = g[r * c + j] * gn->value[j];
            m1 += d;
            m2 += d * xhat[r * c + j];
          }
          m1 *= inv_c;
          m2 *= inv_c;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = g[r * c + j] * gn->value[j];
            gx[r * c + j] = inv_std[r] * (d - m1 - xhat[r * c + j] * m2);
          }
        }
        accumulate_grad(tn, gx);
      });
}

Tensor softmax_lastdim(const Tensor& t) {
  const std::size_t c = last_dim(t);
  if (c == 0) shape_error("softmax over an empty last dimension");
  const std::size_t rows = t.numel() / c;
  Grad out(t.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = t.values().data() + r * c;
    double mx = kNegInf;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x[j]);
    if (mx == kNegInf) {
      fail(ErrorKind::kNumeric, "softmax row is fully masked");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = x[j] == kNegInf ? 0.0 : std::exp(x[j] - mx);
      out[r * c + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] /= z;
  }
  NodePtr tn = t.node();
  std::vector<double> y = out;
  return make_result("softmax", t.shape(), std::move(out), {t},
                     [tn, y = std::move(y), c, rows](const Grad& g) {
                       Grad gx(g.size());
                       for (std::size_t r = 0; r < rows; ++r) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j)
                           dot += g[r * c + j] * y[r * c + j];
                         for (std::size_t j = 0; j < c; ++j)
                           gx[r * c + j] = y[r * c + j] * (g[r * c + j] - dot);
                       }
                       accumulate_grad(tn, gx);
                     });
}

Tensor mask_columns(const Tensor& scores, std::span<const char> keep) {
  const std::size_t c = last_dim(scores);
  if (keep.size() != c) {
    shape_error("mask width " + std::to_string(keep.size()) + " vs " +
                std::to_string(c));
  }
  Grad out(scores.values().begin(), scores.values().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!keep[i % c]) out[i] = kNegInf;
  NodePtr sn = scores.node();
  std::vector<char> k(keep.begin(), keep.end());
  return make_result(
      "mask_columns", scores.shape(), std::move(out), {scores},
      [sn, k = std::move(k), c](const Grad& g) {
        Grad gs(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gs[i] = k[i % c] ? g[i] : 0.0;
        accumulate_grad(sn, gs);
      },
      /*allow_inf=*/true);
}

Tensor mask_causal(const Tensor& scores) {
  require_rank(scores, 2, "mask_causal");
  const std::size_t r = scores.dim(0), c = scores.dim(1);
  Grad out(scores.values().begin(), scores.values().end());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < c; ++j) out[i * c + j] = kNegInf;
  NodePtr sn = scores.node();
  return make_result(
      "mask_causal", scores.shape(), std::move(out), {scores},
      [sn, r, c](const Grad& g) {
        Grad gs(g);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = i + 1; j < c; ++j) gs[i * c + j] = 0.0;
        accumulate_grad(sn, gs);
      },
      /*allow_inf=*/true);
}

Tensor conv1d_nonoverlap(const Tensor& x, const Tensor& kernel,
                         std::size_t stride) {
  require_rank(kernel, 2, "conv1d_nonoverlap kernel");
  const std::size_t d = kernel.dim(0), p = kernel.dim(1);
  if (p != stride || p == 0) {
    shape_error("conv1d_nonoverlap kernel width " + std::to_string(p) +
                " must equal stride " + std::to_string(stride));
  }
  const std::size_t len = x.numel();
  if (len % stride != 0) {
    shape_error("conv1d_nonoverlap input length " + std::to_string(len) +
                " not divisible by stride " + std::to_string(stride));
  }
  const std::size_t n = len / stride;
  Grad out(n * d, 0.0);
  gemm_nt(x.values().data(), kernel.values().data(), out.data(), n, p, d);
  NodePtr xn = x.node(), kn = kernel.node();
  return make_result("conv1d_nonoverlap", {n, d}, std::move(out), {x, kernel},
                     [xn, kn, n, p, d](const Grad& g) {
                       if (kn->requires_grad) {
                         Grad gk(d * p, 0.0);
                         gemm_tn(g.data(), xn->value.data(), gk.data(), n, d, p);
                         accumulate_grad(kn, gk);
                       }
                       if (xn->requires_grad) {
                         Grad gx(n * p, 0.0);
                         gemm_nn(g.data(), kn->value.data(), gx.data(), n, d, p);
                         accumulate_grad(xn, gx);
                       }
                     });
}

Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                   std::size_t stride_h, std::size_t stride_w) {
  require_rank(x, 3, "conv2d_same input");
  require_rank(kernel, 4, "conv2d_same kernel");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) shape_error("conv2d_same channel mismatch");
  if (bias.numel() != cout) shape_error("conv2d_same bias width");
  if (stride_h == 0 || stride_w == 0) shape_error("conv2d_same zero stride");
  const std::size_t oh = (h + stride_h - 1) / stride_h;
  const std::size_t ow = (w + stride_w - 1) / stride_w;
  const std::ptrdiff_t pad_h =
      std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((oh - 1) * stride_h + kh) -
                                      static_cast<std::ptrdiff_t>(h)) / 2;
  const std::ptrdiff_t pad_w =
      std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((ow - 1) * stride_w + kw) -
                                      static_cast<std::ptrdiff_t>(w)) / 2;

  // Visits every (output, kernel tap, input) triple that lands inside x.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t a = 0; a < kh; ++a)
          for (std::size_t b = 0; b < kw; ++b) {
            const std::size_t kidx = ((co * cin + ci) * kh + a) * kw + b;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * stride_h + a) - pad_h;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * stride_w + b) - pad_w;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                fn((co * oh + oy) * ow + ox, kidx,
                   (ci * h + static_cast<std::size_t>(iy)) * w +
                       static_cast<std::size_t>(ix));
              }
            }
          }
  };

  Grad out(cout * oh * ow);
  for (std::size_t co = 0; co < cout; ++co)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(co * oh * ow), oh * ow,
                bias[co]);
  const double* xv = x.values().data();
  const double* kv = kernel.values().data();
  for_each_tap([&](std::size_t o, std::size_t k, std::size_t i) {
    out[o] += kv[k] * xv[i];
  });

  NodePtr xn = x.node(), kn = kernel.node(), bn = bias.node();
  return make_result(
      "conv2d_same", {cout, oh, ow}, std::move(out), {x, kernel, bias},
      [xn, kn, bn, for_each_tap, cout, oh, ow](const Grad& g) {
        if (bn->requires_grad) {
          Grad gb(cout, 0.0);
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < oh * ow; ++i) gb[co] += g[co * oh * ow + i];
          accumulate_grad(bn, gb);
        }
        Grad gk(kn->requires_grad ? kn->value.size() : 0, 0.0);
        Grad gx(xn->requires_grad ? xn->value.size() : 0, 0.0);
        const bool want_k = kn->requires_grad, want_x = xn->requires_grad;
        if (!want_k && !want_x) return;
        for_each_tap([&](std::size_t o, std::size_t k, std::size_t i) {
          if (want_k) gk[k] += g[o] * xn->value[i];
          if (want_x) gx[i] += g[o] * kn->value[k];
        });
        if (want_k) accumulate_grad(kn, gk);
        if (want_x) accumulate_grad(xn, gx);
      });
}

Tensor avgpool_freq(const Tensor& x) {
  require_rank(x, 3, "avgpool_freq");
  const std::size_t c = x.dim(0), f = x.dim(1), t = x.dim(2);
  if (f == 0) shape_error("avgpool_freq over zero frequency bins");
  Grad out(t * c, 0.0);
  const double inv = 1.0 / static_cast<double>(f);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t ti = 0; ti < t; ++ti)
        out[ti * c + ci] += x[(ci * f + fi) * t + ti];
  for (double& v : out) v *= inv;
  NodePtr xn = x.node();
  return make_result("avgpool_freq", {t, c}, std::move(out), {x},
                     [xn, c, f, t, inv](const Grad& g) {
                       Grad gx(c * f * t);
                       for (std::size_t ci = 0; ci < c; ++ci)
                         for (std::size_t fi = 0; fi < f; ++fi)
                           for (std::size_t ti = 0; ti < t; ++ti)
                             gx[(ci * f + fi) * t + ti] = g[ti * c + ci] * inv;
                       accumulate_grad(xn, gx);
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    shape_error("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  NodePtr an = a.node();
  return make_result("reshape", std::move(shape),
                     std::vector<double>(a.values().begin(), a.values().end()),
                     {a}, [an](const Grad& g) { accumulate_grad(an, g); });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank(a, 2, "slice_rows");
  const std::size_t r = a.dim(0), c = a.dim(1);
  if (begin + count > r) shape_error("slice_rows out of range");
  auto v = a.values();
  Grad out(v.begin() + static_cast<std::ptrdiff_t>(begin * c),
           v.begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  NodePtr an = a.node();
  return make_result("slice_rows", {count, c}, std::move(out), {a},
                     [an, begin, count, r, c](const Grad& g) {
                       Grad ga(r * c, 0.0);
                       std::copy(g.begin(), g.end(),
                                 ga.begin() + static_cast<std::ptrdiff_t>(begin * c));
                       accumulate_grad(an, ga);
                       (void)count;
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank(a, 2, "slice_cols");
  const std::size_t r = a.dim(0), c = a.dim(1);
  if (begin + count > c) shape_error("slice_cols out of range");
  Grad out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a[i * c + begin + j];
  NodePtr an = a.node();
  return make_result("slice_cols", {r, count}, std::move(out), {a},
                     [an, begin, count, r, c](const Grad& g) {
                       Grad ga(r * c, 0.0);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           ga[i * c + begin + j] = g[i * count + j];
                       accumulate_grad(an, ga);
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) shape_error("concat_rows of nothing");
  const std::size_t c = parts[0].dim(1);
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) shape_error("concat_rows width mismatch");
    total += p.dim(0);
  }
  Grad out;
  out.reserve(total * c);
  std::vector<NodePtr> nodes;
  std::vector<Tensor> parents(parts.begin(), parts.end());
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    nodes.push_back(p.node());
  }
  return make_result("concat_rows", {total, c}, std::move(out), parents,
                     [nodes](const Grad& g) {
                       std::size_t off = 0;
                       for (const auto& n : nodes) {
                         const std::size_t sz = n->value.size();
                         accumulate_grad(n, std::span<const double>(g.data() + off, sz));
                         off += sz;
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) shape_error("concat_cols of nothing");
  const std::size_t r = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != r) shape_error("concat_cols height mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  Grad out(r * total);
  std::size_t off = 0;
  std::vector<NodePtr> nodes;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = parts[k];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * total + off + j] = p[i * widths[k] + j];
    off += widths[k];
    nodes.push_back(p.node());
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result("concat_cols", {r, total}, std::move(out), parents,
                     [nodes, widths, r, total](const Grad& g) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                         if (nodes[k]->requires_grad) {
                           Grad gp(r * widths[k]);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               gp[i * widths[k] + j] = g[i * total + off + j];
                           accumulate_grad(nodes[k], gp);
                         }
                         off += widths[k];
                       }
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "gather_rows");
  const std::size_t r = table.dim(0), c = table.dim(1);
  Grad out(ids.size() * c);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= r) {
      shape_error("gather_rows id " + std::to_string(ids[i]) + " outside table of " +
                  std::to_string(r));
    }
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(ids[i] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  NodePtr tn = table.node();
  std::vector<int> idv(ids.begin(), ids.end());
  return make_result("gather_rows", {ids.size(), c}, std::move(out), {table},
                     [tn, idv = std::move(idv), r, c](const Grad& g) {
                       Grad gt(r * c, 0.0);
                       for (std::size_t i = 0; i < idv.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           gt[static_cast<std::size_t>(idv[i]) * c + j] += g[i * c + j];
                       accumulate_grad(tn, gt);
                     });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  NodePtr an = a.node();
  return make_result("sum", {1}, {acc}, {a}, [an](const Grad& g) {
    Grad ga(an->value.size(), g[0]);
    accumulate_grad(an, ga);
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) shape_error("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> positions,
                     std::span<const int> targets) {
  require_rank(logits, 2, "cross_entropy");
  if (positions.size() != targets.size() || positions.empty()) {
    shape_error("cross_entropy needs equal, non-empty positions/targets");
  }
  const std::size_t t = logits.dim(0), v = logits.dim(1);
  const double inv_n = 1.0 / static_cast<double>(positions.size());
  // Cached softmax rows for the backward pass.
  Grad probs(positions.size() * v);
  double loss = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::size_t p = positions[i];
    if (p >= t || targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      shape_error("cross_entropy position/target out of range");
    }
    const double* row = logits.values().data() + p * v;
    double mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      const double e = std::exp(row[j] - mx);
      probs[i * v + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
    loss += (mx + std::log(z)) - row[targets[i]];
  }
  loss *= inv_n;
  NodePtr ln = logits.node();
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result("cross_entropy", {1}, {loss}, {logits},
                     [ln, probs = std::move(probs), pos = std::move(pos),
                      tgt = std::move(tgt), t, v, inv_n](const Grad& g) {
                       Grad gl(t * v, 0.0);
                       for (std::size_t i = 0; i < pos.size(); ++i) {
                         for (std::size_t j = 0; j < v; ++j)
                           gl[pos[i] * v + j] += g[0] * inv_n * probs[i * v + j];
                         gl[pos[i] * v + static_cast<std::size_t>(tgt[i])] -= g[0] * inv_n;
                       }
                       accumulate_grad(ln, gl);
                     });
}

}  // namespace auscqa::ops
