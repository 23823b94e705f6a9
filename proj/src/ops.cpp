/* Copyright 2026 The normkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "normkit/ops.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "normkit/kernels.hpp"

namespace normkit {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

std::vector<Index> strides_for(const Shape& shape, const Shape& out) {
  // Row-major strides of `shape` with 0 on broadcast axes.
  std::vector<Index> strides(out.size(), 0);
  Index stride = 1;
  for (std::size_t a = shape.size(); a-- > 0;) {
    strides[a] = shape[a] == out[a] ? stride : 0;
    stride *= shape[a];
  }
  return strides;
}

// Gathers `t` into the broadcast shape `out`.
Eigen::ArrayXd expand(const Tensor& t, const Shape& out) {
  if (t.shape() == out) return t.values();
  const auto strides = strides_for(t.shape(), out);
  const Index n = numel(out);
  Eigen::ArrayXd result(n);
  std::vector<Index> idx(out.size(), 0);
  Index offset = 0;
  for (Index flat = 0; flat < n; ++flat) {
    result[flat] = t[offset];
    for (std::size_t a = out.size(); a-- > 0;) {
      offset += strides[a];
      if (++idx[a] < out[a]) break;
      offset -= strides[a] * out[a];
      idx[a] = 0;
    }
  }
  return result;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_rank(const Tensor& t, Index rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

// Lays the k x k patches of one example out as (C*k*k) x (Ho*Wo).
RowMatrix im2col(const double* x, Index channels, Index height, Index width, Index k,
                 Index pad, Index stride, Index out_h, Index out_w) {
  RowMatrix cols = RowMatrix::Zero(channels * k * k, out_h * out_w);
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= height) continue;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= width) continue;
            cols(row, oy * out_w + ox) = x[(c * height + iy) * width + ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMatrix& cols, double* dx, Index channels, Index height, Index width,
            Index k, Index pad, Index stride, Index out_h, Index out_w) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= height) continue;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= width) continue;
            dx[(c * height + iy) * width + ix] += cols(row, oy * out_w + ox);
          }
        }
      }
    }
  }
}

struct ConvGeometry {
  Index n, c, h, w, f, k, out_h, out_w;
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, Index pad, Index stride) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weights");
  if (pad < 0 || stride < 1) {
    throw ShapeError("conv2d: need pad >= 0 and stride >= 1");
  }
  const Index k = w.extent(2);
  if (w.extent(3) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd extent, got " +
                     to_string(w.shape()));
  }
  if (w.extent(1) != x.extent(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(x.extent(1)) +
                     " channels, weights expect " + std::to_string(w.extent(1)));
  }
  ConvGeometry g{x.extent(0), x.extent(1), x.extent(2), x.extent(3), w.extent(0), k, 0, 0};
  g.out_h = conv_output_extent(g.h, k, pad, stride);
  g.out_w = conv_output_extent(g.w, k, pad, stride);
  return g;
}

}  // namespace

bool is_binary(ElementOp op) {
  return op == ElementOp::kAdd || op == ElementOp::kSub || op == ElementOp::kMul ||
         op == ElementOp::kDiv;
}

const char* name(ElementOp op) {
  switch (op) {
    case ElementOp::kAdd: return "add";
    case ElementOp::kSub: return "sub";
    case ElementOp::kMul: return "mul";
    case ElementOp::kDiv: return "div";
    case ElementOp::kAbs: return "abs";
    case ElementOp::kSqrt: return "sqrt";
    case ElementOp::kTanh: return "tanh";
    case ElementOp::kSigmoid: return "sigmoid";
    case ElementOp::kRelu: return "relu";
    case ElementOp::kSquare: return "square";
  }
  return "?";
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
  }
  return out;
}

Tensor elementwise(ElementOp op, const Tensor& a, const std::optional<Tensor>& b) {
  if (is_binary(op) != b.has_value()) {
    throw ContractError(std::string("elementwise ") + name(op) +
                        (b ? " takes one operand" : " needs two operands"));
  }
  if (b) {
    const Shape out = broadcast_shape(a.shape(), b->shape());
    const Eigen::ArrayXd lhs = expand(a, out);
    const Eigen::ArrayXd rhs = expand(*b, out);
    switch (op) {
      case ElementOp::kAdd: return Tensor(out, lhs + rhs);
      case ElementOp::kSub: return Tensor(out, lhs - rhs);
      case ElementOp::kMul: return Tensor(out, lhs * rhs);
      case ElementOp::kDiv:
        if ((rhs == 0.0).any()) throw DomainError("div: zero divisor element");
        return Tensor(out, lhs / rhs);
      default: break;
    }
  }
  const Eigen::ArrayXd& v = a.values();
  switch (op) {
    case ElementOp::kAbs: return Tensor(a.shape(), v.abs());
    case ElementOp::kSqrt:
      if ((v < 0.0).any()) throw DomainError("sqrt: negative argument");
      return Tensor(a.shape(), v.sqrt());
    case ElementOp::kTanh: return Tensor(a.shape(), v.tanh());
    case ElementOp::kSigmoid: return Tensor(a.shape(), v.unaryExpr(&sigmoid_scalar));
    case ElementOp::kRelu: return Tensor(a.shape(), v.max(0.0));
    case ElementOp::kSquare: return Tensor(a.shape(), v.square());
    default: break;
  }
  throw ContractError("unhandled elementwise op");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementOp::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementOp::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementOp::kMul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(ElementOp::kDiv, a, b); }
Tensor abs(const Tensor& a) { return elementwise(ElementOp::kAbs, a); }
Tensor sqrt(const Tensor& a) { return elementwise(ElementOp::kSqrt, a); }
Tensor tanh(const Tensor& a) { return elementwise(ElementOp::kTanh, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(ElementOp::kSigmoid, a); }
Tensor relu(const Tensor& a) { return elementwise(ElementOp::kRelu, a); }
Tensor square(const Tensor& a) { return elementwise(ElementOp::kSquare, a); }

Tensor scale(const Tensor& a, double factor) { return Tensor(a.shape(), a.values() * factor); }

Tensor add_scalar(const Tensor& a, double value) {
  return Tensor(a.shape(), a.values() + value);
}

Tensor sum_to_shape(const Tensor& grad, const Shape& shape) {
  if (grad.shape() == shape) return grad;
  broadcast_shape(grad.shape(), shape);
  const auto strides = strides_for(shape, grad.shape());
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(numel(shape));
  const Shape& gs = grad.shape();
  std::vector<Index> idx(gs.size(), 0);
  Index offset = 0;
  for (Index flat = 0; flat < grad.size(); ++flat) {
    out[offset] += grad[flat];
    for (std::size_t a = gs.size(); a-- > 0;) {
      offset += strides[a];
      if (++idx[a] < gs[a]) break;
      offset -= strides[a] * gs[a];
      idx[a] = 0;
    }
  }
  return Tensor(shape, std::move(out));
}

double sum(const Tensor& a) { return a.values().sum(); }
double mean(const Tensor& a) { return a.values().mean(); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const Index n = a.extent(0), k = a.extent(1), m = b.extent(1);
  Eigen::ArrayXd out(n * m);
  RowMap(out.data(), n, m).noalias() =
      ConstRowMap(a.values().data(), n, k) * ConstRowMap(b.values().data(), k, m);
  return Tensor({n, m}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const Index n = a.extent(0), m = a.extent(1);
  Eigen::ArrayXd out(n * m);
  RowMap(out.data(), m, n) = ConstRowMap(a.values().data(), n, m).transpose();
  return Tensor({m, n}, std::move(out));
}

Tensor slice_columns(const Tensor& a, Index begin, Index count) {
  require_rank(a, 2, "slice_columns");
  if (begin < 0 || count < 1 || begin + count > a.extent(1)) {
    throw ShapeError("slice_columns: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + to_string(a.shape()));
  }
  const Index n = a.extent(0);
  Eigen::ArrayXd out(n * count);
  RowMap(out.data(), n, count) =
      ConstRowMap(a.values().data(), n, a.extent(1)).middleCols(begin, count);
  return Tensor({n, count}, std::move(out));
}

Index conv_output_extent(Index input, Index kernel, Index pad, Index stride) {
  if (input + 2 * pad < kernel) {
    throw ShapeError("conv2d: kernel " + std::to_string(kernel) + " exceeds padded input " +
                     std::to_string(input + 2 * pad));
  }
  return (input + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, Index pad, Index stride) {
  const ConvGeometry g = conv_geometry(x, w, pad, stride);
  const Index plane = g.out_h * g.out_w;
  const ConstRowMap weights(w.values().data(), g.f, g.c * g.k * g.k);
  Eigen::ArrayXd out(g.n * g.f * plane);
  for (Index n = 0; n < g.n; ++n) {
    const RowMatrix cols = im2col(x.values().data() + n * g.c * g.h * g.w, g.c, g.h, g.w, g.k,
                                  pad, stride, g.out_h, g.out_w);
    RowMap(out.data() + n * g.f * plane, g.f, plane).noalias() = weights * cols;
  }
  return Tensor({g.n, g.f, g.out_h, g.out_w}, std::move(out));
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, Index pad, Index stride,
                            const Tensor& grad_out) {
  const ConvGeometry g = conv_geometry(x, w, pad, stride);
  if (grad_out.shape() != Shape{g.n, g.f, g.out_h, g.out_w}) {
    throw ShapeError("conv2d_backward: gradient shape " + to_string(grad_out.shape()));
  }
  const Index plane = g.out_h * g.out_w;
  const Index patch = g.c * g.k * g.k;
  const ConstRowMap weights(w.values().data(), g.f, patch);
  Eigen::ArrayXd dx = Eigen::ArrayXd::Zero(x.size());
  RowMatrix dw = RowMatrix::Zero(g.f, patch);
  for (Index n = 0; n < g.n; ++n) {
    const RowMatrix cols = im2col(x.values().data() + n * g.c * g.h * g.w, g.c, g.h, g.w, g.k,
                                  pad, stride, g.out_h, g.out_w);
    const ConstRowMap dy(grad_out.values().data() + n * g.f * plane, g.f, plane);
    dw.noalias() += dy * cols.transpose();
    const RowMatrix dcols = weights.transpose() * dy;
    col2im(dcols, dx.data() + n * g.c * g.h * g.w, g.c, g.h, g.w, g.k, pad, stride, g.out_h,
           g.out_w);
  }
  return {Tensor(x.shape(), std::move(dx)),
          Tensor(w.shape(), Eigen::Map<const Eigen::ArrayXd>(dw.data(), dw.size()))};
}

Tensor mean_pool2x2(const Tensor& x) {
  require_rank(x, 4, "mean_pool2x2");
  const Index n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  if (h < 2 || w < 2) throw ShapeError("mean_pool2x2: input " + to_string(x.shape()));
  const Index oh = h / 2, ow = w / 2;
  Eigen::ArrayXd out(n * c * oh * ow);
  const double* in = x.values().data();
  for (Index p = 0; p < n * c; ++p) {
    for (Index y = 0; y < oh; ++y) {
      for (Index z = 0; z < ow; ++z) {
        const double* base = in + (p * h + 2 * y) * w + 2 * z;
        out[(p * oh + y) * ow + z] = 0.25 * (base[0] + base[1] + base[w] + base[w + 1]);
      }
    }
  }
  return Tensor({n, c, oh, ow}, std::move(out));
}

Tensor mean_pool2x2_backward(const Shape& input_shape, const Tensor& grad_out) {
  const Index n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
  const Index oh = h / 2, ow = w / 2;
  if (grad_out.shape() != Shape{n, c, oh, ow}) {
    throw ShapeError("mean_pool2x2_backward: gradient shape " + to_string(grad_out.shape()));
  }
  Eigen::ArrayXd dx = Eigen::ArrayXd::Zero(numel(input_shape));
  for (Index p = 0; p < n * c; ++p) {
    for (Index y = 0; y < oh; ++y) {
      for (Index z = 0; z < ow; ++z) {
        const double g = 0.25 * grad_out[(p * oh + y) * ow + z];
        const Index base = (p * h + 2 * y) * w + 2 * z;
        dx[base] += g;
        dx[base + 1] += g;
        dx[base + w] += g;
        dx[base + w + 1] += g;
      }
    }
  }
  return Tensor(input_shape, std::move(dx));
}

Tensor region_mean(const Tensor& x, const NormRegion& region) {
  return Tensor(x.shape(), region_mean_kernel<double>(x.values(), x.shape(), region, false));
}

Tensor region_mean_transpose(const Tensor& grad, const NormRegion& region) {
  return Tensor(grad.shape(), region_mean_kernel<double>(grad.values(), grad.shape(), region, true));
}

}  // namespace normkit
