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

#include "normkit/tape.hpp"

#include <algorithm>
#include <cmath>

namespace normkit {

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Gradients::of(const Var& v) const {
  if (reached(v.id())) return *grads_[v.id()];
  return Tensor::zeros(v.shape());
}

Var Tape::leaf(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  const NodeId id = nodes_.size();
  for (NodeId in : inputs) {
    if (in >= id) throw ContractError("tape input does not precede its node");
  }
  nodes_.push_back({std::move(value), std::move(inputs), std::move(backward)});
  return Var(this, id);
}

Gradients Tape::backward(const Var& loss) const {
  if (&loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (!value(loss.id()).is_scalar()) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        to_string(value(loss.id()).shape()));
  }
  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id()] = Tensor::filled(value(loss.id()).shape(), 1.0);
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!grads[id] || !node.backward) continue;
    std::vector<Tensor> input_grads = node.backward(*grads[id]);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      auto& slot = grads[node.inputs[i]];
      slot = slot ? normkit::add(*slot, input_grads[i]) : std::move(input_grads[i]);
    }
  }
  return Gradients(std::move(grads));
}

namespace ad {
namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
  return a.tape();
}

Tensor map_values(const Tensor& t, const Eigen::ArrayXd& values) {
  return Tensor(t.shape(), values);
}

}  // namespace

Var elementwise(ElementOp op, const Var& a, const std::optional<Var>& b) {
  if (b) {
    Tape& tape = same_tape(a, *b);
    const Tensor x = a.value();
    const Tensor y = b->value();
    Tensor out = normkit::elementwise(op, x, y);
    Tape::BackwardFn fn;
    switch (op) {
      case ElementOp::kAdd:
        fn = [x, y](const Tensor& g) {
          return std::vector<Tensor>{sum_to_shape(g, x.shape()), sum_to_shape(g, y.shape())};
        };
        break;
      case ElementOp::kSub:
        fn = [x, y](const Tensor& g) {
          return std::vector<Tensor>{sum_to_shape(g, x.shape()),
                                     sum_to_shape(normkit::scale(g, -1.0), y.shape())};
        };
        break;
      case ElementOp::kMul:
        fn = [x, y](const Tensor& g) {
          return std::vector<Tensor>{sum_to_shape(normkit::mul(g, y), x.shape()),
                                     sum_to_shape(normkit::mul(g, x), y.shape())};
        };
        break;
      case ElementOp::kDiv:
        fn = [x, y](const Tensor& g) {
          const Tensor gx = normkit::div(g, y);
          const Tensor gy = normkit::scale(normkit::div(normkit::mul(gx, x), y), -1.0);
          return std::vector<Tensor>{sum_to_shape(gx, x.shape()), sum_to_shape(gy, y.shape())};
        };
        break;
      default:
        throw ContractError(std::string(name(op)) + " is unary");
    }
    return tape.record(std::move(out), {a.id(), b->id()}, std::move(fn));
  }

  const Tensor x = a.value();
  Tensor out = normkit::elementwise(op, x);
  const Tensor y = out;
  Tape::BackwardFn fn;
  switch (op) {
    case ElementOp::kAbs:
      fn = [x](const Tensor& g) {
        return std::vector<Tensor>{map_values(x, g.values() * x.values().sign())};
      };
      break;
    case ElementOp::kSqrt:
      fn = [y](const Tensor& g) {
        return std::vector<Tensor>{map_values(y, g.values() / (2.0 * y.values()))};
      };
      break;
    case ElementOp::kTanh:
      fn = [y](const Tensor& g) {
        return std::vector<Tensor>{map_values(y, g.values() * (1.0 - y.values().square()))};
      };
      break;
    case ElementOp::kSigmoid:
      fn = [y](const Tensor& g) {
        return std::vector<Tensor>{
            map_values(y, g.values() * y.values() * (1.0 - y.values()))};
      };
      break;
    case ElementOp::kRelu:
      fn = [x](const Tensor& g) {
        return std::vector<Tensor>{
            map_values(x, (x.values() > 0.0).select(g.values(), 0.0))};
      };
      break;
    case ElementOp::kSquare:
      fn = [x](const Tensor& g) {
        return std::vector<Tensor>{map_values(x, 2.0 * x.values() * g.values())};
      };
      break;
    default:
      throw ContractError(std::string(name(op)) + " is binary");
  }
  return a.tape().record(std::move(out), {a.id()}, std::move(fn));
}

Var add(const Var& a, const Var& b) { return elementwise(ElementOp::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return elementwise(ElementOp::kSub, a, b); }
Var mul(const Var& a, const Var& b) { return elementwise(ElementOp::kMul, a, b); }
Var div(const Var& a, const Var& b) { return elementwise(ElementOp::kDiv, a, b); }
Var abs(const Var& a) { return elementwise(ElementOp::kAbs, a); }
Var sqrt(const Var& a) { return elementwise(ElementOp::kSqrt, a); }
Var tanh(const Var& a) { return elementwise(ElementOp::kTanh, a); }
Var sigmoid(const Var& a) { return elementwise(ElementOp::kSigmoid, a); }
Var relu(const Var& a) { return elementwise(ElementOp::kRelu, a); }
Var square(const Var& a) { return elementwise(ElementOp::kSquare, a); }

Var scale(const Var& a, double factor) {
  return a.tape().record(normkit::scale(a.value(), factor), {a.id()},
                         [factor](const Tensor& g) {
                           return std::vector<Tensor>{normkit::scale(g, factor)};
                         });
}

Var add_scalar(const Var& a, double value) {
  return a.tape().record(normkit::add_scalar(a.value(), value), {a.id()},
                         [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

Var sum(const Var& a) {
  const Shape shape = a.shape();
  return a.tape().record(Tensor::scalar(normkit::sum(a.value())), {a.id()},
                         [shape](const Tensor& g) {
                           return std::vector<Tensor>{Tensor::filled(shape, g.item())};
                         });
}

Var mean(const Var& a) {
  const Shape shape = a.shape();
  const double n = static_cast<double>(a.value().size());
  return a.tape().record(Tensor::scalar(normkit::mean(a.value())), {a.id()},
                         [shape, n](const Tensor& g) {
                           return std::vector<Tensor>{Tensor::filled(shape, g.item() / n)};
                         });
}

Var reshape(const Var& a, Shape shape) {
  const Shape original = a.shape();
  return a.tape().record(a.value().reshaped(std::move(shape)), {a.id()},
                         [original](const Tensor& g) {
                           return std::vector<Tensor>{g.reshaped(original)};
                         });
}

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  return tape.record(normkit::matmul(x, y), {a.id(), b.id()}, [x, y](const Tensor& g) {
    return std::vector<Tensor>{normkit::matmul(g, transpose(y)),
                               normkit::matmul(transpose(x), g)};
  });
}

Var slice_columns(const Var& a, Index begin, Index count) {
  const Shape shape = a.shape();
  return a.tape().record(
      normkit::slice_columns(a.value(), begin, count), {a.id()},
      [shape, begin, count](const Tensor& g) {
        const Index n = shape[0], d = shape[1];
        Eigen::ArrayXd dx = Eigen::ArrayXd::Zero(n * d);
        for (Index r = 0; r < n; ++r) {
          dx.segment(r * d + begin, count) = g.values().segment(r * count, count);
        }
        return std::vector<Tensor>{Tensor(shape, std::move(dx))};
      });
}

Var conv2d(const Var& x, const Var& w, Index pad, Index stride) {
  Tape& tape = same_tape(x, w);
  const Tensor input = x.value();
  const Tensor weights = w.value();
  return tape.record(normkit::conv2d(input, weights, pad, stride), {x.id(), w.id()},
                     [input, weights, pad, stride](const Tensor& g) {
                       auto grads = conv2d_backward(input, weights, pad, stride, g);
                       return std::vector<Tensor>{std::move(grads.dx), std::move(grads.dw)};
                     });
}

Var mean_pool2x2(const Var& x) {
  const Shape shape = x.shape();
  return x.tape().record(normkit::mean_pool2x2(x.value()), {x.id()},
                         [shape](const Tensor& g) {
                           return std::vector<Tensor>{mean_pool2x2_backward(shape, g)};
                         });
}

Var region_mean(const Var& x, const NormRegion& region) {
  return x.tape().record(normkit::region_mean(x.value(), region), {x.id()},
                         [region](const Tensor& g) {
                           return std::vector<Tensor>{region_mean_transpose(g, region)};
                         });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets) {
  const Tensor& z = logits.value();
  if (z.rank() != 2) throw ShapeError("cross entropy expects N x K logits");
  const Index n = z.extent(0), k = z.extent(1);
  if (static_cast<Index>(targets.size()) != n) {
    throw ShapeError("cross entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " rows");
  }
  Eigen::ArrayXd probs(n * k);
  double loss = 0.0;
  for (Index r = 0; r < n; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= k) {
      throw ContractError("cross entropy: target " + std::to_string(t) + " outside [0, " +
                          std::to_string(k) + ")");
    }
    const auto row = z.values().segment(r * k, k);
    Index top = 0;
    const double shift = row.maxCoeff(&top);
    const Eigen::ArrayXd e = (row - shift).exp();
    // e[top] is exactly 1; summing the others apart keeps tiny losses accurate.
    double rest = 0.0;
    for (Index j = 0; j < k; ++j) {
      if (j != top) rest += e[j];
    }
    probs.segment(r * k, k) = e / (1.0 + rest);
    loss += std::log1p(rest) - (row[t] - shift);
  }
  loss /= static_cast<double>(n);
  const Shape shape = z.shape();
  return logits.tape().record(
      Tensor::scalar(loss), {logits.id()}, [probs, targets, shape, n, k](const Tensor& g) {
        Eigen::ArrayXd d = probs;
        for (Index r = 0; r < n; ++r) d[r * k + targets[static_cast<std::size_t>(r)]] -= 1.0;
        d *= g.item() / static_cast<double>(n);
        return std::vector<Tensor>{Tensor(shape, std::move(d))};
      });
}

}  // namespace ad
}  // namespace normkit
