/*
 * Copyright 2026 The Regen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <complex>

#include "regen/dsp.h"
#include "regen/error.h"
#include "regen/tensor.h"

namespace regen::ad {
namespace {

using BackwardFn = std::function<void(Node&)>;

bool needs_graph(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<const Tensor*> inputs,
                   BackwardFn backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  if (needs_graph(inputs)) {
    n->requires_grad = true;
    for (const Tensor* t : inputs) {
      n->inputs.push_back(t->defined() ? t->node_ptr() : nullptr);
    }
    n->backward_fn = std::move(backward);
  }
  Tensor out(std::move(n));
  check_finite(out, op);
  return out;
}

// Returns the grad buffer of input `i` if it participates in the graph.
std::vector<double>* input_grad(Node& n, std::size_t i) {
  Node* in = n.inputs[i].get();
  if (in == nullptr || !in->requires_grad) return nullptr;
  return &in->ensure_grad();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(a.shape()));
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& a, const char* op, F f, D df) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(a.shape(), std::move(y), op, {&a}, [df](Node& n) {
    auto* g = input_grad(n, 0);
    if (!g) return;
    const auto& x = n.inputs[0]->value;
    for (std::size_t i = 0; i < x.size(); ++i) {
      (*g)[i] += n.grad[i] * df(x[i], n.value[i]);
    }
  });
}

}  // namespace

// ---- Elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return make_result(a.shape(), std::move(y), "add", {&a, &b}, [](Node& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = input_grad(n, k)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return make_result(a.shape(), std::move(y), "sub", {&a, &b}, [](Node& n) {
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    }
    if (auto* g = input_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return make_result(a.shape(), std::move(y), "mul", {&a, &b}, [](Node& n) {
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    }
    if (auto* g = input_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary(
      a, "scale", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor div_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) {
    throw ShapeError("div_scalar: divisor must have one element, got " +
                     shape_str(s.shape()));
  }
  const double d = s.item();
  std::vector<double> y(a.values());
  for (double& v : y) v /= d;
  return make_result(a.shape(), std::move(y), "div_scalar", {&a, &s},
                     [](Node& n) {
                       const double d = n.inputs[1]->value[0];
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t i = 0; i < n.grad.size(); ++i) {
                           (*g)[i] += n.grad[i] / d;
                         }
                       }
                       if (auto* g = input_grad(n, 1)) {
                         // d(a/d)/dd = -a/d^2 = -y/d
                         double acc = 0.0;
                         for (std::size_t i = 0; i < n.grad.size(); ++i) {
                           acc += n.grad[i] * n.value[i];
                         }
                         (*g)[0] -= acc / d;
                       }
                     });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor log_floor(const Tensor& a, double floor) {
  return unary(
      a, "log_floor", [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x >= floor ? 1.0 / x : 0.0; });
}

// ---- Reductions --------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({1}, {acc}, "sum", {&a}, [](Node& n) {
    if (auto* g = input_grad(n, 0)) {
      for (double& v : *g) v += n.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor frobenius_norm(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return make_result({1}, {std::sqrt(acc)}, "frobenius_norm", {&a},
                     [](Node& n) {
                       auto* g = input_grad(n, 0);
                       const double norm = n.value[0];
                       if (!g || norm == 0.0) return;
                       const auto& x = n.inputs[0]->value;
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         (*g)[i] += n.grad[0] * x[i] / norm;
                       }
                     });
}

Tensor l1_norm(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += std::abs(v);
  return make_result({1}, {acc}, "l1_norm", {&a}, [](Node& n) {
    auto* g = input_grad(n, 0);
    if (!g) return;
    const auto& x = n.inputs[0]->value;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
      (*g)[i] += n.grad[0] * s;
    }
  });
}

// ---- Shape ---------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  return make_result(std::move(shape), a.values(), "reshape", {&a},
                     [](Node& n) {
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t i = 0; i < n.grad.size(); ++i) {
                           (*g)[i] += n.grad[i];
                         }
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> y(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv.data() + p * n;
      double* yrow = y.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) yrow[j] += s * brow[j];
    }
  }
  return make_result({m, n}, std::move(y), "matmul", {&a, &b},
                     [m, k, n](Node& node) {
                       const auto& av = node.inputs[0]->value;
                       const auto& bv = node.inputs[1]->value;
                       const auto& gy = node.grad;
                       if (auto* ga = input_grad(node, 0)) {
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) {
                               acc += gy[i * n + j] * bv[p * n + j];
                             }
                             (*ga)[i * k + p] += acc;
                           }
                         }
                       }
                       if (auto* gb = input_grad(node, 1)) {
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double s = av[i * k + p];
                             for (std::size_t j = 0; j < n; ++j) {
                               (*gb)[p * n + j] += s * gy[i * n + j];
                             }
                           }
                         }
                       }
                     });
}

Tensor select(const Tensor& a, std::size_t i) {
  if (a.rank() < 2 || i >= a.dim(0)) {
    throw ShapeError("select: index " + std::to_string(i) + " invalid for " +
                     shape_str(a.shape()));
  }
  Shape shape(a.shape().begin() + 1, a.shape().end());
  const std::size_t stride = shape_numel(shape);
  const auto begin = a.values().begin() + static_cast<std::ptrdiff_t>(i * stride);
  std::vector<double> y(begin, begin + static_cast<std::ptrdiff_t>(stride));
  return make_result(std::move(shape), std::move(y), "select", {&a},
                     [i, stride](Node& n) {
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t j = 0; j < stride; ++j) {
                           (*g)[i * stride + j] += n.grad[j];
                         }
                       }
                     });
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  const Shape inner = items[0].shape();
  for (const auto& t : items) require_same_shape(items[0], t, "stack");
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  const std::size_t stride = items[0].numel();
  std::vector<double> y;
  y.reserve(stride * items.size());
  for (const auto& t : items) y.insert(y.end(), t.values().begin(), t.values().end());

  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(y);
  n->op = "stack";
  bool any = false;
  for (const auto& t : items) any = any || t.requires_grad();
  if (any && grad_enabled()) {
    n->requires_grad = true;
    for (const auto& t : items) n->inputs.push_back(t.node_ptr());
    n->backward_fn = [stride](Node& node) {
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        if (auto* g = input_grad(node, k)) {
          for (std::size_t j = 0; j < stride; ++j) {
            (*g)[j] += node.grad[k * stride + j];
          }
        }
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor concat_time(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat_time");
  require_rank(b, 3, "concat_time");
  if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1)) {
    throw ShapeError("concat_time: batch/channel mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t rows = a.dim(0) * a.dim(1);
  const std::size_t ta = a.dim(2), tb = b.dim(2), t = ta + tb;
  std::vector<double> y(rows * t);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(r * ta), ta,
                y.begin() + static_cast<std::ptrdiff_t>(r * t));
    std::copy_n(b.values().begin() + static_cast<std::ptrdiff_t>(r * tb), tb,
                y.begin() + static_cast<std::ptrdiff_t>(r * t + ta));
  }
  return make_result({a.dim(0), a.dim(1), t}, std::move(y), "concat_time",
                     {&a, &b}, [rows, ta, tb, t](Node& n) {
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < ta; ++j)
                             (*g)[r * ta + j] += n.grad[r * t + j];
                       }
                       if (auto* g = input_grad(n, 1)) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < tb; ++j)
                             (*g)[r * tb + j] += n.grad[r * t + ta + j];
                       }
                     });
}

Tensor slice_time(const Tensor& a, std::size_t start, std::size_t length) {
  require_rank(a, 3, "slice_time");
  const std::size_t t = a.dim(2);
  if (start + length > t) {
    throw ShapeError("slice_time: [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") exceeds " +
                     shape_str(a.shape()));
  }
  const std::size_t rows = a.dim(0) * a.dim(1);
  std::vector<double> y(rows * length);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(r * t + start),
                length, y.begin() + static_cast<std::ptrdiff_t>(r * length));
  }
  return make_result({a.dim(0), a.dim(1), length}, std::move(y), "slice_time",
                     {&a}, [rows, t, start, length](Node& n) {
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < length; ++j)
                             (*g)[r * t + start + j] += n.grad[r * length + j];
                       }
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat_channels");
  require_rank(b, 3, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat_channels: batch/time mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1),
                    t = a.dim(2);
  const std::size_t sa = ca * t, sb = cb * t;
  std::vector<double> y(batch * (sa + sb));
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(i * sa), sa,
                y.begin() + static_cast<std::ptrdiff_t>(i * (sa + sb)));
    std::copy_n(b.values().begin() + static_cast<std::ptrdiff_t>(i * sb), sb,
                y.begin() + static_cast<std::ptrdiff_t>(i * (sa + sb) + sa));
  }
  return make_result({batch, ca + cb, t}, std::move(y), "concat_channels",
                     {&a, &b}, [batch, sa, sb](Node& n) {
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t i = 0; i < batch; ++i)
                           for (std::size_t j = 0; j < sa; ++j)
                             (*g)[i * sa + j] += n.grad[i * (sa + sb) + j];
                       }
                       if (auto* g = input_grad(n, 1)) {
                         for (std::size_t i = 0; i < batch; ++i)
                           for (std::size_t j = 0; j < sb; ++j)
                             (*g)[i * sb + j] += n.grad[i * (sa + sb) + sa + j];
                       }
                     });
}

Tensor upsample_nearest1d(const Tensor& a, std::size_t factor) {
  require_rank(a, 3, "upsample_nearest1d");
  if (factor == 0) throw ArgumentError("upsample factor must be >= 1");
  if (factor == 1) return a;
  const std::size_t rows = a.dim(0) * a.dim(1), t = a.dim(2);
  std::vector<double> y(rows * t * factor);
  const auto& x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < t; ++j) {
      const double v = x[r * t + j];
      double* out = y.data() + (r * t + j) * factor;
      for (std::size_t f = 0; f < factor; ++f) out[f] = v;
    }
  }
  return make_result({a.dim(0), a.dim(1), t * factor}, std::move(y),
                     "upsample_nearest1d", {&a}, [rows, t, factor](Node& n) {
                       if (auto* g = input_grad(n, 0)) {
                         for (std::size_t i = 0; i < rows * t; ++i) {
                           double acc = 0.0;
                           for (std::size_t f = 0; f < factor; ++f) {
                             acc += n.grad[i * factor + f];
                           }
                           (*g)[i] += acc;
                         }
                       }
                     });
}

// ---- Convolution ----------------------------------------------------------------

Conv1dOptions Conv1dOptions::Same(std::size_t kernel, std::size_t dilation) {
  if (kernel % 2 == 0) throw ArgumentError("same padding needs an odd kernel");
  const std::size_t p = dilation * (kernel - 1) / 2;
  return {1, dilation, p, p};
}

Conv1dOptions Conv1dOptions::Causal(std::size_t kernel, std::size_t dilation) {
  return {1, dilation, dilation * (kernel - 1), 0};
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel,
                                 const Conv1dOptions& opt) {
  const std::size_t padded = length + opt.pad_left + opt.pad_right;
  const std::size_t span = opt.dilation * (kernel - 1) + 1;
  if (padded < span) return 0;
  return (padded - span) / opt.stride + 1;
}

namespace {

// Output positions t in [lo, hi] whose tap k lands inside the unpadded input.
struct TapRange {
  std::size_t lo = 0;
  std::size_t hi = 0;  // exclusive
  std::ptrdiff_t offset = 0;  // input index = t * stride + offset
};

TapRange tap_range(std::size_t k, std::size_t in_len, std::size_t out_len,
                   const Conv1dOptions& opt) {
  TapRange r;
  r.offset = static_cast<std::ptrdiff_t>(k * opt.dilation) -
             static_cast<std::ptrdiff_t>(opt.pad_left);
  const auto s = static_cast<std::ptrdiff_t>(opt.stride);
  // smallest t with t*s + offset >= 0
  std::ptrdiff_t lo = r.offset >= 0 ? 0 : (-r.offset + s - 1) / s;
  // largest t with t*s + offset <= in_len - 1
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(in_len) - 1 - r.offset;
  std::ptrdiff_t hi = last < 0 ? -1 : last / s;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_len) - 1);
  r.lo = static_cast<std::size_t>(lo);
  r.hi = hi < lo ? r.lo : static_cast<std::size_t>(hi + 1);
  return r;
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv1dOptions& opt) {
  require_rank(x, 3, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  const std::size_t batch = x.dim(0), cin = x.dim(1), tin = x.dim(2);
  const std::size_t cout = weight.dim(0), kernel = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv1d: input " + shape_str(x.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv1d: bias " + shape_str(bias.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  }
  if (opt.stride == 0 || opt.dilation == 0) {
    throw ArgumentError("conv1d stride and dilation must be positive");
  }
  const std::size_t tout = conv1d_output_length(tin, kernel, opt);
  std::vector<TapRange> taps(kernel);
  for (std::size_t k = 0; k < kernel; ++k) taps[k] = tap_range(k, tin, tout, opt);

  const auto& xv = x.values();
  const auto& wv = weight.values();
  const std::size_t s = opt.stride;
  std::vector<double> y(batch * cout * tout, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* yrow = y.data() + (b * cout + co) * tout;
      if (bias.defined()) std::fill_n(yrow, tout, bias.values()[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xrow = xv.data() + (b * cin + ci) * tin;
        const double* wrow = wv.data() + (co * cin + ci) * kernel;
        for (std::size_t k = 0; k < kernel; ++k) {
          const double w = wrow[k];
          const TapRange& r = taps[k];
          const double* xp = xrow + r.offset;
          if (s == 1) {
            for (std::size_t t = r.lo; t < r.hi; ++t) yrow[t] += w * xp[t];
          } else {
            for (std::size_t t = r.lo; t < r.hi; ++t) yrow[t] += w * xp[t * s];
          }
        }
      }
    }
  }
  return make_result(
      {batch, cout, tout}, std::move(y), "conv1d", {&x, &weight, &bias},
      [batch, cin, tin, cout, kernel, tout, s, taps](Node& n) {
        const auto& xv = n.inputs[0]->value;
        const auto& wv = n.inputs[1]->value;
        auto* gx = input_grad(n, 0);
        auto* gw = input_grad(n, 1);
        auto* gb = n.inputs[2] ? input_grad(n, 2) : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gy = n.grad.data() + (b * cout + co) * tout;
            if (gb) {
              double acc = 0.0;
              for (std::size_t t = 0; t < tout; ++t) acc += gy[t];
              (*gb)[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* xrow = xv.data() + (b * cin + ci) * tin;
              double* gxrow = gx ? gx->data() + (b * cin + ci) * tin : nullptr;
              const std::size_t wbase = (co * cin + ci) * kernel;
              for (std::size_t k = 0; k < kernel; ++k) {
                const TapRange& r = taps[k];
                if (gw) {
                  const double* xp = xrow + r.offset;
                  double acc = 0.0;
                  for (std::size_t t = r.lo; t < r.hi; ++t) acc += gy[t] * xp[t * s];
                  (*gw)[wbase + k] += acc;
                }
                if (gxrow) {
                  const double w = wv[wbase + k];
                  double* gp = gxrow + r.offset;
                  if (s == 1) {
                    for (std::size_t t = r.lo; t < r.hi; ++t) gp[t] += w * gy[t];
                  } else {
                    for (std::size_t t = r.lo; t < r.hi; ++t) gp[t * s] += w * gy[t];
                  }
                }
              }
            }
          }
        }
      });
}

// ---- Normalization ----------------------------------------------------------------

Tensor batch_norm_conditional(const Tensor& x, const Tensor& gamma,
                              const Tensor& beta, BatchNormStats& stats,
                              bool training) {
  require_rank(x, 3, "batch_norm_conditional");
  require_same_shape(x, gamma, "batch_norm_conditional gamma");
  require_same_shape(x, beta, "batch_norm_conditional beta");
  const std::size_t batch = x.dim(0), ch = x.dim(1), t = x.dim(2);
  if (stats.running_mean.size() != ch || stats.running_var.size() != ch) {
    throw ShapeError("batch_norm_conditional: stats sized for " +
                     std::to_string(stats.running_mean.size()) +
                     " channels, input " + shape_str(x.shape()));
  }
  const auto& xv = x.values();
  const std::size_t count = batch * t;
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    double mu = 0.0, var = 0.0;
    if (training) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double* row = xv.data() + (b * ch + c) * t;
        for (std::size_t j = 0; j < t; ++j) mu += row[j];
      }
      mu /= static_cast<double>(count);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* row = xv.data() + (b * ch + c) * t;
        for (std::size_t j = 0; j < t; ++j) var += (row[j] - mu) * (row[j] - mu);
      }
      const double unbiased =
          count > 1 ? var / static_cast<double>(count - 1) : 0.0;
      var /= static_cast<double>(count);
      // Running estimates are persistent state kept at float32 precision.
      stats.running_mean[c] = static_cast<float>(
          (1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * mu);
      stats.running_var[c] = static_cast<float>(
          (1.0 - stats.momentum) * stats.running_var[c] +
          stats.momentum * unbiased);
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + stats.eps);
    (*inv_std)[c] = is;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * ch + c) * t;
      for (std::size_t j = 0; j < t; ++j) {
        (*xhat)[base + j] = (xv[base + j] - mu) * is;
      }
    }
  }
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = gv[i] * (*xhat)[i] + bv[i];

  return make_result(
      x.shape(), std::move(y), "batch_norm_conditional", {&x, &gamma, &beta},
      [batch, ch, t, count, training, xhat, inv_std](Node& n) {
        const auto& gv = n.inputs[1]->value;
        if (auto* gg = input_grad(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) {
            (*gg)[i] += n.grad[i] * (*xhat)[i];
          }
        }
        if (auto* gbeta = input_grad(n, 2)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*gbeta)[i] += n.grad[i];
        }
        auto* gx = input_grad(n, 0);
        if (!gx) return;
        for (std::size_t c = 0; c < ch; ++c) {
          const double is = (*inv_std)[c];
          if (!training) {
            for (std::size_t b = 0; b < batch; ++b) {
              const std::size_t base = (b * ch + c) * t;
              for (std::size_t j = 0; j < t; ++j) {
                (*gx)[base + j] += n.grad[base + j] * gv[base + j] * is;
              }
            }
            continue;
          }
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = (b * ch + c) * t;
            for (std::size_t j = 0; j < t; ++j) {
              const double g = n.grad[base + j] * gv[base + j];
              mean_g += g;
              mean_gx += g * (*xhat)[base + j];
            }
          }
          mean_g /= static_cast<double>(count);
          mean_gx /= static_cast<double>(count);
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = (b * ch + c) * t;
            for (std::size_t j = 0; j < t; ++j) {
              const double g = n.grad[base + j] * gv[base + j];
              (*gx)[base + j] +=
                  is * (g - mean_g - (*xhat)[base + j] * mean_gx);
            }
          }
        }
      });
}

// ---- Spectral ------------------------------------------------------------------------

Tensor stft_magnitude(const Tensor& x, int fft_size, int hop) {
  require_rank(x, 1, "stft_magnitude");
  dsp::check_stft_args(fft_size, hop);
  const std::size_t n = static_cast<std::size_t>(fft_size);
  const std::size_t bins = n / 2 + 1;
  const std::size_t len = x.dim(0);
  const std::size_t frames = dsp::stft_num_frames(len, hop);
  const auto window = std::make_shared<std::vector<double>>(dsp::hann_window(n));
  const auto plan = dsp::FftPlan::Get(n);
  const auto spectrum =
      std::make_shared<std::vector<std::complex<double>>>(frames * bins);

  const auto& xv = x.values();
  std::vector<double> mag(frames * bins);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto start = static_cast<std::int64_t>(f) * hop -
                       static_cast<std::int64_t>(n / 2);
    for (std::size_t j = 0; j < n; ++j) {
      buf[j] = xv[dsp::reflect_index(start + static_cast<std::int64_t>(j), len)] *
               (*window)[j];
    }
    plan->forward(buf);
    for (std::size_t k = 0; k < bins; ++k) {
      (*spectrum)[f * bins + k] = buf[k];
      mag[f * bins + k] = std::abs(buf[k]);
    }
  }
  return make_result(
      {frames, bins}, std::move(mag), "stft_magnitude", {&x},
      [n, bins, len, frames, hop, window, plan, spectrum](Node& node) {
        auto* gx = input_grad(node, 0);
        if (!gx) return;
        std::vector<std::complex<double>> buf(n);
        for (std::size_t f = 0; f < frames; ++f) {
          std::fill(buf.begin(), buf.end(), std::complex<double>{});
          bool any = false;
          for (std::size_t k = 0; k < bins; ++k) {
            const double g = node.grad[f * bins + k];
            const double m = node.value[f * bins + k];
            if (g == 0.0 || m == 0.0) continue;
            buf[k] = (*spectrum)[f * bins + k] * (g / m);
            any = true;
          }
          if (!any) continue;
          plan->inverse_unscaled(buf);
          const auto start = static_cast<std::int64_t>(f) * hop -
                             static_cast<std::int64_t>(n / 2);
          for (std::size_t j = 0; j < n; ++j) {
            (*gx)[dsp::reflect_index(start + static_cast<std::int64_t>(j), len)] +=
                buf[j].real() * (*window)[j];
          }
        }
      });
}

}  // namespace regen::ad
