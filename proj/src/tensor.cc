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
#include <numeric>
#include <random>
#include <unordered_set>

#include "regen/error.h"
#include "regen/tensor.h"

namespace regen::ad {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(shape_numel(shape), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a one-element tensor, got " +
                     shape_str(shape()));
  }
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  return from(node_->shape, node_->value, false);
}

void Tensor::backward() {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar root, got " +
                     shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the recorded graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // Interior gradients from an earlier pass over a shared subgraph must not
  // leak into this one; leaves keep accumulating.
  for (Node* n : order) {
    if (n->backward_fn) n->grad.clear();
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void check_finite(const Tensor& t, const std::string& context) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value in " + context);
    }
  }
}

GradCheckReport grad_check_report(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& x, const GradCheckOptions& opt) {
  if (!(opt.eps >= 1e-7 && opt.eps <= 1e-3)) {
    throw ArgumentError("grad_check eps must lie in [1e-7, 1e-3]");
  }
  Tensor leaf = Tensor::from(x.shape(), x.values(), true);
  Tensor y = f(leaf);
  if (y.numel() != 1) throw ShapeError("grad_check needs a scalar function");
  if (!std::isfinite(y.item())) {
    throw NumericError("grad_check: f(x) is not finite");
  }
  y.backward();
  std::vector<double> analytic = leaf.has_grad()
                                     ? leaf.grad()
                                     : std::vector<double>(leaf.numel(), 0.0);

  std::vector<std::size_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), 0);
  if (coords.size() > opt.max_coords) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opt.max_coords);
  }

  NoGradGuard no_grad;
  GradCheckReport report;
  std::vector<double> probe = x.values();
  for (std::size_t c : coords) {
    const double orig = probe[c];
    auto at = [&](double delta) {
      probe[c] = orig + delta;
      const double v = f(Tensor::from(x.shape(), probe)).item();
      probe[c] = orig;
      if (!std::isfinite(v)) {
        throw NumericError("grad_check: non-finite value near coordinate " +
                           std::to_string(c));
      }
      return v;
    };
    // Differences are grouped so a flat direction gives exactly zero.
    auto estimate = [&](double h) {
      return opt.five_point
                 ? ((at(-2 * h) - at(2 * h)) + 8.0 * (at(h) - at(-h))) / (12.0 * h)
                 : (at(h) - at(-h)) / (2.0 * h);
    };
    const double numeric = estimate(opt.eps);
    if (opt.resolution_tol > 0.0) {
      const double finer = estimate(0.5 * opt.eps);
      const double scale = std::max({std::abs(numeric), std::abs(finer), 1e-8});
      if (std::abs(numeric - finer) > opt.resolution_tol * scale) {
        ++report.skipped;
        continue;
      }
    }
    const double a = analytic[c];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(a - numeric) / denom);
    ++report.checked;
  }
  return report;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, const GradCheckOptions& opt) {
  return grad_check_report(f, x, opt).max_rel_error;
}

}  // namespace regen::ad
