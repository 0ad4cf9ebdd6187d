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

// Dense double-precision tensors with define-by-run reverse-mode gradients.
//
// Every op records its inputs and a backward closure on the output node when
// gradient recording is enabled and at least one input requires a gradient.
// `Tensor::backward()` orders the recorded graph topologically (the tape),
// visits each node once, and accumulates into leaf gradients. A graph and its
// tensors belong to one thread; independent graphs may live on other threads.

#ifndef REGEN_TENSOR_H_
#define REGEN_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace regen::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  const std::vector<double>& values() const { return node_->value; }
  // Direct mutation is meant for leaves (optimizer updates, test setup).
  std::vector<double>& mutable_values() { return node_->value; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }
  double item() const;

  void zero_grad();
  // Seeds d(self)/d(self) = 1 for a one-element tensor and back-propagates.
  void backward();
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Throws NumericError naming `context` if any value is NaN or infinite.
void check_finite(const Tensor& t, const std::string& context);

// ---- Elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
// Divides every element of `a` by the one-element tensor `s`.
Tensor div_scalar(const Tensor& a, const Tensor& s);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh(const Tensor& a);
Tensor abs(const Tensor& a);
// log(max(a, floor)); the gradient is zero where a < floor.
Tensor log_floor(const Tensor& a, double floor);

// ---- Reductions (to one-element tensors) ------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor frobenius_norm(const Tensor& a);
Tensor l1_norm(const Tensor& a);

// ---- Shape ------------------------------------------------------------------
Tensor reshape(const Tensor& a, Shape shape);
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K] x [K,N]
// Row `i` of the leading dimension, with that dimension dropped.
Tensor select(const Tensor& a, std::size_t i);
// Stacks equally shaped tensors along a new leading dimension.
Tensor stack(const std::vector<Tensor>& items);
// [B,C,T] helpers.
Tensor concat_time(const Tensor& a, const Tensor& b);
Tensor slice_time(const Tensor& a, std::size_t start, std::size_t length);
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Repeats every time step `factor` times: [B,C,T] -> [B,C,T*factor].
Tensor upsample_nearest1d(const Tensor& a, std::size_t factor);

// ---- Convolution -------------------------------------------------------------
struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  // Same-length output for stride 1 (kernel must be odd).
  static Conv1dOptions Same(std::size_t kernel, std::size_t dilation);
  // Left padding only: output t depends on inputs <= t.
  static Conv1dOptions Causal(std::size_t kernel, std::size_t dilation);
};
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel,
                                 const Conv1dOptions& opt);
// x [B,Ci,T], weight [Co,Ci,K], bias [Co] or undefined -> [B,Co,T'].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv1dOptions& opt);

// ---- Normalization -----------------------------------------------------------
struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};
// y = gamma * xhat + beta with gamma, beta shaped like x [B,C,T]. Training mode
// normalizes with batch statistics over (B, T) per channel and updates the
// running estimates (unbiased variance, stored at float32 precision);
// inference mode uses the running estimates.
Tensor batch_norm_conditional(const Tensor& x, const Tensor& gamma,
                              const Tensor& beta, BatchNormStats& stats,
                              bool training);

// ---- Spectral ----------------------------------------------------------------
// Hann-windowed centered magnitude STFT of a 1-D signal [T] -> [frames, bins],
// matching dsp::stft_magnitude. The gradient of |X| is taken as zero at exact
// zeros.
Tensor stft_magnitude(const Tensor& x, int fft_size, int hop);

// ---- Verification --------------------------------------------------------------
struct GradCheckOptions {
  double eps = 1e-5;
  // Five-point stencil (error O(eps^4)) instead of the two-point one.
  bool five_point = false;
  std::size_t max_coords = 64;  // sampled coordinates when numel is larger
  std::uint64_t seed = 0;
  // When positive, a coordinate whose estimates at eps and eps / 2 disagree
  // by more than this relative amount is skipped: a kink or near-singularity
  // lies inside the stencil, or the derivative is below difference
  // resolution.
  double resolution_tol = 0.0;
};
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};
// Central finite differences against reverse-mode gradients of the scalar
// function `f` at `x`. The error is max |a - n| / max(|a|, |n|, 1e-8) over the
// checked coordinates. Throws NumericError if f(x) is not finite and
// ArgumentError when eps lies outside [1e-7, 1e-3].
GradCheckReport grad_check_report(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& x, const GradCheckOptions& opt = {});
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, const GradCheckOptions& opt = {});

}  // namespace regen::ad

#endif  // REGEN_TENSOR_H_
