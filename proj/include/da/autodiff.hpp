#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "da/common.hpp"

namespace da {

// Tensor values are double precision: the reductions in the losses are tiny
// at this scale and the finite-difference gradient checks need the headroom.
using Scalar = double;

struct Shape {
  int n = 1;  // leading dim; >1 only for convolution weights (output channels)
  int c = 1;
  int h = 1;
  int w = 1;

  std::int64_t size() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  bool is_scalar() const { return n == 1 && c == 1 && h == 1 && w == 1; }

  static Shape scalar() { return {}; }
  static Shape chw(int c, int h, int w) { return {1, c, h, w}; }
  static Shape map2d(int h, int w) { return {1, 1, h, w}; }
  static Shape conv_weight(int out_c, int in_c, int k) {
    return {out_c, in_c, k, k};
  }
};

std::string to_string(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;  // allocated only when requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pulls this->grad into parents
};

}  // namespace detail

// Value-semantics handle to a node of the differentiation graph. Graphs are
// built eagerly (forward values computed on op application) and are acyclic
// by construction.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(const Shape& shape, std::vector<Scalar> values);
  static Tensor constant_scalar(Scalar v);
  static Tensor from_floats(const Shape& shape, const std::vector<float>& v,
                            bool requires_grad = false);
  static Tensor param(const Shape& shape, std::vector<Scalar> values);
  static Tensor zeros(const Shape& shape, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  const std::vector<Scalar>& value() const;
  std::vector<Scalar>& value();  // params may be updated between graph builds
  const std::vector<Scalar>& grad() const;
  std::vector<Scalar>& grad();
  bool requires_grad() const;
  Scalar item() const;  // scalar tensors only
  void zero_grad();

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(Shape shape, std::vector<Scalar> value,
                        std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backward,
                        const char* op_name);
};

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scalar_mul(const Tensor& a, Scalar s);
Tensor scalar_add(const Tensor& a, Scalar s);

Tensor abs(const Tensor& a);  // subgradient at 0 is 0
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Scalar negative_slope = 0.1);
Tensor softplus(const Tensor& a);  // numerically stable composite

// Spatial ops. Border policy is clamp-to-edge throughout.
// x: {1,C,H,W}; w: {OC,C,k,k} with odd k; optional bias {1,OC,1,1}.
// Output spatial size is ceil(H/stride) x ceil(W/stride).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride = 1);
Tensor upsample2_nearest(const Tensor& x);
Tensor crop2d(const Tensor& x, int y0, int x0, int out_h, int out_w);
Tensor sobel_x(const Tensor& x);
Tensor sobel_y(const Tensor& x);

// Samples `image` at (x - d(x,y), y) with clamped borders and linear
// interpolation along x. Gradients flow to both operands. {1,1,H,W} only.
Tensor bilinear_warp(const Tensor& image, const Tensor& disparity);

// Reductions (fixed accumulation order, 64-bit accumulators).
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor avg_pool_global(const Tensor& x);  // {1,C,H,W} -> {1,C,1,1}
// Weighted mean sum(m*x)/sum(m); the mask carries no gradient.
Tensor masked_mean(const Tensor& x, const std::vector<Scalar>& mask);

Tensor broadcast_scalar(const Tensor& s, const Shape& shape);

// Reverse-mode sweep from a scalar loss. Parameter (leaf) gradients
// accumulate across calls until zeroed; interior gradients are scratch.
void backward(const Tensor& loss);

void zero_grads(const std::vector<Tensor>& params);

// Adam with bias correction. Moments are created on first step.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<Scalar>> m;
  std::vector<std::vector<Scalar>> v;
};

AdamState make_adam(const std::vector<Tensor>& params, double lr = 0.001);
void adam_step(AdamState& state, const std::vector<Tensor>& params);

// Central-difference gradient verification. For tensors larger than
// max_samples_per_tensor, a seeded random subset of elements is probed
// (0 = probe everything). Relative error uses max(|a|,|n|,1e-6) as the
// denominator so exact-zero gradients compare cleanly.
struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass(double tol) const { return max_rel_err < tol; }
};

GradCheckReport grad_check(
    const std::function<Tensor()>& build,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double eps = 1e-3, int max_samples_per_tensor = 0, std::uint64_t seed = 0);

}  // namespace da
