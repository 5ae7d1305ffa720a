#include "da/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace da {

using detail::Node;

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

namespace {

void check_finite(const std::vector<Scalar>& v, const char* op) {
  for (Scalar x : v) {
    if (!std::isfinite(x))
      throw NonFiniteValue(std::string(op) + ": non-finite value in result");
  }
}

void require_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw ShapeMismatch(std::string(op) + ": " + to_string(a.shape()) +
                        " vs " + to_string(b.shape()));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ArgumentError(std::string(op) + ": empty tensor");
}

inline int clampi(int v, int lo, int hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace

Tensor make_op(Shape shape, std::vector<Scalar> value,
               std::vector<Tensor> parents,
               std::function<void(Node&)> backward, const char* op_name) {
  check_finite(value, op_name);
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  bool needs_grad = false;
  for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  node->requires_grad = needs_grad;
  if (needs_grad) {
    node->grad.assign(node->value.size(), 0.0);
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// Tensor basics

Tensor Tensor::constant(const Shape& shape, std::vector<Scalar> values) {
  if (static_cast<std::int64_t>(values.size()) != shape.size())
    throw ShapeMismatch("tensor: value count " +
                        std::to_string(values.size()) + " != shape " +
                        to_string(shape));
  return make_op(shape, std::move(values), {}, nullptr, "constant");
}

Tensor Tensor::constant_scalar(Scalar v) {
  return constant(Shape::scalar(), {v});
}

Tensor Tensor::from_floats(const Shape& shape, const std::vector<float>& v,
                           bool requires_grad) {
  std::vector<Scalar> d(v.begin(), v.end());
  return requires_grad ? param(shape, std::move(d))
                       : constant(shape, std::move(d));
}

Tensor Tensor::param(const Shape& shape, std::vector<Scalar> values) {
  Tensor t = constant(shape, std::move(values));
  t.node_->requires_grad = true;
  t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  std::vector<Scalar> v(static_cast<std::size_t>(shape.size()), 0.0);
  return requires_grad ? param(shape, std::move(v))
                       : constant(shape, std::move(v));
}

const Shape& Tensor::shape() const {
  if (!node_) throw ArgumentError("tensor: empty");
  return node_->shape;
}

const std::vector<Scalar>& Tensor::value() const {
  if (!node_) throw ArgumentError("tensor: empty");
  return node_->value;
}

std::vector<Scalar>& Tensor::value() {
  if (!node_) throw ArgumentError("tensor: empty");
  return node_->value;
}

const std::vector<Scalar>& Tensor::grad() const {
  if (!node_) throw ArgumentError("tensor: empty");
  return node_->grad;
}

std::vector<Scalar>& Tensor::grad() {
  if (!node_) throw ArgumentError("tensor: empty");
  return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Scalar Tensor::item() const {
  if (!node_) throw ArgumentError("tensor: empty");
  if (!node_->shape.is_scalar())
    throw NotScalar("item: tensor has shape " + to_string(node_->shape));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (node_ && node_->requires_grad)
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void zero_grads(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
}

// ---------------------------------------------------------------------------
// Elementwise ops

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  require_defined(a, name);
  const auto& av = a.value();
  std::vector<Scalar> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto ap = a.node();
  return make_op(
      a.shape(), std::move(out), {a},
      [ap, bwd](Node& self) {
        if (!ap->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          ap->grad[i] += self.grad[i] * bwd(ap->value[i], self.value[i]);
      },
      name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_shape(a, b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<Scalar> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  auto ap = a.node();
  auto bp = b.node();
  return make_op(
      a.shape(), std::move(out), {a, b},
      [ap, bp](Node& self) {
        if (ap->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            ap->grad[i] += self.grad[i];
        if (bp->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            bp->grad[i] += self.grad[i];
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_shape(a, b, "sub");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<Scalar> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  auto ap = a.node();
  auto bp = b.node();
  return make_op(
      a.shape(), std::move(out), {a, b},
      [ap, bp](Node& self) {
        if (ap->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            ap->grad[i] += self.grad[i];
        if (bp->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            bp->grad[i] -= self.grad[i];
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<Scalar> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  auto ap = a.node();
  auto bp = b.node();
  return make_op(
      a.shape(), std::move(out), {a, b},
      [ap, bp](Node& self) {
        if (ap->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            ap->grad[i] += self.grad[i] * bp->value[i];
        if (bp->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            bp->grad[i] += self.grad[i] * ap->value[i];
      },
      "mul");
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_defined(a, "div");
  require_defined(b, "div");
  require_shape(a, b, "div");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<Scalar> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] / bv[i];
  auto ap = a.node();
  auto bp = b.node();
  return make_op(
      a.shape(), std::move(out), {a, b},
      [ap, bp](Node& self) {
        if (ap->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            ap->grad[i] += self.grad[i] / bp->value[i];
        if (bp->requires_grad)
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            bp->grad[i] -= self.grad[i] * ap->value[i] /
                           (bp->value[i] * bp->value[i]);
      },
      "div");
}

Tensor scalar_mul(const Tensor& a, Scalar s) {
  return unary_op(
      a, "scalar_mul", [s](Scalar x) { return x * s; },
      [s](Scalar, Scalar) { return s; });
}

Tensor scalar_add(const Tensor& a, Scalar s) {
  return unary_op(
      a, "scalar_add", [s](Scalar x) { return x + s; },
      [](Scalar, Scalar) { return 1.0; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, "abs", [](Scalar x) { return std::fabs(x); },
      [](Scalar x, Scalar) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, "exp", [](Scalar x) { return std::exp(x); },
      [](Scalar, Scalar y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, "log", [](Scalar x) { return std::log(x); },
      [](Scalar x, Scalar) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid",
      [](Scalar x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const Scalar e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Scalar, Scalar y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, Scalar negative_slope) {
  const Scalar s = negative_slope;
  return unary_op(
      a, "leaky_relu", [s](Scalar x) { return x > 0.0 ? x : s * x; },
      [s](Scalar x, Scalar) { return x > 0.0 ? 1.0 : s; });
}

Tensor softplus(const Tensor& a) {
  // softplus(x) = max(x,0) + log(1 + exp(-|x|)); composed from primitives so
  // the backward pass needs no dedicated rule.
  Tensor relu_part = leaky_relu(a, 0.0);
  Tensor tail = log(scalar_add(exp(scalar_mul(abs(a), -1.0)), 1.0));
  return add(relu_part, tail);
}

// ---------------------------------------------------------------------------
// Convolution

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride) {
  require_defined(x, "conv2d");
  require_defined(w, "conv2d");
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (xs.n != 1) throw ShapeMismatch("conv2d: input must have n=1");
  if (ws.h != ws.w || ws.h % 2 == 0)
    throw ArgumentError("conv2d: kernel must be square with odd size");
  if (ws.c != xs.c)
    throw ShapeMismatch("conv2d: weight expects " + std::to_string(ws.c) +
                        " input channels, got " + std::to_string(xs.c));
  if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
  const int C = xs.c, H = xs.h, W = xs.w;
  const int OC = ws.n, K = ws.h, P = K / 2;
  if (bias.defined()) {
    const Shape bs = bias.shape();
    if (!(bs == Shape::chw(OC, 1, 1)))
      throw ShapeMismatch("conv2d: bias shape " + to_string(bs));
  }
  const int OH = (H + stride - 1) / stride;
  const int OW = (W + stride - 1) / stride;

  const auto& xv = x.value();
  const auto& wv = w.value();
  std::vector<Scalar> out(static_cast<std::size_t>(OC) * OH * OW, 0.0);

  auto wat = [&](int oc, int ic, int ky, int kx) -> Scalar {
    return wv[((static_cast<std::size_t>(oc) * C + ic) * K + ky) * K + kx];
  };

  if (bias.defined()) {
    const auto& bv = bias.value();
    for (int oc = 0; oc < OC; ++oc)
      std::fill(out.begin() + static_cast<std::size_t>(oc) * OH * OW,
                out.begin() + static_cast<std::size_t>(oc + 1) * OH * OW,
                bv[oc]);
  }
  for (int oc = 0; oc < OC; ++oc) {
    for (int ic = 0; ic < C; ++ic) {
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          const Scalar wk = wat(oc, ic, ky, kx);
          if (wk == 0.0) continue;
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = clampi(oy * stride + ky - P, 0, H - 1);
            Scalar* orow = &out[(static_cast<std::size_t>(oc) * OH + oy) * OW];
            const Scalar* irow =
                &xv[(static_cast<std::size_t>(ic) * H + iy) * W];
            if (stride == 1) {
              // interior has no x-clamping: [P-kx, W-1-(kx-P)]
              const int x_lo = std::max(0, P - kx);
              const int x_hi = std::min(OW - 1, W - 1 + P - kx);
              for (int ox = 0; ox < x_lo; ++ox)
                orow[ox] += wk * irow[clampi(ox + kx - P, 0, W - 1)];
              for (int ox = x_lo; ox <= x_hi; ++ox)
                orow[ox] += wk * irow[ox + kx - P];
              for (int ox = x_hi + 1; ox < OW; ++ox)
                orow[ox] += wk * irow[clampi(ox + kx - P, 0, W - 1)];
            } else {
              for (int ox = 0; ox < OW; ++ox)
                orow[ox] += wk * irow[clampi(ox * stride + kx - P, 0, W - 1)];
            }
          }
        }
      }
    }
  }

  auto xp = x.node();
  auto wp = w.node();
  auto bp = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);

  auto backward = [xp, wp, bp, C, H, W, OC, K, P, OH, OW,
                   stride](Node& self) {
    const auto& g = self.grad;
    if (bp && bp->requires_grad) {
      for (int oc = 0; oc < OC; ++oc) {
        Scalar acc = 0.0;
        const Scalar* gch = &g[static_cast<std::size_t>(oc) * OH * OW];
        for (int i = 0; i < OH * OW; ++i) acc += gch[i];
        bp->grad[oc] += acc;
      }
    }
    if (wp->requires_grad) {
      for (int oc = 0; oc < OC; ++oc) {
        for (int ic = 0; ic < C; ++ic) {
          for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
              Scalar acc = 0.0;
              for (int oy = 0; oy < OH; ++oy) {
                const int iy = clampi(oy * stride + ky - P, 0, H - 1);
                const Scalar* grow =
                    &g[(static_cast<std::size_t>(oc) * OH + oy) * OW];
                const Scalar* irow =
                    &xp->value[(static_cast<std::size_t>(ic) * H + iy) * W];
                for (int ox = 0; ox < OW; ++ox)
                  acc += grow[ox] * irow[clampi(ox * stride + kx - P, 0, W - 1)];
              }
              wp->grad[((static_cast<std::size_t>(oc) * C + ic) * K + ky) * K +
                       kx] += acc;
            }
          }
        }
      }
    }
    if (xp->requires_grad) {
      for (int oc = 0; oc < OC; ++oc) {
        for (int ic = 0; ic < C; ++ic) {
          for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
              const Scalar wk =
                  wp->value[((static_cast<std::size_t>(oc) * C + ic) * K + ky) *
                                K +
                            kx];
              if (wk == 0.0) continue;
              for (int oy = 0; oy < OH; ++oy) {
                const int iy = clampi(oy * stride + ky - P, 0, H - 1);
                const Scalar* grow =
                    &g[(static_cast<std::size_t>(oc) * OH + oy) * OW];
                Scalar* xrow =
                    &xp->grad[(static_cast<std::size_t>(ic) * H + iy) * W];
                for (int ox = 0; ox < OW; ++ox)
                  xrow[clampi(ox * stride + kx - P, 0, W - 1)] +=
                      wk * grow[ox];
              }
            }
          }
        }
      }
    }
  };

  return make_op(Shape::chw(OC, OH, OW), std::move(out), std::move(parents),
                 std::move(backward), "conv2d");
}

// ---------------------------------------------------------------------------
// Resampling

Tensor upsample2_nearest(const Tensor& x) {
  require_defined(x, "upsample2_nearest");
  const Shape xs = x.shape();
  if (xs.n != 1) throw ShapeMismatch("upsample2_nearest: input must have n=1");
  const int C = xs.c, H = xs.h, W = xs.w;
  const int OH = 2 * H, OW = 2 * W;
  const auto& xv = x.value();
  std::vector<Scalar> out(static_cast<std::size_t>(C) * OH * OW);
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < OH; ++oy) {
      const Scalar* irow = &xv[(static_cast<std::size_t>(c) * H + oy / 2) * W];
      Scalar* orow = &out[(static_cast<std::size_t>(c) * OH + oy) * OW];
      for (int ox = 0; ox < OW; ++ox) orow[ox] = irow[ox / 2];
    }
  auto xp = x.node();
  return make_op(
      Shape::chw(C, OH, OW), std::move(out), {x},
      [xp, C, H, W, OH, OW](Node& self) {
        if (!xp->requires_grad) return;
        for (int c = 0; c < C; ++c)
          for (int oy = 0; oy < OH; ++oy) {
            const Scalar* grow =
                &self.grad[(static_cast<std::size_t>(c) * OH + oy) * OW];
            Scalar* xrow =
                &xp->grad[(static_cast<std::size_t>(c) * H + oy / 2) * W];
            for (int ox = 0; ox < OW; ++ox) xrow[ox / 2] += grow[ox];
          }
      },
      "upsample2_nearest");
}

Tensor crop2d(const Tensor& x, int y0, int x0, int out_h, int out_w) {
  require_defined(x, "crop2d");
  const Shape xs = x.shape();
  if (xs.n != 1) throw ShapeMismatch("crop2d: input must have n=1");
  if (y0 < 0 || x0 < 0 || out_h < 1 || out_w < 1 || y0 + out_h > xs.h ||
      x0 + out_w > xs.w)
    throw ArgumentError("crop2d: region outside input");
  const int C = xs.c, H = xs.h, W = xs.w;
  const auto& xv = x.value();
  std::vector<Scalar> out(static_cast<std::size_t>(C) * out_h * out_w);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int xx = 0; xx < out_w; ++xx)
        out[(static_cast<std::size_t>(c) * out_h + y) * out_w + xx] =
            xv[(static_cast<std::size_t>(c) * H + y0 + y) * W + x0 + xx];
  auto xp = x.node();
  return make_op(
      Shape::chw(C, out_h, out_w), std::move(out), {x},
      [xp, C, H, W, y0, x0, out_h, out_w](Node& self) {
        if (!xp->requires_grad) return;
        for (int c = 0; c < C; ++c)
          for (int y = 0; y < out_h; ++y)
            for (int xx = 0; xx < out_w; ++xx)
              xp->grad[(static_cast<std::size_t>(c) * H + y0 + y) * W + x0 +
                       xx] +=
                  self.grad[(static_cast<std::size_t>(c) * out_h + y) * out_w +
                            xx];
      },
      "crop2d");
}

// ---------------------------------------------------------------------------
// Sobel (depthwise, fixed kernels, clamp-to-edge)

namespace {

Tensor sobel_impl(const Tensor& x, bool horizontal, const char* name) {
  require_defined(x, name);
  const Shape xs = x.shape();
  if (xs.n != 1) throw ShapeMismatch("sobel: input must have n=1");
  const int C = xs.c, H = xs.h, W = xs.w;
  // kx[ky][kx] for sobel_x; transposed for sobel_y.
  static const Scalar kx3[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const auto& xv = x.value();
  std::vector<Scalar> out(xv.size(), 0.0);
  auto kern = [&](int ky, int kk) -> Scalar {
    return horizontal ? kx3[ky][kk] : kx3[kk][ky];
  };
  for (int c = 0; c < C; ++c) {
    const Scalar* ch = &xv[static_cast<std::size_t>(c) * H * W];
    Scalar* och = &out[static_cast<std::size_t>(c) * H * W];
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        Scalar acc = 0.0;
        for (int ky = 0; ky < 3; ++ky)
          for (int kk = 0; kk < 3; ++kk) {
            const Scalar k = kern(ky, kk);
            if (k == 0.0) continue;
            const int iy = clampi(y + ky - 1, 0, H - 1);
            const int ix = clampi(xx + kk - 1, 0, W - 1);
            acc += k * ch[static_cast<std::size_t>(iy) * W + ix];
          }
        och[static_cast<std::size_t>(y) * W + xx] = acc;
      }
  }
  auto xp = x.node();
  return make_op(
      xs, std::move(out), {x},
      [xp, C, H, W, horizontal](Node& self) {
        if (!xp->requires_grad) return;
        static const Scalar kx3b[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
        for (int c = 0; c < C; ++c) {
          const Scalar* gch = &self.grad[static_cast<std::size_t>(c) * H * W];
          Scalar* xch = &xp->grad[static_cast<std::size_t>(c) * H * W];
          for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
              const Scalar g = gch[static_cast<std::size_t>(y) * W + xx];
              if (g == 0.0) continue;
              for (int ky = 0; ky < 3; ++ky)
                for (int kk = 0; kk < 3; ++kk) {
                  const Scalar k = horizontal ? kx3b[ky][kk] : kx3b[kk][ky];
                  if (k == 0.0) continue;
                  const int iy = clampi(y + ky - 1, 0, H - 1);
                  const int ix = clampi(xx + kk - 1, 0, W - 1);
                  xch[static_cast<std::size_t>(iy) * W + ix] += k * g;
                }
            }
        }
      },
      name);
}

}  // namespace

Tensor sobel_x(const Tensor& x) { return sobel_impl(x, true, "sobel_x"); }
Tensor sobel_y(const Tensor& x) { return sobel_impl(x, false, "sobel_y"); }

// ---------------------------------------------------------------------------
// Bilinear warp

Tensor bilinear_warp(const Tensor& image, const Tensor& disparity) {
  require_defined(image, "bilinear_warp");
  require_defined(disparity, "bilinear_warp");
  const Shape is = image.shape();
  const Shape ds = disparity.shape();
  if (is.n != 1 || is.c != 1 || ds.n != 1 || ds.c != 1)
    throw ShapeMismatch("bilinear_warp: single-channel inputs required");
  if (!(is == ds))
    throw ShapeMismatch("bilinear_warp: " + to_string(is) + " vs " +
                        to_string(ds));
  const int H = is.h, W = is.w;
  const auto& iv = image.value();
  const auto& dv = disparity.value();
  std::vector<Scalar> out(iv.size());
  for (int y = 0; y < H; ++y) {
    const Scalar* irow = &iv[static_cast<std::size_t>(y) * W];
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      Scalar xs = static_cast<Scalar>(x) - dv[i];
      if (xs < 0.0) xs = 0.0;
      if (xs > W - 1) xs = W - 1;
      const int x0 = static_cast<int>(std::floor(xs));
      const int x1 = std::min(x0 + 1, W - 1);
      const Scalar f = xs - x0;
      out[i] = (1.0 - f) * irow[x0] + f * irow[x1];
    }
  }
  auto ip = image.node();
  auto dp = disparity.node();
  return make_op(
      is, std::move(out), {image, disparity},
      [ip, dp, H, W](Node& self) {
        for (int y = 0; y < H; ++y) {
          const Scalar* irow = &ip->value[static_cast<std::size_t>(y) * W];
          for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            const Scalar g = self.grad[i];
            if (g == 0.0) continue;
            const Scalar xs_raw = static_cast<Scalar>(x) - dp->value[i];
            Scalar xs = xs_raw;
            if (xs < 0.0) xs = 0.0;
            if (xs > W - 1) xs = W - 1;
            const int x0 = static_cast<int>(std::floor(xs));
            const int x1 = std::min(x0 + 1, W - 1);
            const Scalar f = xs - x0;
            if (ip->requires_grad) {
              ip->grad[static_cast<std::size_t>(y) * W + x0] += g * (1.0 - f);
              ip->grad[static_cast<std::size_t>(y) * W + x1] += g * f;
            }
            if (dp->requires_grad && xs_raw > 0.0 && xs_raw < W - 1) {
              // d(out)/d(xs) is the local finite slope; xs = x - d.
              dp->grad[i] -= g * (irow[x1] - irow[x0]);
            }
          }
        }
      },
      "bilinear_warp");
}

// ---------------------------------------------------------------------------
// Reductions

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  const auto& xv = x.value();
  if (xv.empty()) throw ArgumentError("mean: empty tensor");
  Scalar acc = 0.0;
  for (Scalar v : xv) acc += v;
  const Scalar inv = 1.0 / static_cast<Scalar>(xv.size());
  auto xp = x.node();
  return make_op(
      Shape::scalar(), {acc * inv}, {x},
      [xp, inv](Node& self) {
        if (!xp->requires_grad) return;
        const Scalar g = self.grad[0] * inv;
        for (Scalar& gg : xp->grad) gg += g;
      },
      "mean");
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  const auto& xv = x.value();
  Scalar acc = 0.0;
  for (Scalar v : xv) acc += v;
  auto xp = x.node();
  return make_op(
      Shape::scalar(), {acc}, {x},
      [xp](Node& self) {
        if (!xp->requires_grad) return;
        const Scalar g = self.grad[0];
        for (Scalar& gg : xp->grad) gg += g;
      },
      "sum");
}

Tensor avg_pool_global(const Tensor& x) {
  require_defined(x, "avg_pool_global");
  const Shape xs = x.shape();
  if (xs.n != 1) throw ShapeMismatch("avg_pool_global: input must have n=1");
  const int C = xs.c;
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
  const auto& xv = x.value();
  std::vector<Scalar> out(C, 0.0);
  for (int c = 0; c < C; ++c) {
    Scalar acc = 0.0;
    const Scalar* ch = &xv[c * hw];
    for (std::size_t i = 0; i < hw; ++i) acc += ch[i];
    out[c] = acc / static_cast<Scalar>(hw);
  }
  auto xp = x.node();
  return make_op(
      Shape::chw(C, 1, 1), std::move(out), {x},
      [xp, C, hw](Node& self) {
        if (!xp->requires_grad) return;
        for (int c = 0; c < C; ++c) {
          const Scalar g = self.grad[c] / static_cast<Scalar>(hw);
          Scalar* ch = &xp->grad[c * hw];
          for (std::size_t i = 0; i < hw; ++i) ch[i] += g;
        }
      },
      "avg_pool_global");
}

Tensor masked_mean(const Tensor& x, const std::vector<Scalar>& mask) {
  require_defined(x, "masked_mean");
  const auto& xv = x.value();
  if (mask.size() != xv.size())
    throw ShapeMismatch("masked_mean: mask size " +
                        std::to_string(mask.size()) + " != tensor size " +
                        std::to_string(xv.size()));
  Scalar wsum = 0.0;
  for (Scalar m : mask) {
    if (m < 0.0) throw ArgumentError("masked_mean: negative mask weight");
    wsum += m;
  }
  if (wsum <= 0.0) throw ArgumentError("masked_mean: mask weights sum to 0");
  Scalar acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += mask[i] * xv[i];
  auto xp = x.node();
  auto mcopy = std::make_shared<std::vector<Scalar>>(mask);
  const Scalar inv = 1.0 / wsum;
  return make_op(
      Shape::scalar(), {acc * inv}, {x},
      [xp, mcopy, inv](Node& self) {
        if (!xp->requires_grad) return;
        const Scalar g = self.grad[0] * inv;
        const auto& m = *mcopy;
        for (std::size_t i = 0; i < m.size(); ++i) xp->grad[i] += g * m[i];
      },
      "masked_mean");
}

Tensor broadcast_scalar(const Tensor& s, const Shape& shape) {
  require_defined(s, "broadcast_scalar");
  if (!s.shape().is_scalar())
    throw NotScalar("broadcast_scalar: source must be scalar");
  std::vector<Scalar> out(static_cast<std::size_t>(shape.size()),
                          s.value()[0]);
  auto sp = s.node();
  return make_op(
      shape, std::move(out), {s},
      [sp](Node& self) {
        if (!sp->requires_grad) return;
        Scalar acc = 0.0;
        for (Scalar g : self.grad) acc += g;
        sp->grad[0] += acc;
      },
      "broadcast_scalar");
}

// ---------------------------------------------------------------------------
// Backward sweep

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (!loss.shape().is_scalar())
    throw NotScalar("backward: loss has shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;  // nothing reachable needs gradients

  // Postorder DFS over grad-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are scratch per sweep; leaf (parameter) gradients
  // accumulate across sweeps until explicitly zeroed.
  for (Node* n : order)
    if (!n->parents.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);

  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// ---------------------------------------------------------------------------
// Adam

AdamState make_adam(const std::vector<Tensor>& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.resize(params.size());
  s.v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i].assign(params[i].value().size(), 0.0);
    s.v[i].assign(params[i].value().size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, const std::vector<Tensor>& params) {
  if (state.m.size() != params.size())
    throw ShapeMismatch("adam_step: state tracks " +
                        std::to_string(state.m.size()) + " tensors, got " +
                        std::to_string(params.size()));
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto& val = p.value();
    const auto& g = p.grad();
    if (state.m[i].size() != val.size())
      throw ShapeMismatch("adam_step: parameter size changed");
    if (g.size() != val.size())
      throw ArgumentError("adam_step: parameter has no gradient buffer");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < val.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      val[j] -= state.lr * mh / (std::sqrt(vh) + state.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient checker

GradCheckReport grad_check(
    const std::function<Tensor()>& build,
    const std::vector<std::pair<std::string, Tensor>>& params, double eps,
    int max_samples_per_tensor, std::uint64_t seed) {
  if (eps <= 0.0) throw ArgumentError("grad_check: eps must be positive");
  GradCheckReport report;

  std::vector<Tensor> plain;
  plain.reserve(params.size());
  for (const auto& [name, t] : params) {
    if (!t.requires_grad())
      throw ArgumentError("grad_check: '" + name + "' does not require grad");
    plain.push_back(t);
  }
  zero_grads(plain);
  backward(build());
  std::vector<std::vector<Scalar>> analytic;
  analytic.reserve(plain.size());
  for (const Tensor& t : plain) analytic.push_back(t.grad());

  Rng rng(seed ^ 0x6772616463686bULL);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = plain[pi];
    const std::int64_t n = static_cast<std::int64_t>(t.value().size());
    std::vector<std::int64_t> indices;
    if (max_samples_per_tensor <= 0 || n <= max_samples_per_tensor) {
      indices.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) indices[i] = i;
    } else {
      std::unordered_set<std::int64_t> chosen;
      while (static_cast<int>(chosen.size()) < max_samples_per_tensor)
        chosen.insert(rng.uniform_int(0, static_cast<int>(n - 1)));
      indices.assign(chosen.begin(), chosen.end());
      std::sort(indices.begin(), indices.end());
    }

    GradCheckEntry entry;
    entry.name = params[pi].first;
    entry.checked = static_cast<std::int64_t>(indices.size());
    auto& vals = t.value();
    for (std::int64_t idx : indices) {
      const Scalar keep = vals[idx];
      vals[idx] = keep + eps;
      const Scalar fp = build().item();
      vals[idx] = keep - eps;
      const Scalar fm = build().item();
      vals[idx] = keep;
      const Scalar numeric = (fp - fm) / (2.0 * eps);
      const Scalar a = analytic[pi][idx];
      const Scalar denom =
          std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      const Scalar rel = std::fabs(a - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace da
