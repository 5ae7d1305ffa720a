#include "da/model.hpp"

#include <cmath>

#include "da/checkpoint.hpp"

namespace da {

namespace {

constexpr int kDownsampleFactor = 8;  // three stride-2 stages

int padded_size(int v) {
  return ((v + kDownsampleFactor - 1) / kDownsampleFactor) * kDownsampleFactor;
}

// Stacks 1 or 2 views into a {1,C,H,W} constant, edge-padding right/bottom
// to multiples of the downsample factor.
Tensor stacked_input(const Image& left, const Image* right, int pad_h,
                     int pad_w) {
  const int channels = right ? 2 : 1;
  std::vector<Scalar> data(static_cast<std::size_t>(channels) * pad_h * pad_w);
  const Image* views[2] = {&left, right};
  for (int c = 0; c < channels; ++c) {
    const Image& img = *views[c];
    for (int y = 0; y < pad_h; ++y) {
      const int sy = std::min(y, img.height - 1);
      for (int x = 0; x < pad_w; ++x) {
        const int sx = std::min(x, img.width - 1);
        data[(static_cast<std::size_t>(c) * pad_h + y) * pad_w + x] =
            img.at(sx, sy);
      }
    }
  }
  return Tensor::constant(Shape::chw(channels, pad_h, pad_w), std::move(data));
}

}  // namespace

TinyDispNet dispnet_init(DispNetMode mode, double d_max, std::uint64_t seed) {
  if (d_max <= 0.0) throw ArgumentError("dispnet_init: d_max must be > 0");
  Rng rng(seed ^ 0xd15bULL);
  TinyDispNet net;
  net.mode = mode;
  net.d_max = d_max;
  const int in_c = mode == DispNetMode::stereo ? 2 : 1;
  net.layers.push_back(make_conv(in_c, 16, 3, 2, rng));  // enc1
  net.layers.push_back(make_conv(16, 32, 3, 2, rng));    // enc2
  net.layers.push_back(make_conv(32, 64, 3, 2, rng));    // enc3
  net.layers.push_back(make_conv(64, 32, 3, 1, rng));    // dec3
  net.layers.push_back(make_conv(32, 16, 3, 1, rng));    // dec2
  net.layers.push_back(make_conv(16, 16, 3, 1, rng));    // dec1
  net.layers.push_back(make_conv(16, 1, 3, 1, rng));     // head
  return net;
}

TinyDispNet dispnet_clone(const TinyDispNet& net) {
  TinyDispNet copy;
  copy.mode = net.mode;
  copy.d_max = net.d_max;
  for (const ConvLayer& l : net.layers) {
    ConvLayer c;
    c.in_c = l.in_c;
    c.out_c = l.out_c;
    c.ksize = l.ksize;
    c.stride = l.stride;
    c.weight = Tensor::param(l.weight.shape(),
                             std::vector<Scalar>(l.weight.value()));
    c.bias = Tensor::param(l.bias.shape(), std::vector<Scalar>(l.bias.value()));
    copy.layers.push_back(std::move(c));
  }
  return copy;
}

Tensor dispnet_forward(const TinyDispNet& net, const Image& left,
                       const Image* right) {
  if (net.layers.size() != 7)
    throw ArgumentError("dispnet_forward: uninitialized network");
  if (net.mode == DispNetMode::stereo) {
    if (!right)
      throw ArgumentError("dispnet_forward: stereo mode needs both views");
    require_same_shape(left.width, left.height, right->width, right->height,
                       "dispnet_forward");
  } else {
    right = nullptr;
  }
  if (left.width < 1 || left.height < 1)
    throw ShapeMismatch("dispnet_forward: empty input");

  const int pad_h = padded_size(left.height);
  const int pad_w = padded_size(left.width);
  Tensor x = stacked_input(left, right, pad_h, pad_w);

  Tensor e1 = leaky_relu(apply(net.layers[0], x));    // H/2
  Tensor e2 = leaky_relu(apply(net.layers[1], e1));   // H/4
  Tensor e3 = leaky_relu(apply(net.layers[2], e2));   // H/8
  Tensor d3 = leaky_relu(add(apply(net.layers[3], upsample2_nearest(e3)), e2));
  Tensor d2 = leaky_relu(add(apply(net.layers[4], upsample2_nearest(d3)), e1));
  Tensor d1 = leaky_relu(apply(net.layers[5], upsample2_nearest(d2)));
  Tensor out = scalar_mul(sigmoid(apply(net.layers[6], d1)), net.d_max);

  if (pad_h != left.height || pad_w != left.width)
    out = crop2d(out, 0, 0, left.height, left.width);
  return out;
}

DisparityMap dispnet_predict(const TinyDispNet& net, const Image& left,
                             const Image* right) {
  Tensor out = dispnet_forward(net, left, right);
  DisparityMap map(left.width, left.height);
  const auto& v = out.value();
  for (std::size_t i = 0; i < map.size(); ++i)
    map.data[i] = static_cast<float>(v[i]);
  return map;
}

void save_dispnet(const TinyDispNet& net, const std::string& path) {
  CheckpointHeader header;
  header.kind = CheckpointKind::dispnet;
  header.extra = {net.mode == DispNetMode::stereo ? 1u : 0u,
                  static_cast<std::uint32_t>(std::lround(net.d_max * 256.0))};
  save_checkpoint(path, header, net.layers);
}

TinyDispNet load_dispnet(const std::string& path) {
  TinyDispNet net;
  CheckpointHeader header = load_checkpoint(path, &net.layers);
  if (header.kind != CheckpointKind::dispnet)
    throw FormatError("'" + path + "' is not a disparity-network checkpoint");
  if (header.extra.size() != 2 || net.layers.size() != 7)
    throw FormatError("bad disparity checkpoint header in '" + path + "'");
  net.mode = header.extra[0] ? DispNetMode::stereo : DispNetMode::mono;
  net.d_max = static_cast<double>(header.extra[1]) / 256.0;
  return net;
}

}  // namespace da
