#include "da/nn.hpp"

#include <cmath>

namespace da {

ConvLayer make_conv(int in_c, int out_c, int ksize, int stride, Rng& rng) {
  if (in_c < 1 || out_c < 1 || ksize < 1 || ksize % 2 == 0 || stride < 1)
    throw ArgumentError("make_conv: bad layer geometry");
  ConvLayer layer;
  layer.in_c = in_c;
  layer.out_c = out_c;
  layer.ksize = ksize;
  layer.stride = stride;
  const int fan_in = in_c * ksize * ksize;
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<Scalar> w(static_cast<std::size_t>(out_c) * in_c * ksize *
                        ksize);
  for (auto& v : w) v = std_dev * rng.normal();
  layer.weight = Tensor::param(Shape::conv_weight(out_c, in_c, ksize),
                               std::move(w));
  layer.bias = Tensor::param(Shape::chw(out_c, 1, 1),
                             std::vector<Scalar>(out_c, 0.0));
  return layer;
}

void append_params(const std::vector<ConvLayer>& layers,
                   std::vector<Tensor>* out) {
  for (const ConvLayer& l : layers) {
    out->push_back(l.weight);
    out->push_back(l.bias);
  }
}

std::int64_t param_count(const std::vector<ConvLayer>& layers) {
  std::int64_t n = 0;
  for (const ConvLayer& l : layers)
    n += l.weight.shape().size() + l.bias.shape().size();
  return n;
}

}  // namespace da
