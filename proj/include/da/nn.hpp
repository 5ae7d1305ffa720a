#pragma once

#include <cstdint>
#include <vector>

#include "da/autodiff.hpp"

namespace da {

// Convolution layer parameters shared by the small networks in this project.
struct ConvLayer {
  int in_c = 0;
  int out_c = 0;
  int ksize = 3;
  int stride = 1;
  Tensor weight;  // {out_c, in_c, k, k}
  Tensor bias;    // {1, out_c, 1, 1}
};

// He fan-in initialization, zero bias.
ConvLayer make_conv(int in_c, int out_c, int ksize, int stride, Rng& rng);

inline Tensor apply(const ConvLayer& layer, const Tensor& x) {
  return conv2d(x, layer.weight, layer.bias, layer.stride);
}

void append_params(const std::vector<ConvLayer>& layers,
                   std::vector<Tensor>* out);

std::int64_t param_count(const std::vector<ConvLayer>& layers);

}  // namespace da
