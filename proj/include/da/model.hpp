#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "da/image.hpp"
#include "da/nn.hpp"

namespace da {

enum class DispNetMode { mono, stereo };

// Small encoder-decoder disparity regressor: three stride-2 encoder
// convolutions (16/32/64 channels), three nearest-upsample decoder stages
// with additive skips, and a head scaled to [0, d_max] by a sigmoid.
// Stereo mode stacks both views as input channels; mono uses the left view
// only. Inputs whose sides are not divisible by 8 are edge-padded
// internally and the output is cropped back.
struct TinyDispNet {
  DispNetMode mode = DispNetMode::stereo;
  double d_max = 16.0;
  std::vector<ConvLayer> layers;  // enc1..enc3, dec3..dec1, head

  std::vector<Tensor> params() const {
    std::vector<Tensor> out;
    append_params(layers, &out);
    return out;
  }
  std::int64_t parameter_count() const { return param_count(layers); }
};

TinyDispNet dispnet_init(DispNetMode mode, double d_max, std::uint64_t seed);

// Deep copy: fresh parameter tensors with identical values.
TinyDispNet dispnet_clone(const TinyDispNet& net);

// right may be null in mono mode and is required in stereo mode.
Tensor dispnet_forward(const TinyDispNet& net, const Image& left,
                       const Image* right);

DisparityMap dispnet_predict(const TinyDispNet& net, const Image& left,
                             const Image* right);

void save_dispnet(const TinyDispNet& net, const std::string& path);
TinyDispNet load_dispnet(const std::string& path);

}  // namespace da
