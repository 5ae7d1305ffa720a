#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "da/image.hpp"
#include "da/nn.hpp"

namespace da {

// Labels for confidence training use the bad3 criterion: a disparity is
// "reliable" iff it is within 3 px of the ground truth.
constexpr double kConfidenceErrorThreshold = 3.0;

// Non-learned baseline: confidence = max(0, 1 - discrepancy/3) from the
// left-right consistency of the two views; out-of-frame lookups and
// sentinel inputs score 0.
ConfidenceMap lrc_confidence(const DisparityMap& d_left,
                             const DisparityMap& d_right);

// Learned estimator operating on the disparity map alone: four 3x3
// convolutions (16/16/16/1 channels), leaky-ReLU hidden activations and a
// sigmoid output. Input disparities are normalized by d_max; sentinels are
// fed as 0 and masked out of the training loss.
struct ConfNetWeights {
  double d_max = 16.0;
  std::vector<ConvLayer> layers;

  std::vector<Tensor> params() const {
    std::vector<Tensor> out;
    append_params(layers, &out);
    return out;
  }
};

ConfNetWeights confnet_init(double d_max, std::uint64_t seed);

// Pre-activation graph over the (constant) normalized disparity input.
Tensor confnet_logits(const ConfNetWeights& net, const DisparityMap& disparity);

ConfidenceMap confnet_forward(const ConfNetWeights& net,
                              const DisparityMap& disparity);

struct ConfTrainConfig {
  int epochs = 14;
  double lr = 0.003;
  std::uint64_t seed = 1;
  double d_max = 16.0;
};

struct ConfEpochStat {
  int epoch = 0;
  double bce = 0.0;
};

// Binary cross-entropy against |D - GT| <= 3 targets on pixels where both
// maps are valid; samples are visited in a seed-shuffled order per epoch.
ConfNetWeights confnet_train(
    const std::vector<std::pair<DisparityMap, DisparityMap>>& samples,
    const ConfTrainConfig& config,
    std::vector<ConfEpochStat>* log = nullptr);

void save_confnet(const ConfNetWeights& net, const std::string& path);
ConfNetWeights load_confnet(const std::string& path);

}  // namespace da
