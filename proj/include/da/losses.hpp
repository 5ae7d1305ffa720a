#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "da/image.hpp"
#include "da/nn.hpp"

namespace da {

enum class TauMode { fixed, learned, taunet };

struct LossConfig {
  TauMode tau_mode = TauMode::fixed;
  double tau = 0.8;         // threshold when tau_mode == fixed
  double lambda1 = 0.1;     // smoothness weight
  double lambda2 = 0.1;     // reconstruction weight
  double alpha = 0.85;      // SSIM share of the reconstruction term
  double gate_temp = 50.0;  // soft-gate temperature for learned thresholds
};

void validate_loss_config(const LossConfig& config);

// Hard-masked confidence-guided term:
//   L_c = (1/|P_v|) sum_{p in P_v} C(p) * |pred(p) - labels(p)|,
//   P_v = {p : C(p) > tau, labels(p) valid}.
// Masked pixels contribute neither value nor gradient; an empty mask gives
// a constant zero with *pv_count = 0.
Tensor confidence_guided_loss(const Tensor& pred, const DisparityMap& labels,
                              const ConfidenceMap& conf, double tau,
                              std::size_t* pv_count = nullptr);

// Learnable-threshold variant: the hard indicator is replaced by the gate
// sigmoid(gate_temp * (C - tau)) so tau receives gradient, and the
// logarithmic barrier -log(1 - tau) discourages masking everything out.
// tau must be a scalar tensor in (0,1) (typically sigmoid of a free scalar).
// *pv_count reports the hard count at the current tau value.
Tensor learnable_tau_loss(const Tensor& pred, const DisparityMap& labels,
                          const ConfidenceMap& conf, const Tensor& tau,
                          double gate_temp, std::size_t* pv_count = nullptr);

// Shallow per-image threshold predictor: three 3x3 convolutions with 64
// filters, global average pooling to a scalar, sigmoid into (0,1). The
// final bias starts at logit(0.99) so training begins near full masking.
struct TauNetWeights {
  std::vector<ConvLayer> layers;

  std::vector<Tensor> params() const {
    std::vector<Tensor> out;
    append_params(layers, &out);
    return out;
  }
};

TauNetWeights taunet_init(std::uint64_t seed);
Tensor taunet_forward(const TauNetWeights& net, const Image& reference);
void save_taunet(const TauNetWeights& net, const std::string& path);
TauNetWeights load_taunet(const std::string& path);

// Edge-aware smoothness over interior pixels (full Sobel support):
//   mean |sobel_x pred| * exp(-|sobel_x I|) + |sobel_y pred| * exp(-|sobel_y I|)
Tensor smoothness_loss(const Tensor& pred, const Image& reference);

// Photometric term: warp the right view by the prediction and mix
// alpha * (1-SSIM)/2 with (1-alpha) * L1. SSIM uses 3x3 uniform block
// statistics with stabilizers (0.01^2, 0.03^2) on the [0,1] range.
Tensor reconstruction_loss(const Image& left, const Image& right,
                           const Tensor& pred, double alpha = 0.85);

// L = L_c + lambda1 * L_s + lambda2 * L_r; pass nullptr to drop a term.
Tensor total_loss(const Tensor& data_term, const Tensor* smoothness_term,
                  const Tensor* reconstruction_term, const LossConfig& config);

}  // namespace da
