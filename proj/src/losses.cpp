#include "da/losses.hpp"

#include <cmath>

#include "da/checkpoint.hpp"

namespace da {

namespace {

void require_pred_shape(const Tensor& pred, int width, int height,
                        const char* what) {
  if (!(pred.shape() == Shape::map2d(height, width)))
    throw ShapeMismatch(std::string(what) + ": prediction " +
                        to_string(pred.shape()) + " vs map " +
                        std::to_string(width) + "x" + std::to_string(height));
}

Tensor labels_tensor(const DisparityMap& labels) {
  std::vector<Scalar> v(labels.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float d = labels.data[i];
    v[i] = d < 0.0f ? 0.0 : static_cast<double>(d);  // masked anyway
  }
  return Tensor::constant(Shape::map2d(labels.height, labels.width),
                          std::move(v));
}

Tensor image_tensor(const Image& img) {
  return Tensor::from_floats(Shape::map2d(img.height, img.width), img.data);
}

}  // namespace

void validate_loss_config(const LossConfig& config) {
  if (config.lambda1 < 0.0 || config.lambda2 < 0.0)
    throw ArgumentError("loss config: weights must be >= 0");
  if (config.alpha < 0.0 || config.alpha > 1.0)
    throw ArgumentError("loss config: alpha must be in [0,1]");
  if (config.tau_mode == TauMode::fixed &&
      (config.tau < 0.0 || config.tau >= 1.0))
    throw ArgumentError("loss config: fixed tau must be in [0,1)");
  if (config.gate_temp <= 0.0)
    throw ArgumentError("loss config: gate temperature must be > 0");
}

Tensor confidence_guided_loss(const Tensor& pred, const DisparityMap& labels,
                              const ConfidenceMap& conf, double tau,
                              std::size_t* pv_count) {
  require_same_shape(labels.width, labels.height, conf.width, conf.height,
                     "confidence_guided_loss");
  require_pred_shape(pred, labels.width, labels.height,
                     "confidence_guided_loss");

  std::vector<Scalar> weight(labels.size(), 0.0);
  std::size_t pv = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.data[i] < 0.0f) continue;  // sentinels are not measurements
    if (static_cast<double>(conf.data[i]) > tau) {
      weight[i] = static_cast<double>(conf.data[i]);
      ++pv;
    }
  }
  if (pv_count) *pv_count = pv;
  if (pv == 0) return Tensor::constant_scalar(0.0);

  Tensor residual = abs(sub(pred, labels_tensor(labels)));
  Tensor weighted = mul(residual, Tensor::constant(pred.shape(), weight));
  return scalar_mul(sum(weighted), 1.0 / static_cast<double>(pv));
}

Tensor learnable_tau_loss(const Tensor& pred, const DisparityMap& labels,
                          const ConfidenceMap& conf, const Tensor& tau,
                          double gate_temp, std::size_t* pv_count) {
  require_same_shape(labels.width, labels.height, conf.width, conf.height,
                     "learnable_tau_loss");
  require_pred_shape(pred, labels.width, labels.height, "learnable_tau_loss");
  if (!tau.shape().is_scalar())
    throw NotScalar("learnable_tau_loss: tau must be a scalar tensor");
  if (gate_temp <= 0.0)
    throw ArgumentError("learnable_tau_loss: gate_temp must be > 0");
  const double tau_value = tau.value()[0];
  if (tau_value <= 0.0 || tau_value >= 1.0)
    throw RangeError("learnable_tau_loss: tau outside (0,1)");

  std::vector<Scalar> valid(labels.size(), 0.0);
  std::vector<Scalar> conf_weight(labels.size(), 0.0);
  std::size_t n_valid = 0, pv = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.data[i] < 0.0f) continue;
    valid[i] = 1.0;
    conf_weight[i] = static_cast<double>(conf.data[i]);
    ++n_valid;
    if (static_cast<double>(conf.data[i]) > tau_value) ++pv;
  }
  if (pv_count) *pv_count = pv;

  // Barrier keeps tau away from 1 (full masking would zero the data term).
  Tensor penalty =
      scalar_mul(log(sub(Tensor::constant_scalar(1.0), tau)), -1.0);
  if (n_valid == 0) return penalty;

  const Shape shape = pred.shape();
  Tensor conf_const = Tensor::constant(shape, conf_weight);
  Tensor gate = sigmoid(scalar_mul(
      sub(conf_const, broadcast_scalar(tau, shape)), gate_temp));
  gate = mul(gate, Tensor::constant(shape, valid));

  Tensor residual = abs(sub(pred, labels_tensor(labels)));
  Tensor errors = mul(conf_const, residual);
  Tensor data = div(sum(mul(gate, errors)), sum(gate));
  return add(data, penalty);
}

TauNetWeights taunet_init(std::uint64_t seed) {
  Rng rng(seed ^ 0x7a0e7ULL);
  TauNetWeights net;
  net.layers.push_back(make_conv(1, 64, 3, 1, rng));
  net.layers.push_back(make_conv(64, 64, 3, 1, rng));
  net.layers.push_back(make_conv(64, 64, 3, 1, rng));
  // logit(0.99): the threshold starts high and is learned downward.
  net.layers.back().bias.value().assign(64, std::log(0.99 / 0.01));
  return net;
}

Tensor taunet_forward(const TauNetWeights& net, const Image& reference) {
  if (net.layers.size() != 3)
    throw ArgumentError("taunet_forward: uninitialized network");
  Tensor t = image_tensor(reference);
  t = leaky_relu(apply(net.layers[0], t));
  t = leaky_relu(apply(net.layers[1], t));
  t = apply(net.layers[2], t);
  return sigmoid(mean(avg_pool_global(t)));
}

void save_taunet(const TauNetWeights& net, const std::string& path) {
  CheckpointHeader header;
  header.kind = CheckpointKind::taunet;
  save_checkpoint(path, header, net.layers);
}

TauNetWeights load_taunet(const std::string& path) {
  TauNetWeights net;
  CheckpointHeader header = load_checkpoint(path, &net.layers);
  if (header.kind != CheckpointKind::taunet)
    throw FormatError("'" + path + "' is not a threshold-network checkpoint");
  if (net.layers.size() != 3)
    throw FormatError("bad threshold checkpoint in '" + path + "'");
  return net;
}

Tensor smoothness_loss(const Tensor& pred, const Image& reference) {
  require_pred_shape(pred, reference.width, reference.height,
                     "smoothness_loss");
  const int w = reference.width, h = reference.height;
  if (w < 3 || h < 3) return Tensor::constant_scalar(0.0);

  // Image gradient weights carry no gradient; computed once as constants.
  Tensor img = image_tensor(reference);
  Tensor wx = exp(scalar_mul(abs(sobel_x(img)), -1.0));
  Tensor wy = exp(scalar_mul(abs(sobel_y(img)), -1.0));

  Tensor term = add(mul(abs(sobel_x(pred)), wx), mul(abs(sobel_y(pred)), wy));

  // Average where the 3x3 Sobel support is fully inside the image.
  std::vector<Scalar> interior(pred.value().size(), 0.0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      interior[static_cast<std::size_t>(y) * w + x] = 1.0;
  return masked_mean(term, interior);
}

Tensor reconstruction_loss(const Image& left, const Image& right,
                           const Tensor& pred, double alpha) {
  require_same_shape(left.width, left.height, right.width, right.height,
                     "reconstruction_loss");
  require_pred_shape(pred, left.width, left.height, "reconstruction_loss");
  if (alpha < 0.0 || alpha > 1.0)
    throw ArgumentError("reconstruction_loss: alpha must be in [0,1]");

  Tensor left_t = image_tensor(left);
  Tensor warped = bilinear_warp(image_tensor(right), pred);

  // 3x3 uniform block statistics, clamp-to-edge.
  Tensor box = Tensor::constant(Shape::conv_weight(1, 1, 3),
                                std::vector<Scalar>(9, 1.0 / 9.0));
  auto blur = [&box](const Tensor& t) { return conv2d(t, box, Tensor()); };

  Tensor mu1 = blur(left_t);
  Tensor mu2 = blur(warped);
  Tensor mu1_sq = mul(mu1, mu1);
  Tensor mu2_sq = mul(mu2, mu2);
  Tensor mu12 = mul(mu1, mu2);
  Tensor sigma1 = sub(blur(mul(left_t, left_t)), mu1_sq);
  Tensor sigma2 = sub(blur(mul(warped, warped)), mu2_sq);
  Tensor sigma12 = sub(blur(mul(left_t, warped)), mu12);

  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  Tensor numer = mul(scalar_add(scalar_mul(mu12, 2.0), c1),
                     scalar_add(scalar_mul(sigma12, 2.0), c2));
  Tensor denom = mul(scalar_add(add(mu1_sq, mu2_sq), c1),
                     scalar_add(add(sigma1, sigma2), c2));
  Tensor ssim = div(numer, denom);

  Tensor ssim_term = scalar_mul(scalar_add(scalar_mul(ssim, -1.0), 1.0), 0.5);
  Tensor l1_term = abs(sub(left_t, warped));
  return mean(add(scalar_mul(ssim_term, alpha),
                  scalar_mul(l1_term, 1.0 - alpha)));
}

Tensor total_loss(const Tensor& data_term, const Tensor* smoothness_term,
                  const Tensor* reconstruction_term,
                  const LossConfig& config) {
  validate_loss_config(config);
  Tensor total = data_term;
  if (smoothness_term && config.lambda1 > 0.0)
    total = add(total, scalar_mul(*smoothness_term, config.lambda1));
  if (reconstruction_term && config.lambda2 > 0.0)
    total = add(total, scalar_mul(*reconstruction_term, config.lambda2));
  return total;
}

}  // namespace da
