#include "da/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "da/checkpoint.hpp"

namespace da {

ConfidenceMap lrc_confidence(const DisparityMap& d_left,
                             const DisparityMap& d_right) {
  require_same_shape(d_left.width, d_left.height, d_right.width,
                     d_right.height, "lrc_confidence");
  ConfidenceMap conf(d_left.width, d_left.height, 0.0f);
  for (int y = 0; y < d_left.height; ++y)
    for (int x = 0; x < d_left.width; ++x) {
      const float dl = d_left.at(x, y);
      if (dl < 0.0f) continue;
      const int xr = x - static_cast<int>(std::lround(dl));
      if (xr < 0 || xr >= d_right.width) continue;
      const float dr = d_right.at(xr, y);
      if (dr < 0.0f) continue;
      const float disc = std::fabs(dl - dr);
      conf.at(x, y) = std::max(
          0.0f, 1.0f - disc / static_cast<float>(kConfidenceErrorThreshold));
    }
  return conf;
}

namespace {

Tensor normalized_input(const DisparityMap& disparity, double d_max) {
  std::vector<Scalar> in(disparity.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float d = disparity.data[i];
    in[i] = d < 0.0f ? 0.0
                     : std::clamp(static_cast<double>(d) / d_max, 0.0, 1.0);
  }
  return Tensor::constant(Shape::map2d(disparity.height, disparity.width),
                          std::move(in));
}

}  // namespace

ConfNetWeights confnet_init(double d_max, std::uint64_t seed) {
  if (d_max <= 0.0) throw ArgumentError("confnet_init: d_max must be > 0");
  Rng rng(seed ^ 0xc0f256e7ULL);
  ConfNetWeights net;
  net.d_max = d_max;
  net.layers.push_back(make_conv(1, 16, 3, 1, rng));
  net.layers.push_back(make_conv(16, 16, 3, 1, rng));
  net.layers.push_back(make_conv(16, 16, 3, 1, rng));
  net.layers.push_back(make_conv(16, 1, 3, 1, rng));
  return net;
}

Tensor confnet_logits(const ConfNetWeights& net,
                      const DisparityMap& disparity) {
  if (net.layers.size() < 2)
    throw ArgumentError("confnet_logits: uninitialized network");
  Tensor t = normalized_input(disparity, net.d_max);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    t = apply(net.layers[i], t);
    if (i + 1 < net.layers.size()) t = leaky_relu(t);
  }
  return t;
}

ConfidenceMap confnet_forward(const ConfNetWeights& net,
                              const DisparityMap& disparity) {
  Tensor out = sigmoid(confnet_logits(net, disparity));
  ConfidenceMap conf(disparity.width, disparity.height);
  const auto& v = out.value();
  for (std::size_t i = 0; i < conf.size(); ++i)
    conf.data[i] = static_cast<float>(v[i]);
  return conf;
}

ConfNetWeights confnet_train(
    const std::vector<std::pair<DisparityMap, DisparityMap>>& samples,
    const ConfTrainConfig& config, std::vector<ConfEpochStat>* log) {
  if (samples.empty()) throw EmptyDataset("confnet_train: no samples");
  for (const auto& [d, gt] : samples)
    require_same_shape(d.width, d.height, gt.width, gt.height,
                       "confnet_train");

  ConfNetWeights net = confnet_init(config.d_max, config.seed);
  std::vector<Tensor> params = net.params();
  AdamState adam = make_adam(params, config.lr);
  Rng shuffle_rng(config.seed * 0x9e3779b9ULL + 1);

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(
                    shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);

    double epoch_bce = 0.0;
    std::size_t epoch_terms = 0;
    for (std::size_t idx : order) {
      const DisparityMap& d = samples[idx].first;
      const DisparityMap& gt = samples[idx].second;

      std::vector<Scalar> mask(d.size(), 0.0);
      std::vector<Scalar> one_minus_target(d.size(), 0.0);
      std::size_t labeled = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.data[i] < 0.0f || gt.data[i] < 0.0f) continue;
        mask[i] = 1.0;
        const double err = std::fabs(static_cast<double>(d.data[i]) -
                                     static_cast<double>(gt.data[i]));
        one_minus_target[i] = err <= kConfidenceErrorThreshold ? 0.0 : 1.0;
        ++labeled;
      }
      if (labeled == 0) continue;

      // BCE(z, t) = softplus(-z) + (1 - t) * z, stable for any logit.
      Tensor z = confnet_logits(net, d);
      Tensor omt = Tensor::constant(z.shape(), one_minus_target);
      Tensor per_pixel = add(softplus(scalar_mul(z, -1.0)), mul(omt, z));
      Tensor loss = masked_mean(per_pixel, mask);

      zero_grads(params);
      backward(loss);
      adam_step(adam, params);

      epoch_bce += loss.item() * static_cast<double>(labeled);
      epoch_terms += labeled;
    }
    if (log)
      log->push_back({epoch, epoch_terms ? epoch_bce / epoch_terms : 0.0});
  }
  return net;
}

void save_confnet(const ConfNetWeights& net, const std::string& path) {
  CheckpointHeader header;
  header.kind = CheckpointKind::confnet;
  header.extra = {static_cast<std::uint32_t>(std::lround(net.d_max * 256.0))};
  save_checkpoint(path, header, net.layers);
}

ConfNetWeights load_confnet(const std::string& path) {
  ConfNetWeights net;
  CheckpointHeader header = load_checkpoint(path, &net.layers);
  if (header.kind != CheckpointKind::confnet)
    throw FormatError("'" + path + "' is not a confidence checkpoint");
  if (header.extra.size() != 1)
    throw FormatError("bad confidence checkpoint header in '" + path + "'");
  net.d_max = static_cast<double>(header.extra[0]) / 256.0;
  return net;
}

}  // namespace da
