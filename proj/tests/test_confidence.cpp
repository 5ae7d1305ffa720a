#include <cmath>
#include <filesystem>

#include "da/common.hpp"
#include "da/confidence.hpp"
#include "doctest.h"

using namespace da;

namespace {

DisparityMap constant_map(int w, int h, float v) {
  return DisparityMap(w, h, v);
}

}  // namespace

TEST_CASE("lrc confidence ramp") {
  // d_left = 5 everywhere; right map manipulated to hit exact discrepancies.
  DisparityMap dl = constant_map(12, 2, 5.0f);
  DisparityMap dr = constant_map(12, 2, 5.0f);
  ConfidenceMap perfect = lrc_confidence(dl, dr);
  CHECK(perfect.at(7, 0) == 1.0f);

  DisparityMap dr3 = constant_map(12, 2, 8.0f);
  ConfidenceMap at_edge = lrc_confidence(dl, dr3);
  CHECK(at_edge.at(7, 0) == 0.0f);

  DisparityMap dr15 = constant_map(12, 2, 6.5f);
  ConfidenceMap half = lrc_confidence(dl, dr15);
  CHECK(half.at(7, 0) == 0.5f);

  // Out-of-frame lookups and sentinels score zero.
  CHECK(perfect.at(2, 0) == 0.0f);
  DisparityMap with_sentinel = dl;
  with_sentinel.at(7, 0) = kInvalidDisparity;
  ConfidenceMap s = lrc_confidence(with_sentinel, dr);
  CHECK(s.at(7, 0) == 0.0f);

  DisparityMap wrong(11, 2, 1.0f);
  CHECK_THROWS_AS(lrc_confidence(dl, wrong), ShapeMismatch);
}

TEST_CASE("lrc outputs stay in [0,1] on arbitrary maps") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    DisparityMap dl(9, 6), dr(9, 6);
    for (auto& v : dl.data)
      v = rng.uniform() < 0.3 ? kInvalidDisparity
                              : static_cast<float>(rng.uniform(0.0, 12.0));
    for (auto& v : dr.data)
      v = rng.uniform() < 0.3 ? kInvalidDisparity
                              : static_cast<float>(rng.uniform(0.0, 12.0));
    ConfidenceMap c = lrc_confidence(dl, dr);
    CHECK_NOTHROW(validate_confidence(c));
  }
  // All-sentinel input.
  DisparityMap empty(5, 4);
  ConfidenceMap c = lrc_confidence(empty, empty);
  for (float v : c.data) CHECK(v == 0.0f);
}

TEST_CASE("confnet with zero weights outputs exactly 0.5") {
  ConfNetWeights net = confnet_init(16.0, 1);
  for (Tensor& p : net.params()) {
    auto& v = p.value();
    std::fill(v.begin(), v.end(), 0.0);
  }
  DisparityMap d = constant_map(10, 6, 4.0f);
  ConfidenceMap conf = confnet_forward(net, d);
  for (float v : conf.data) CHECK(v == 0.5f);
}

TEST_CASE("confnet outputs stay strictly inside (0,1)") {
  ConfNetWeights net = confnet_init(16.0, 7);
  Rng rng(9);
  DisparityMap d(12, 8);
  for (auto& v : d.data)
    v = rng.uniform() < 0.2 ? kInvalidDisparity
                            : static_cast<float>(rng.uniform(0.0, 16.0));
  ConfidenceMap conf = confnet_forward(net, d);
  for (float v : conf.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("confnet is shift equivariant away from borders") {
  ConfNetWeights net = confnet_init(16.0, 11);
  const int w = 24, h = 16, shift = 3;
  DisparityMap a(w, h, 8.0f), b(w, h, 8.0f);
  Rng rng(13);
  // A small pattern stamped at two horizontal offsets.
  for (int y = 6; y < 10; ++y)
    for (int x = 6; x < 10; ++x) {
      const float v = static_cast<float>(rng.uniform(0.0, 16.0));
      a.at(x, y) = v;
      b.at(x + shift, y) = v;
    }
  ConfidenceMap ca = confnet_forward(net, a);
  ConfidenceMap cb = confnet_forward(net, b);
  // Compare on the stamped region only; 4 conv layers = 4 px context.
  for (int y = 6; y < 10; ++y)
    for (int x = 6; x < 10; ++x)
      CHECK(ca.at(x, y) == doctest::Approx(cb.at(x + shift, y)).epsilon(1e-9));
}

TEST_CASE("confnet training drives confidence toward the labels") {
  Rng rng(17);
  std::vector<std::pair<DisparityMap, DisparityMap>> agree, disagree;
  for (int i = 0; i < 4; ++i) {
    DisparityMap gt(24, 16);
    for (auto& v : gt.data) v = static_cast<float>(rng.uniform(1.0, 14.0));
    DisparityMap off = gt;
    for (auto& v : off.data) v += 10.0f;
    agree.emplace_back(gt, gt);
    disagree.emplace_back(off, gt);
  }

  ConfTrainConfig config;
  config.epochs = 14;
  config.seed = 5;
  std::vector<ConfEpochStat> log;
  ConfNetWeights pos = confnet_train(agree, config, &log);
  double mean_pos = 0.0;
  for (const auto& [d, gt] : agree) {
    ConfidenceMap c = confnet_forward(pos, d);
    for (float v : c.data) mean_pos += v;
  }
  mean_pos /= static_cast<double>(agree.size() * agree[0].first.size());
  CHECK(mean_pos >= 0.9);
  REQUIRE(log.size() == 14);
  CHECK(log.back().bce <= log.front().bce);

  ConfNetWeights neg = confnet_train(disagree, config);
  double mean_neg = 0.0;
  for (const auto& [d, gt] : disagree) {
    ConfidenceMap c = confnet_forward(neg, d);
    for (float v : c.data) mean_neg += v;
  }
  mean_neg /= static_cast<double>(disagree.size() * disagree[0].first.size());
  CHECK(mean_neg <= 0.1);
}

TEST_CASE("confnet training is seed deterministic") {
  Rng rng(19);
  std::vector<std::pair<DisparityMap, DisparityMap>> data;
  for (int i = 0; i < 3; ++i) {
    DisparityMap gt(16, 12);
    for (auto& v : gt.data) v = static_cast<float>(rng.uniform(1.0, 12.0));
    DisparityMap d = gt;
    for (auto& v : d.data)
      if (rng.uniform() < 0.3) v += 8.0f;
    data.emplace_back(d, gt);
  }
  ConfTrainConfig config;
  config.epochs = 3;
  config.seed = 23;
  ConfNetWeights a = confnet_train(data, config);
  ConfNetWeights b = confnet_train(data, config);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weight.value() == b.layers[l].weight.value());
    CHECK(a.layers[l].bias.value() == b.layers[l].bias.value());
  }
}

TEST_CASE("confnet rejects an empty dataset") {
  CHECK_THROWS_AS(confnet_train({}, ConfTrainConfig{}), EmptyDataset);
}

TEST_CASE("confnet checkpoint round trip") {
  namespace fs = std::filesystem;
  fs::create_directories("test_tmp");
  ConfNetWeights net = confnet_init(24.0, 29);
  const std::string path = "test_tmp/confnet.ckpt";
  save_confnet(net, path);
  ConfNetWeights back = load_confnet(path);
  CHECK(back.d_max == net.d_max);
  REQUIRE(back.layers.size() == net.layers.size());
  DisparityMap d(16, 8, 6.0f);
  ConfidenceMap c1 = confnet_forward(net, d);
  ConfidenceMap c2 = confnet_forward(back, d);
  // float32 serialization quantizes the weights; outputs stay close.
  for (std::size_t i = 0; i < c1.size(); ++i)
    CHECK(c1.data[i] == doctest::Approx(c2.data[i]).epsilon(1e-5));
}
