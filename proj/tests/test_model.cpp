#include <cmath>
#include <filesystem>

#include "da/common.hpp"
#include "da/model.hpp"
#include "doctest.h"

using namespace da;

namespace {

Image random_image(Rng& rng, int w, int h) {
  Image img(w, h);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("outputs are bounded to [0, d_max] with the input shape") {
  Rng rng(3);
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 5);
  Image left = random_image(rng, 32, 16);
  Image right = random_image(rng, 32, 16);
  DisparityMap pred = dispnet_predict(net, left, &right);
  CHECK(pred.width == 32);
  CHECK(pred.height == 16);
  for (float v : pred.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 16.0f);
  }
}

TEST_CASE("zero weights give the uniform midpoint map") {
  TinyDispNet net = dispnet_init(DispNetMode::mono, 12.0, 7);
  for (Tensor& p : net.params()) {
    auto& v = p.value();
    std::fill(v.begin(), v.end(), 0.0);
  }
  Rng rng(5);
  Image left = random_image(rng, 24, 16);
  DisparityMap pred = dispnet_predict(net, left, nullptr);
  for (float v : pred.data) CHECK(v == 6.0f);
}

TEST_CASE("initialization is seed deterministic and seed sensitive") {
  TinyDispNet a = dispnet_init(DispNetMode::stereo, 16.0, 11);
  TinyDispNet b = dispnet_init(DispNetMode::stereo, 16.0, 11);
  TinyDispNet c = dispnet_init(DispNetMode::stereo, 16.0, 12);
  bool all_equal = true;
  bool any_differs = false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    all_equal &= a.layers[l].weight.value() == b.layers[l].weight.value();
    any_differs |= a.layers[l].weight.value() != c.layers[l].weight.value();
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("weight magnitudes follow the fan-in scale") {
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 13);
  std::size_t total = 0, inside = 0;
  for (const ConvLayer& l : net.layers) {
    const double bound = 3.0 * std::sqrt(2.0 / (l.in_c * l.ksize * l.ksize));
    for (Scalar v : l.weight.value()) {
      ++total;
      if (std::fabs(v) < bound) ++inside;
    }
  }
  CHECK(static_cast<double>(inside) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("parameter count stays at desk scale") {
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 17);
  CHECK(net.parameter_count() < 200000);
  CHECK(net.parameter_count() > 10000);
}

TEST_CASE("indivisible inputs are padded and cropped back") {
  Rng rng(19);
  TinyDispNet net = dispnet_init(DispNetMode::mono, 16.0, 19);
  Image left = random_image(rng, 21, 13);
  DisparityMap pred = dispnet_predict(net, left, nullptr);
  CHECK(pred.width == 21);
  CHECK(pred.height == 13);
  for (float v : pred.data) CHECK(std::isfinite(v));
}

TEST_CASE("stereo mode requires the right view") {
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 23);
  Image left(16, 8, 0.5f);
  CHECK_THROWS_AS(dispnet_forward(net, left, nullptr), ArgumentError);
  Image mismatched(15, 8, 0.5f);
  CHECK_THROWS_AS(dispnet_forward(net, left, &mismatched), ShapeMismatch);
}

TEST_CASE("forward is deterministic") {
  Rng rng(29);
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 29);
  Image left = random_image(rng, 32, 16);
  Image right = random_image(rng, 32, 16);
  DisparityMap a = dispnet_predict(net, left, &right);
  DisparityMap b = dispnet_predict(net, left, &right);
  CHECK(a.data == b.data);
}

TEST_CASE("clone decouples parameter storage") {
  TinyDispNet net = dispnet_init(DispNetMode::mono, 16.0, 31);
  TinyDispNet copy = dispnet_clone(net);
  copy.layers[0].weight.value()[0] += 1.0;
  CHECK(net.layers[0].weight.value()[0] !=
        copy.layers[0].weight.value()[0]);
}

TEST_CASE("checkpoint round trip preserves predictions") {
  namespace fs = std::filesystem;
  fs::create_directories("test_tmp");
  Rng rng(37);
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 37);
  const std::string path = "test_tmp/dispnet.ckpt";
  save_dispnet(net, path);
  TinyDispNet back = load_dispnet(path);
  CHECK(back.mode == DispNetMode::stereo);
  CHECK(back.d_max == 16.0);
  Image left = random_image(rng, 24, 16);
  Image right = random_image(rng, 24, 16);
  DisparityMap a = dispnet_predict(net, left, &right);
  DisparityMap b = dispnet_predict(back, left, &right);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
}

TEST_CASE("network gradients pass finite differences on a 16x16 input") {
  Rng rng(41);
  TinyDispNet net = dispnet_init(DispNetMode::stereo, 16.0, 41);
  Image left = random_image(rng, 16, 16);
  Image right = random_image(rng, 16, 16);
  auto build = [&]() {
    Tensor out = dispnet_forward(net, left, &right);
    return mean(mul(out, out));
  };
  std::vector<std::pair<std::string, Tensor>> named;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    named.emplace_back("w" + std::to_string(i), net.layers[i].weight);
    named.emplace_back("b" + std::to_string(i), net.layers[i].bias);
  }
  auto report = grad_check(build, named, 1e-3, 12, 43);
  CHECK(report.max_rel_err < 1e-4);
}
