#include <cmath>

#include "da/common.hpp"
#include "da/stereo.hpp"
#include "da/synth.hpp"
#include "doctest.h"

using namespace da;

namespace {

double mean_gradient_magnitude(const Image& img) {
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < img.height - 1; ++y)
    for (int x = 0; x < img.width - 1; ++x) {
      acc += std::fabs(img.at(x + 1, y) - img.at(x, y)) +
             std::fabs(img.at(x, y + 1) - img.at(x, y));
      ++n;
    }
  return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("single noise-free layer is an exact shift") {
  SceneSpec spec = make_scene_spec(Domain::a, 99, 64, 32);
  spec.layers = 1;
  spec.d_min = spec.d_max = 3.0;
  spec.noise_sigma = 0.0;
  Scene scene = generate(spec);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) {
      CHECK(scene.gt.at(x, y) == 3.0f);
      if (x + 3 < 64)
        CHECK(scene.right.at(x, y) == scene.left.at(x + 3, y));
    }
}

TEST_CASE("same seed generates bit-identical scenes") {
  SceneSpec spec = make_scene_spec(Domain::b, 7, 48, 24);
  Scene a = generate(spec);
  Scene b = generate(spec);
  CHECK(a.left.data == b.left.data);
  CHECK(a.right.data == b.right.data);
  CHECK(a.gt.data == b.gt.data);
  CHECK(a.occlusion == b.occlusion);
}

TEST_CASE("ground truth is dense and inside the requested range") {
  SceneSpec spec = make_scene_spec(Domain::a, 21, 64, 32);
  Scene scene = generate(spec);
  for (float d : scene.gt.data) {
    CHECK(d >= static_cast<float>(spec.d_min));
    CHECK(d <= static_cast<float>(spec.d_max));
  }
}

TEST_CASE("re-warping the right view by gt reproduces the left view") {
  SceneSpec spec = make_scene_spec(Domain::a, 5, 96, 48);
  Scene scene = generate(spec);
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 96; ++x) {
      if (scene.occlusion[static_cast<std::size_t>(y) * 96 + x]) continue;
      const double xs = x - scene.gt.at(x, y);
      if (xs < 0.0 || xs > 95.0) continue;
      const int x0 = static_cast<int>(std::floor(xs));
      const int x1 = std::min(x0 + 1, 95);
      const double f = xs - x0;
      const double warped =
          (1.0 - f) * scene.right.at(x0, y) + f * scene.right.at(x1, y);
      acc += std::fabs(warped - scene.left.at(x, y));
      ++n;
    }
  REQUIRE(n > 1000);
  // Photometric noise sigma 0.01 on both views plus interpolation error.
  CHECK(acc / static_cast<double>(n) < 0.05);
}

TEST_CASE("occlusion mask marks covered and out-of-frame pixels") {
  SceneSpec spec = make_scene_spec(Domain::a, 11, 64, 32);
  Scene scene = generate(spec);
  // Left strip with x < d projects out of frame.
  for (int y = 0; y < 32; ++y)
    CHECK(scene.occlusion[static_cast<std::size_t>(y) * 64] == 1);
  // Some interior pixels stay visible.
  std::size_t visible = 0;
  for (auto v : scene.occlusion) visible += v == 0 ? 1 : 0;
  CHECK(visible > scene.left.size() / 2);
}

TEST_CASE("domain B images are markedly smoother than domain A") {
  double grad_a = 0.0, grad_b = 0.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    grad_a += mean_gradient_magnitude(
        generate(make_scene_spec(Domain::a, seed, 96, 48)).left);
    grad_b += mean_gradient_magnitude(
        generate(make_scene_spec(Domain::b, seed, 96, 48)).left);
  }
  CHECK(grad_b < 0.5 * grad_a);
}

TEST_CASE("domain B right view carries the brightness shift") {
  SceneSpec spec = make_scene_spec(Domain::b, 31, 64, 32);
  Scene scene = generate(spec);
  double ml = 0.0, mr = 0.0;
  for (float v : scene.left.data) ml += v;
  for (float v : scene.right.data) mr += v;
  CHECK(mr / scene.right.size() - ml / scene.left.size() > 0.08);
}

TEST_CASE("sgm on a domain A scene reaches calibration quality") {
  SceneSpec spec = make_scene_spec(Domain::a, 2, 128, 64);
  Scene scene = generate(spec);
  StereoParams params;
  params.d_max = 16;
  DisparityMap pred = match_stereo(scene.left, scene.right, StereoAlgo::sgm,
                                   params);
  std::size_t bad = 0, n = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 128; ++x) {
      if (scene.occlusion[static_cast<std::size_t>(y) * 128 + x]) continue;
      ++n;
      if (std::fabs(pred.at(x, y) - scene.gt.at(x, y)) > 3.0f) ++bad;
    }
  CHECK(100.0 * static_cast<double>(bad) / static_cast<double>(n) < 10.0);
}

TEST_CASE("perfect maps survive the left-right check off occlusions") {
  SceneSpec spec = make_scene_spec(Domain::a, 13, 96, 48);
  // Integer planes make the rounded lookup exact off occlusions.
  spec.integer_disparities = true;
  Scene scene = generate(spec);
  DisparityMap checked = left_right_check(scene.gt, scene.gt_right, 0.5f);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 96; ++x) {
      if (scene.occlusion[static_cast<std::size_t>(y) * 96 + x]) continue;
      CHECK(checked.valid_at(x, y));
    }
}
