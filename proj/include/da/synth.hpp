#pragma once

#include <cstdint>
#include <vector>

#include "da/image.hpp"

namespace da {

// Two scene styles with a deliberate appearance gap: style A is high-texture
// with moderate disparities, style B is low-texture with a brightness offset
// on the right view and a shifted disparity range.
enum class Domain { a, b };

struct SceneSpec {
  std::uint64_t seed = 1;
  int width = 128;
  int height = 64;
  Domain domain = Domain::a;
  int layers = 5;                  // background + layers-1 planes
  double d_min = 2.0;
  double d_max = 10.0;
  double noise_sigma = 0.01;       // photometric noise, per view
  double texture_wavelength = 4.5; // value-noise base wavelength in pixels
  double texture_contrast = 0.55;
  double brightness_shift = 0.0;   // added to the right view only
  bool integer_disparities = false;
};

SceneSpec make_scene_spec(Domain domain, std::uint64_t seed, int width,
                          int height);

struct Scene {
  Image left;
  Image right;
  DisparityMap gt;        // left-view ground truth, dense
  DisparityMap gt_right;  // right-view ground truth, dense
  // 1 = left pixel has no correspondence in the right view (covered by a
  // nearer layer or projected out of frame).
  std::vector<std::uint8_t> occlusion;
};

// Piecewise fronto-parallel layered scene. The right view is rendered by
// inverse lookup against the layer stack, so occlusions are geometrically
// consistent in both views and ground truth is exact by construction.
Scene generate(const SceneSpec& spec);

}  // namespace da
