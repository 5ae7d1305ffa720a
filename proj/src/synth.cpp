#include "da/synth.hpp"

#include <algorithm>
#include <cmath>

namespace da {

namespace {

// Lattice hash in [0,1), stable across platforms.
double lattice_hash(std::uint64_t seed, std::int64_t xi, std::int64_t yi) {
  std::uint64_t z = seed;
  z ^= 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(xi) +
       (static_cast<std::uint64_t>(yi) << 32);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Band-limited value noise in [0,1]: smooth interpolation of lattice values.
double value_noise(double x, double y, std::uint64_t seed, double wavelength) {
  const double gx = x / wavelength;
  const double gy = y / wavelength;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const auto xi = static_cast<std::int64_t>(fx);
  const auto yi = static_cast<std::int64_t>(fy);
  const double tx = smoothstep(gx - fx);
  const double ty = smoothstep(gy - fy);
  const double v00 = lattice_hash(seed, xi, yi);
  const double v10 = lattice_hash(seed, xi + 1, yi);
  const double v01 = lattice_hash(seed, xi, yi + 1);
  const double v11 = lattice_hash(seed, xi + 1, yi + 1);
  const double a = v00 + (v10 - v00) * tx;
  const double b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;
}

struct Layer {
  double disparity = 0.0;
  double base = 0.5;        // mean brightness
  std::uint64_t tex_seed = 0;
  // Left-view footprint; the background layer covers everything.
  bool background = false;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool covers(double x, double y) const {
    return background || (x >= x0 && x <= x1 && y >= y0 && y <= y1);
  }
};

struct LayerStack {
  std::vector<Layer> layers;  // sorted by disparity ascending (far to near)
  double wavelength = 4.5;
  double contrast = 0.55;

  // Texture evaluated in left-view coordinates; two octaves.
  double shade(const Layer& l, double x, double y) const {
    const double n1 = value_noise(x, y, l.tex_seed, wavelength);
    const double n2 = value_noise(x, y, l.tex_seed ^ 0xabcdef1234567ULL,
                                  wavelength / 2.7);
    return l.base + contrast * (0.65 * n1 + 0.35 * n2 - 0.5);
  }

  // Nearest layer visible at a left-view position.
  const Layer& at_left(double x, double y) const {
    const Layer* best = &layers.front();
    for (const Layer& l : layers)
      if (l.covers(x, y)) best = &l;  // ascending disparity, nearest wins
    return *best;
  }

  // Nearest layer visible at a right-view position: candidate layers are
  // those whose left footprint contains (xr + d, y).
  const Layer& at_right(double xr, double y) const {
    const Layer* best = &layers.front();
    for (const Layer& l : layers)
      if (l.covers(xr + l.disparity, y)) best = &l;
    return *best;
  }
};

}  // namespace

SceneSpec make_scene_spec(Domain domain, std::uint64_t seed, int width,
                          int height) {
  SceneSpec spec;
  spec.seed = seed;
  spec.width = width;
  spec.height = height;
  spec.domain = domain;
  if (domain == Domain::a) {
    spec.layers = 5;
    spec.d_min = 2.0;
    spec.d_max = 10.0;
    spec.texture_wavelength = 4.5;
    spec.texture_contrast = 0.55;
    spec.brightness_shift = 0.0;
  } else {
    spec.layers = 4;
    spec.d_min = 5.0;
    spec.d_max = 14.0;
    spec.texture_wavelength = 22.0;
    spec.texture_contrast = 0.12;
    spec.brightness_shift = 0.15;
  }
  spec.noise_sigma = 0.01;
  return spec;
}

Scene generate(const SceneSpec& spec) {
  if (spec.layers < 1) throw ArgumentError("generate: layers must be >= 1");
  if (spec.width < 4 || spec.height < 4)
    throw ArgumentError("generate: scene too small");
  if (spec.d_min < 0.0 || spec.d_min > spec.d_max)
    throw ArgumentError("generate: bad disparity range");

  Rng rng(spec.seed);
  Rng layout_rng = rng.fork(1);
  Rng noise_rng = rng.fork(2);

  LayerStack stack;
  stack.wavelength = spec.texture_wavelength;
  stack.contrast = spec.texture_contrast;

  std::vector<double> disparities(spec.layers);
  for (auto& d : disparities) d = layout_rng.uniform(spec.d_min, spec.d_max);
  std::sort(disparities.begin(), disparities.end());
  disparities.front() = spec.d_min;  // background pinned to the far plane
  if (spec.integer_disparities)
    for (auto& d : disparities)
      d = std::clamp(std::round(d), spec.d_min, spec.d_max);

  for (int i = 0; i < spec.layers; ++i) {
    Layer l;
    l.disparity = disparities[i];
    l.base = layout_rng.uniform(0.3, 0.7);
    l.tex_seed = spec.seed * 0x100 + static_cast<std::uint64_t>(i) * 7919 + 13;
    l.background = (i == 0);
    if (!l.background) {
      const double w = layout_rng.uniform(0.2, 0.55) * spec.width;
      const double h = layout_rng.uniform(0.25, 0.6) * spec.height;
      const double cx = layout_rng.uniform(0.15, 0.85) * spec.width;
      const double cy = layout_rng.uniform(0.15, 0.85) * spec.height;
      l.x0 = cx - w / 2.0;
      l.x1 = cx + w / 2.0;
      l.y0 = cy - h / 2.0;
      l.y1 = cy + h / 2.0;
    }
    stack.layers.push_back(l);
  }

  Scene scene;
  scene.left = Image(spec.width, spec.height);
  scene.right = Image(spec.width, spec.height);
  scene.gt = DisparityMap(spec.width, spec.height);
  scene.gt_right = DisparityMap(spec.width, spec.height);
  scene.occlusion.assign(scene.left.size(), 0);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Layer& l = stack.at_left(x, y);
      scene.left.at(x, y) = static_cast<float>(stack.shade(l, x, y));
      scene.gt.at(x, y) = static_cast<float>(l.disparity);

      const double xr = x - l.disparity;
      const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
      if (xr < 0.0) {
        scene.occlusion[i] = 1;  // projects out of the right frame
      } else {
        const Layer& vis = stack.at_right(xr, y);
        if (&vis != &l) scene.occlusion[i] = 1;  // covered by a nearer layer
      }
    }
  }

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Layer& l = stack.at_right(x, y);
      scene.right.at(x, y) =
          static_cast<float>(stack.shade(l, x + l.disparity, y) +
                             spec.brightness_shift);
      scene.gt_right.at(x, y) = static_cast<float>(l.disparity);
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (auto& v : scene.left.data)
      v += static_cast<float>(spec.noise_sigma * noise_rng.normal());
    for (auto& v : scene.right.data)
      v += static_cast<float>(spec.noise_sigma * noise_rng.normal());
  }
  for (auto& v : scene.left.data) v = std::clamp(v, 0.0f, 1.0f);
  for (auto& v : scene.right.data) v = std::clamp(v, 0.0f, 1.0f);
  return scene;
}

}  // namespace da
