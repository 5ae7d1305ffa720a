#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "da/common.hpp"

namespace da {

// All invalid disparities are stored as this exact value so equality-based
// round-trip tests stay bitwise.
constexpr float kInvalidDisparity = -1.0f;

// Single-channel intensity grid, row-major, values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
};

// Per-pixel horizontal displacement in pixels. Negative values mark invalid
// entries; every invalid entry is exactly kInvalidDisparity.
struct DisparityMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DisparityMap() = default;
  DisparityMap(int w, int h, float fill = kInvalidDisparity)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool valid_at(int x, int y) const { return at(x, y) >= 0.0f; }
  std::size_t size() const { return data.size(); }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (float v : data) n += (v >= 0.0f) ? 1 : 0;
    return n;
  }
};

// Per-pixel reliability in [0,1].
struct ConfidenceMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  ConfidenceMap() = default;
  ConfidenceMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
};

inline void require_same_shape(int w1, int h1, int w2, int h2,
                               const char* what) {
  if (w1 != w2 || h1 != h2) {
    throw ShapeMismatch(std::string(what) + ": " + std::to_string(w1) + "x" +
                        std::to_string(h1) + " vs " + std::to_string(w2) +
                        "x" + std::to_string(h2));
  }
}

Image central_crop(const Image& img, int crop_w, int crop_h);
DisparityMap central_crop(const DisparityMap& map, int crop_w, int crop_h);

// Mirror helpers used to run a left matcher on the right view.
Image hflip(const Image& img);
DisparityMap hflip(const DisparityMap& map);

void validate_image(const Image& img);            // finite, in [0,1]
void validate_confidence(const ConfidenceMap&c);  // in [0,1]

}  // namespace da
