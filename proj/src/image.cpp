#include "da/image.hpp"

#include <cmath>

namespace da {

namespace {

template <typename T>
T crop_impl(const T& in, int crop_w, int crop_h) {
  if (crop_w <= 0 || crop_h <= 0 || crop_w > in.width || crop_h > in.height) {
    throw ArgumentError("central_crop: crop " + std::to_string(crop_w) + "x" +
                        std::to_string(crop_h) + " does not fit " +
                        std::to_string(in.width) + "x" +
                        std::to_string(in.height));
  }
  const int x0 = (in.width - crop_w) / 2;
  const int y0 = (in.height - crop_h) / 2;
  T out(crop_w, crop_h);
  for (int y = 0; y < crop_h; ++y)
    for (int x = 0; x < crop_w; ++x) out.at(x, y) = in.at(x0 + x, y0 + y);
  return out;
}

template <typename T>
T hflip_impl(const T& in) {
  T out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out.at(x, y) = in.at(in.width - 1 - x, y);
  return out;
}

}  // namespace

Image central_crop(const Image& img, int crop_w, int crop_h) {
  return crop_impl(img, crop_w, crop_h);
}

DisparityMap central_crop(const DisparityMap& map, int crop_w, int crop_h) {
  return crop_impl(map, crop_w, crop_h);
}

Image hflip(const Image& img) { return hflip_impl(img); }

DisparityMap hflip(const DisparityMap& map) { return hflip_impl(map); }

void validate_image(const Image& img) {
  if (img.data.size() != static_cast<std::size_t>(img.width) * img.height)
    throw ShapeMismatch("image: data length does not match dimensions");
  for (float v : img.data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw RangeError("image: intensity outside [0,1]");
  }
}

void validate_confidence(const ConfidenceMap& c) {
  if (c.data.size() != static_cast<std::size_t>(c.width) * c.height)
    throw ShapeMismatch("confidence: data length does not match dimensions");
  for (float v : c.data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw RangeError("confidence: value outside [0,1]");
  }
}

}  // namespace da
