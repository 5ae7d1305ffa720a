#pragma once

#include <string>

#include "da/image.hpp"

namespace da {

enum class DisparityFormat {
  kitti_png16,  // 16-bit gray PNG, stored = round(d * 256), 0 = invalid
  pfm,          // Middlebury Pf, 32-bit floats, non-finite = invalid
};

// Reads an 8-bit grayscale PGM (P5) or PNG. Color PNGs are converted by
// channel-average luma. Intensities are scaled by 1/255 into [0,1].
Image read_image(const std::string& path);

// Writes an 8-bit grayscale image; PGM or PNG selected by file extension
// (.pgm / .png). Values are rounded to the nearest of 256 levels.
void write_image(const Image& img, const std::string& path);

DisparityMap read_disparity(const std::string& path, DisparityFormat format);
void write_disparity(const DisparityMap& map, const std::string& path,
                     DisparityFormat format);

// Float grids persisted as PFM; used for confidence maps.
void write_pfm(const std::vector<float>& data, int width, int height,
               const std::string& path);
ConfidenceMap read_confidence(const std::string& path);
void write_confidence(const ConfidenceMap& conf, const std::string& path);

// 0/255 mask written as PGM; nonzero pixels read back as true.
void write_mask(const std::vector<std::uint8_t>& mask, int width, int height,
                const std::string& path);
std::vector<std::uint8_t> read_mask(const std::string& path, int* width,
                                    int* height);

}  // namespace da
