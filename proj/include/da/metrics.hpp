#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "da/image.hpp"

namespace da {

struct MetricReport {
  std::vector<std::pair<std::string, double>> metrics;
  std::size_t pixel_count = 0;
  std::string config;  // echo of crop/caps so reports are self-describing

  double at(std::string_view name) const;
};

// bad3 = percentage of valid-GT pixels with |pred - gt| > 3; MAE over the
// same set. Pixel values are compared as stored, so a sentinel prediction
// at an evaluated pixel counts as a (large) error. The optional mask
// restricts evaluation to nonzero entries.
MetricReport stereo_metrics(const DisparityMap& pred, const DisparityMap& gt,
                            const std::vector<std::uint8_t>* mask = nullptr);

// The seven monocular depth metrics over pixels with valid positive ground
// truth; predictions are clamped to [min_depth, cap] before scoring.
MetricReport mono_metrics(const DisparityMap& pred_depth,
                          const DisparityMap& gt_depth, double cap = 80.0,
                          double min_depth = 0.1);

// depth = bf / disparity; non-positive or invalid disparities map to the
// invalid sentinel.
DisparityMap depth_from_disparity(const DisparityMap& disp, double bf);

// One row per named report plus a pixel-weighted aggregate row.
void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, MetricReport>>&
                           rows);

}  // namespace da
