#pragma once

#include <cstdint>
#include <vector>

#include "da/image.hpp"

namespace da {

// Per-pixel binary signature of window comparisons (bit = 1 iff neighbor
// intensity < center, raster order, first neighbor in the highest bit).
// Windows up to 7x7 fit the 64-bit code.
struct CensusMap {
  int width = 0;
  int height = 0;
  int window = 0;
  std::vector<std::uint64_t> codes;
  std::vector<std::uint8_t> valid;  // 0 where the window exits the image

  std::uint64_t code_at(int x, int y) const {
    return codes[static_cast<std::size_t>(y) * width + x];
  }
  bool valid_at(int x, int y) const {
    return valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

// H x W x d_max matching-cost grid. Valid costs are finite and >= 0;
// kInvalidCost marks out-of-frame matches.
struct CostVolume {
  static constexpr float kInvalidCost = -1.0f;

  int width = 0;
  int height = 0;
  int d_max = 0;
  std::vector<float> costs;  // index = (y * width + x) * d_max + d

  CostVolume() = default;
  CostVolume(int w, int h, int d)
      : width(w),
        height(h),
        d_max(d),
        costs(static_cast<std::size_t>(w) * h * d, kInvalidCost) {}

  float at(int x, int y, int d) const {
    return costs[(static_cast<std::size_t>(y) * width + x) * d_max + d];
  }
  float& at(int x, int y, int d) {
    return costs[(static_cast<std::size_t>(y) * width + x) * d_max + d];
  }
};

enum class CostMetric { census_hamming, absolute_difference };

struct SgmParams {
  float p1 = 7.0f;   // small-jump penalty
  float p2 = 86.0f;  // large-jump penalty
  int paths = 8;     // 4 or 8
};

enum class StereoAlgo { ad, sgm };

struct StereoParams {
  int d_max = 64;
  int census_window = 5;
  SgmParams sgm;
};

CensusMap census_transform(const Image& img, int window);

// cost(x,y,d) compares left(x,y) with right(x-d,y); x-d < 0 gives the
// invalid sentinel. census_hamming also invalidates border pixels whose
// census code is undefined.
CostVolume build_cost_volume(const Image& left, const Image& right, int d_max,
                             CostMetric metric, int census_window = 5);

// Semi-global aggregation: per path r,
//   L_r(p,d) = C(p,d) + min(L_r(p-r,d), L_r(p-r,d+-1)+P1,
//                           min_k L_r(p-r,k)+P2) - min_k L_r(p-r,k)
// summed over 4 or 8 paths in a fixed order. Invalid input entries are
// replaced by (max valid cost + P2 + 1) so the DP stays finite.
CostVolume sgm_aggregate(const CostVolume& vol, const SgmParams& params);

// Single-direction aggregation on an already-sanitized volume (no invalid
// entries); exposed for oracle tests.
CostVolume sgm_aggregate_path(const CostVolume& vol, const SgmParams& params,
                              int dir_x, int dir_y);

// Replacement applied by sgm_aggregate before the DP.
float sgm_invalid_replacement(const CostVolume& vol, const SgmParams& params);

// Per pixel argmin over valid d; ties break toward smaller d; pixels with no
// valid d map to the sentinel.
DisparityMap winner_take_all(const CostVolume& vol);

// Keeps d_left(x,y) iff |d_left(x,y) - d_right(x - round(d_left), y)| <= tol.
DisparityMap left_right_check(const DisparityMap& d_left,
                              const DisparityMap& d_right, float tol);

// AD = census-hamming cost + WTA; SGM adds the aggregation step.
DisparityMap match_stereo(const Image& left, const Image& right,
                          StereoAlgo algo, const StereoParams& params);

// Disparity map of the right view (positive disparities toward the left
// image), computed by mirroring the pair.
DisparityMap match_stereo_right(const Image& left, const Image& right,
                                StereoAlgo algo, const StereoParams& params);

}  // namespace da
