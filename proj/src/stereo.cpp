#include "da/stereo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace da {

CensusMap census_transform(const Image& img, int window) {
  if (window < 3 || window % 2 == 0)
    throw ArgumentError("census_transform: window must be odd and >= 3");
  if (window > 7)
    throw ArgumentError("census_transform: window > 7 exceeds the 64-bit code");
  if (window > std::min(img.width, img.height))
    throw ArgumentError("census_transform: window larger than image");

  CensusMap census;
  census.width = img.width;
  census.height = img.height;
  census.window = window;
  census.codes.assign(img.size(), 0);
  census.valid.assign(img.size(), 0);

  const int r = window / 2;
  for (int y = r; y < img.height - r; ++y) {
    for (int x = r; x < img.width - r; ++x) {
      const float center = img.at(x, y);
      std::uint64_t code = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          code = (code << 1) | (img.at(x + dx, y + dy) < center ? 1u : 0u);
        }
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      census.codes[i] = code;
      census.valid[i] = 1;
    }
  }
  return census;
}

CostVolume build_cost_volume(const Image& left, const Image& right, int d_max,
                             CostMetric metric, int census_window) {
  require_same_shape(left.width, left.height, right.width, right.height,
                     "build_cost_volume");
  if (d_max < 1) throw ArgumentError("build_cost_volume: d_max must be >= 1");

  CostVolume vol(left.width, left.height, d_max);

  if (metric == CostMetric::absolute_difference) {
    for (int y = 0; y < left.height; ++y)
      for (int x = 0; x < left.width; ++x)
        for (int d = 0; d < d_max; ++d) {
          if (x - d < 0) break;  // larger d only moves further out of frame
          vol.at(x, y, d) = std::fabs(left.at(x, y) - right.at(x - d, y));
        }
    return vol;
  }

  const CensusMap cl = census_transform(left, census_window);
  const CensusMap cr = census_transform(right, census_window);
  for (int y = 0; y < left.height; ++y)
    for (int x = 0; x < left.width; ++x) {
      if (!cl.valid_at(x, y)) continue;
      const std::uint64_t code_l = cl.code_at(x, y);
      for (int d = 0; d < d_max; ++d) {
        if (x - d < 0) break;
        if (!cr.valid_at(x - d, y)) continue;
        vol.at(x, y, d) = static_cast<float>(
            std::popcount(code_l ^ cr.code_at(x - d, y)));
      }
    }
  return vol;
}

float sgm_invalid_replacement(const CostVolume& vol, const SgmParams& params) {
  float max_valid = 0.0f;
  for (float c : vol.costs)
    if (c >= 0.0f) max_valid = std::max(max_valid, c);
  return max_valid + params.p2 + 1.0f;
}

namespace {

void validate_sgm_params(const SgmParams& params) {
  if (params.p1 < 0.0f || params.p1 > params.p2)
    throw ArgumentError("sgm: requires 0 <= p1 <= p2");
  if (params.paths != 4 && params.paths != 8)
    throw ArgumentError("sgm: paths must be 4 or 8");
}

}  // namespace

CostVolume sgm_aggregate_path(const CostVolume& vol, const SgmParams& params,
                              int dir_x, int dir_y) {
  validate_sgm_params(params);
  if ((dir_x == 0 && dir_y == 0) || dir_x < -1 || dir_x > 1 || dir_y < -1 ||
      dir_y > 1)
    throw ArgumentError("sgm: direction components must be in {-1,0,1}");

  const int w = vol.width, h = vol.height, dmax = vol.d_max;
  CostVolume out(w, h, dmax);

  // Traverse so p - dir is always visited before p.
  const int y_begin = dir_y > 0 ? 0 : h - 1;
  const int y_end = dir_y > 0 ? h : -1;
  const int y_step = dir_y > 0 ? 1 : -1;
  const int x_begin = dir_x > 0 ? 0 : w - 1;
  const int x_end = dir_x > 0 ? w : -1;
  const int x_step = dir_x > 0 ? 1 : -1;

  std::vector<float> min_along(static_cast<std::size_t>(w) * h, 0.0f);

  for (int y = y_begin; y != y_end; y += y_step) {
    for (int x = x_begin; x != x_end; x += x_step) {
      const int px = x - dir_x;
      const int py = y - dir_y;
      const bool has_prev = px >= 0 && px < w && py >= 0 && py < h;
      float cur_min = std::numeric_limits<float>::max();
      if (!has_prev) {
        for (int d = 0; d < dmax; ++d) {
          const float v = vol.at(x, y, d);
          out.at(x, y, d) = v;
          cur_min = std::min(cur_min, v);
        }
      } else {
        const float prev_min =
            min_along[static_cast<std::size_t>(py) * w + px];
        const float jump = prev_min + params.p2;
        for (int d = 0; d < dmax; ++d) {
          float best = out.at(px, py, d);
          if (d > 0) best = std::min(best, out.at(px, py, d - 1) + params.p1);
          if (d + 1 < dmax)
            best = std::min(best, out.at(px, py, d + 1) + params.p1);
          best = std::min(best, jump);
          const float v = vol.at(x, y, d) + best - prev_min;
          out.at(x, y, d) = v;
          cur_min = std::min(cur_min, v);
        }
      }
      min_along[static_cast<std::size_t>(y) * w + x] = cur_min;
    }
  }
  return out;
}

CostVolume sgm_aggregate(const CostVolume& vol, const SgmParams& params) {
  validate_sgm_params(params);

  CostVolume sane = vol;
  const float replacement = sgm_invalid_replacement(vol, params);
  for (float& c : sane.costs)
    if (c < 0.0f) c = replacement;

  static constexpr int kDirs8[8][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                       {1, 1},  {-1, -1}, {1, -1}, {-1, 1}};
  CostVolume total(vol.width, vol.height, vol.d_max);
  std::fill(total.costs.begin(), total.costs.end(), 0.0f);
  for (int p = 0; p < params.paths; ++p) {
    const CostVolume path =
        sgm_aggregate_path(sane, params, kDirs8[p][0], kDirs8[p][1]);
    for (std::size_t i = 0; i < total.costs.size(); ++i)
      total.costs[i] += path.costs[i];
  }
  return total;
}

DisparityMap winner_take_all(const CostVolume& vol) {
  DisparityMap map(vol.width, vol.height);
  for (int y = 0; y < vol.height; ++y)
    for (int x = 0; x < vol.width; ++x) {
      int best_d = -1;
      float best = 0.0f;
      for (int d = 0; d < vol.d_max; ++d) {
        const float c = vol.at(x, y, d);
        if (c < 0.0f) continue;
        if (best_d < 0 || c < best) {
          best_d = d;
          best = c;
        }
      }
      map.at(x, y) =
          best_d < 0 ? kInvalidDisparity : static_cast<float>(best_d);
    }
  return map;
}

DisparityMap left_right_check(const DisparityMap& d_left,
                              const DisparityMap& d_right, float tol) {
  require_same_shape(d_left.width, d_left.height, d_right.width,
                     d_right.height, "left_right_check");
  DisparityMap out(d_left.width, d_left.height);
  for (int y = 0; y < d_left.height; ++y)
    for (int x = 0; x < d_left.width; ++x) {
      const float dl = d_left.at(x, y);
      if (dl < 0.0f) continue;
      const int xr = x - static_cast<int>(std::lround(dl));
      if (xr < 0 || xr >= d_right.width) continue;
      const float dr = d_right.at(xr, y);
      if (dr < 0.0f) continue;
      if (std::fabs(dl - dr) <= tol) out.at(x, y) = dl;
    }
  return out;
}

DisparityMap match_stereo(const Image& left, const Image& right,
                          StereoAlgo algo, const StereoParams& params) {
  CostVolume vol = build_cost_volume(left, right, params.d_max,
                                     CostMetric::census_hamming,
                                     params.census_window);
  if (algo == StereoAlgo::sgm) vol = sgm_aggregate(vol, params.sgm);
  return winner_take_all(vol);
}

DisparityMap match_stereo_right(const Image& left, const Image& right,
                                StereoAlgo algo, const StereoParams& params) {
  const DisparityMap mirrored =
      match_stereo(hflip(right), hflip(left), algo, params);
  return hflip(mirrored);
}

}  // namespace da
