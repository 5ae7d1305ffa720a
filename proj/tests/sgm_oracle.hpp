#pragma once

// Exhaustive single-path SGM oracle used by the unit and acceptance suites.
// It never runs the streaming recurrence: for every path line it enumerates
// all complete disparity sequences, scores them as
//   sum_i C(p_i, d_i) + sum_i trans(d_i, d_{i+1}),
//   trans(a,b) = 0 if a == b, P1 if |a-b| == 1, P2 otherwise,
// takes prefix minima to obtain the unnormalized Viterbi values, and applies
// the per-step normalization (subtract the previous pixel's minimum) that
// the production recurrence performs incrementally. With integer-valued
// costs and penalties every operation is exact, so outputs must match the
// implementation bit for bit.

#include <limits>
#include <vector>

#include "da/stereo.hpp"

namespace da_test {

inline da::CostVolume sgm_oracle_path(const da::CostVolume& vol,
                                      const da::SgmParams& params, int dir_x,
                                      int dir_y) {
  const int w = vol.width, h = vol.height, dmax = vol.d_max;
  da::CostVolume out(w, h, dmax);

  auto trans = [&](int a, int b) -> float {
    if (a == b) return 0.0f;
    if (a - b == 1 || b - a == 1) return params.p1;
    return params.p2;
  };

  // Collect path lines: start at pixels whose predecessor is out of bounds.
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      const int px = sx - dir_x, py = sy - dir_y;
      if (px >= 0 && px < w && py >= 0 && py < h) continue;  // not a start
      std::vector<std::pair<int, int>> line;
      for (int x = sx, y = sy; x >= 0 && x < w && y >= 0 && y < h;
           x += dir_x, y += dir_y)
        line.emplace_back(x, y);
      const int m = static_cast<int>(line.size());

      // Unnormalized minima over all sequence prefixes.
      std::vector<std::vector<float>> best(
          m, std::vector<float>(dmax, std::numeric_limits<float>::max()));
      std::vector<int> seq(m, 0);
      while (true) {
        float acc = 0.0f;
        for (int i = 0; i < m; ++i) {
          acc += vol.at(line[i].first, line[i].second, seq[i]);
          if (i > 0) acc += trans(seq[i - 1], seq[i]);
          if (acc < best[i][seq[i]]) best[i][seq[i]] = acc;
        }
        // Odometer over the d^m sequences.
        int pos = m - 1;
        while (pos >= 0 && ++seq[pos] == dmax) seq[pos--] = 0;
        if (pos < 0) break;
      }

      for (int i = 0; i < m; ++i) {
        float prev_min = 0.0f;
        if (i > 0) {
          prev_min = best[i - 1][0];
          for (int d = 1; d < dmax; ++d)
            prev_min = std::min(prev_min, best[i - 1][d]);
        }
        for (int d = 0; d < dmax; ++d)
          out.at(line[i].first, line[i].second, d) = best[i][d] - prev_min;
      }
    }
  }
  return out;
}

}  // namespace da_test
