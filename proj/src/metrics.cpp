#include "da/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace da {

double MetricReport::at(std::string_view name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw ArgumentError("metric '" + std::string(name) + "' not in report");
}

MetricReport stereo_metrics(const DisparityMap& pred, const DisparityMap& gt,
                            const std::vector<std::uint8_t>* mask) {
  require_same_shape(pred.width, pred.height, gt.width, gt.height,
                     "stereo_metrics");
  if (mask && mask->size() != gt.size())
    throw ShapeMismatch("stereo_metrics: mask size mismatch");

  std::size_t n = 0, bad = 0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.data[i] < 0.0f) continue;
    if (mask && !(*mask)[i]) continue;
    ++n;
    const double err = std::fabs(static_cast<double>(pred.data[i]) -
                                 static_cast<double>(gt.data[i]));
    if (err > 3.0) ++bad;
    abs_sum += err;
  }
  if (n == 0) throw NoValidPixels("stereo_metrics: no valid ground truth");

  MetricReport report;
  report.pixel_count = n;
  report.metrics = {
      {"bad3", 100.0 * static_cast<double>(bad) / static_cast<double>(n)},
      {"mae", abs_sum / static_cast<double>(n)},
  };
  return report;
}

MetricReport mono_metrics(const DisparityMap& pred_depth,
                          const DisparityMap& gt_depth, double cap,
                          double min_depth) {
  require_same_shape(pred_depth.width, pred_depth.height, gt_depth.width,
                     gt_depth.height, "mono_metrics");
  if (min_depth <= 0.0 || cap <= min_depth)
    throw ArgumentError("mono_metrics: requires 0 < min_depth < cap");

  std::size_t n = 0;
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (std::size_t i = 0; i < gt_depth.size(); ++i) {
    const float g = gt_depth.data[i];
    if (g < 0.0f) continue;  // invalid
    if (g == 0.0f)
      throw NonPositiveGroundTruth("mono_metrics: zero depth ground truth");
    ++n;
    const double gd = g;
    const double pd =
        std::clamp(static_cast<double>(pred_depth.data[i]), min_depth, cap);
    const double diff = pd - gd;
    abs_rel += std::fabs(diff) / gd;
    sq_rel += diff * diff / gd;
    sq += diff * diff;
    const double dlog = std::log(pd) - std::log(gd);
    sq_log += dlog * dlog;
    const double ratio = std::max(pd / gd, gd / pd);
    if (ratio < t1) ++d1;
    if (ratio < t2) ++d2;
    if (ratio < t3) ++d3;
  }
  if (n == 0) throw NoValidPixels("mono_metrics: no valid ground truth");

  const double inv = 1.0 / static_cast<double>(n);
  MetricReport report;
  report.pixel_count = n;
  report.config = "cap=" + std::to_string(cap) +
                  " min_depth=" + std::to_string(min_depth);
  report.metrics = {
      {"abs_rel", abs_rel * inv},
      {"sq_rel", sq_rel * inv},
      {"rmse", std::sqrt(sq * inv)},
      {"rmse_log", std::sqrt(sq_log * inv)},
      {"delta1", static_cast<double>(d1) * inv},
      {"delta2", static_cast<double>(d2) * inv},
      {"delta3", static_cast<double>(d3) * inv},
  };
  return report;
}

DisparityMap depth_from_disparity(const DisparityMap& disp, double bf) {
  if (bf <= 0.0) throw ArgumentError("depth_from_disparity: bf must be > 0");
  DisparityMap depth(disp.width, disp.height);
  for (std::size_t i = 0; i < disp.size(); ++i) {
    const float d = disp.data[i];
    depth.data[i] = d > 0.0f ? static_cast<float>(bf / d) : kInvalidDisparity;
  }
  return depth;
}

namespace {

bool combines_in_squared_domain(const std::string& name) {
  return name == "rmse" || name == "rmse_log";
}

}  // namespace

void write_metrics_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, MetricReport>>& rows) {
  if (rows.empty()) throw ArgumentError("write_metrics_csv: no rows");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open '" + path + "'");
  auto closer = std::unique_ptr<std::FILE, int (*)(std::FILE*)>(f, std::fclose);

  const auto& names = rows.front().second.metrics;
  std::string header = "name";
  for (const auto& [k, v] : names) header += "," + k;
  header += ",pixels\n";
  std::fputs(header.c_str(), f);

  std::vector<double> agg(names.size(), 0.0);
  std::size_t total = 0;
  for (const auto& [row_name, report] : rows) {
    if (report.metrics.size() != names.size())
      throw ArgumentError("write_metrics_csv: inconsistent metric sets");
    std::fprintf(f, "%s", row_name.c_str());
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double v = report.metrics[i].second;
      std::fprintf(f, ",%.6f", v);
      const double w = static_cast<double>(report.pixel_count);
      agg[i] += combines_in_squared_domain(names[i].first) ? w * v * v : w * v;
    }
    std::fprintf(f, ",%zu\n", report.pixel_count);
    total += report.pixel_count;
  }
  std::fprintf(f, "aggregate");
  for (std::size_t i = 0; i < names.size(); ++i) {
    double v = agg[i] / static_cast<double>(total);
    if (combines_in_squared_domain(names[i].first)) v = std::sqrt(v);
    std::fprintf(f, ",%.6f", v);
  }
  std::fprintf(f, ",%zu\n", total);
}

}  // namespace da
