#include "clap/evalkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace clap::evalkit {

DistanceAnalysis feature_distance_analysis(
    const trainer::FeatureTable& features,
    const std::vector<const corpus::UntrimmedVideo*>& videos, Rng& rng,
    int histogram_bins) {
  if (histogram_bins < 1)
    throw ConfigError("feature analysis: histogram_bins must be >= 1");
  DistanceAnalysis out;
  for (const auto* v : videos) {
    std::vector<int> fg_seconds, bg_seconds;
    for (int t = 0; t < v->duration_s; ++t) {
      bool fg = false;
      for (const corpus::Segment& s : v->segments) {
        if (t >= s.t_start && t < s.t_end && s.is_foreground()) {
          fg = true;
          break;
        }
      }
      (fg ? fg_seconds : bg_seconds).push_back(t);
    }
    if (fg_seconds.size() < 2 || bg_seconds.empty()) {
      ++out.skipped_videos;
      continue;
    }
    auto it = features.by_video.find(v->id);
    if (it == features.by_video.end())
      throw DataError("missing features for video " + v->id);
    const numkit::DenseMatrix& h = it->second;

    std::size_t i1 = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(fg_seconds.size()) - 1));
    std::size_t i2 = static_cast<std::size_t>(rng.uniform_int(
        0, static_cast<std::int64_t>(fg_seconds.size()) - 2));
    if (i2 >= i1) ++i2;  // two distinct foreground clips
    std::size_t ib = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(bg_seconds.size()) - 1));

    auto fg1 = h.row(fg_seconds[i1]);
    auto fg2 = h.row(fg_seconds[i2]);
    auto bg = h.row(bg_seconds[ib]);
    double fg2fg = numkit::l2_distance(fg1, fg2);
    double fg2bg = numkit::l2_distance(fg1, bg);
    out.differences.push_back(fg2bg - fg2fg);
  }

  if (!out.differences.empty()) {
    std::vector<double> sorted = out.differences;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    out.median = n % 2 == 1 ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    double lo = sorted.front();
    double hi = sorted.back();
    if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    }
    double width = (hi - lo) / histogram_bins;
    out.histogram.edges.resize(histogram_bins + 1);
    for (int b = 0; b <= histogram_bins; ++b)
      out.histogram.edges[b] = lo + b * width;
    out.histogram.counts.assign(histogram_bins, 0);
    for (double d : out.differences) {
      int b = static_cast<int>((d - lo) / width);
      b = std::clamp(b, 0, histogram_bins - 1);
      ++out.histogram.counts[b];
    }
  }
  return out;
}

void write_histogram_csv(const Histogram& hist, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open histogram csv for writing: " + path);
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << hist.edges[b] << ',' << hist.edges[b + 1] << ','
        << hist.counts[b] << '\n';
  }
}

}  // namespace clap::evalkit
