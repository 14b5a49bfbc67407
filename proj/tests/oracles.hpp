// Test-only reference implementations, written directly from the stated
// definitions and kept independent of the library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracles {

// Plain softmax probability of candidate `target` among `logits`, summed
// with long doubles and no max-subtraction: an intentionally different
// numerical route from the implementation.
inline double softmax_probability(const std::vector<double>& logits,
                                  std::size_t target) {
  long double denom = 0.0L;
  for (double l : logits) denom += expl(static_cast<long double>(l));
  return static_cast<double>(expl(static_cast<long double>(logits[target])) /
                             denom);
}

struct PairBatch {
  std::vector<std::vector<double>> z_video;
  std::vector<std::vector<double>> z_text;
  std::vector<bool> foreground;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Term-by-term two-direction contrastive loss. fg_only selects the masked
// variant: only foreground pairs contribute log terms, every pair stays in
// the denominators, normalization by the number of contributing pairs.
inline double contrastive_loss(const PairBatch& batch, double tau,
                               bool fg_only) {
  std::size_t n = batch.foreground.size();
  std::size_t n_fg = 0;
  for (bool f : batch.foreground) n_fg += f ? 1 : 0;
  std::size_t denom_pairs = fg_only ? n_fg : n;
  if (denom_pairs == 0) return 0.0;

  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    if (fg_only && !batch.foreground[i]) continue;
    // video anchor over text candidates
    std::vector<double> vt;
    for (std::size_t j = 0; j < n; ++j)
      vt.push_back(dot(batch.z_video[i], batch.z_text[j]) / tau);
    total += -logl(static_cast<long double>(softmax_probability(vt, i)));
    // text anchor over video candidates
    std::vector<double> tv;
    for (std::size_t j = 0; j < n; ++j)
      tv.push_back(dot(batch.z_text[i], batch.z_video[j]) / tau);
    total += -logl(static_cast<long double>(softmax_probability(tv, i)));
  }
  return static_cast<double>(total / denom_pairs);
}

// ---- temporal metrics ----

struct Interval {
  double lo, hi;
};

inline double tiou(Interval a, Interval b) {
  double inter = std::min(a.hi, b.hi) - std::max(a.lo, b.lo);
  if (inter <= 0.0) return 0.0;
  return inter / (std::max(a.hi, b.hi) - std::min(a.lo, b.lo));
}

struct Det {
  std::string video;
  Interval iv;
  int cls;
  double score;
};

struct Gt {
  std::string video;
  Interval iv;
  int cls;
};

// Average precision computed from an explicitly materialized PR curve:
// sort by score (ties: earlier start, then input order), greedy-match each
// detection to the best-tIoU unmatched ground truth of its video and
// class, build the monotone precision envelope, sum rectangle areas.
inline double average_precision(std::vector<Det> dets,
                                const std::vector<Gt>& gts,
                                double threshold) {
  if (gts.empty()) return 0.0;
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (dets[a].score != dets[b].score)
                       return dets[a].score > dets[b].score;
                     return dets[a].iv.lo < dets[b].iv.lo;
                   });
  std::vector<bool> used(gts.size(), false);
  std::vector<int> tp_flags;
  for (std::size_t idx : order) {
    double best = 0.0;
    std::size_t pick = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].video != dets[idx].video ||
          gts[g].cls != dets[idx].cls)
        continue;
      double iou = tiou(dets[idx].iv, gts[g].iv);
      if (iou > best) {
        best = iou;
        pick = g;
      }
    }
    if (pick < gts.size() && best >= threshold) {
      used[pick] = true;
      tp_flags.push_back(1);
    } else {
      tp_flags.push_back(0);
    }
  }
  std::size_t n = tp_flags.size();
  if (n == 0) return 0.0;
  std::vector<double> prec(n), rec(n);
  int tp = 0;
  for (std::size_t r = 0; r < n; ++r) {
    tp += tp_flags[r];
    prec[r] = double(tp) / double(r + 1);
    rec[r] = double(tp) / double(gts.size());
  }
  for (std::size_t r = n - 1; r-- > 0;) prec[r] = std::max(prec[r], prec[r + 1]);
  double ap = 0.0, prev = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (rec[r] > prev) {
      ap += (rec[r] - prev) * prec[r];
      prev = rec[r];
    }
  }
  return ap;
}

inline double mean_ap(const std::vector<Det>& dets, const std::vector<Gt>& gts,
                      double threshold) {
  std::set<int> classes;
  for (const Gt& g : gts) classes.insert(g.cls);
  if (classes.empty()) return 0.0;
  double sum = 0.0;
  for (int c : classes) {
    std::vector<Det> dc;
    std::vector<Gt> gc;
    for (const Det& d : dets)
      if (d.cls == c) dc.push_back(d);
    for (const Gt& g : gts)
      if (g.cls == c) gc.push_back(g);
    sum += average_precision(dc, gc, threshold);
  }
  return sum / double(classes.size());
}

// Greedy suppression replayed verbatim from the rule statement.
inline std::vector<std::size_t> nms_survivors(const std::vector<Det>& dets,
                                              double threshold) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (dets[a].score != dets[b].score)
                       return dets[a].score > dets[b].score;
                     return dets[a].iv.lo < dets[b].iv.lo;
                   });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool ok = true;
    for (std::size_t k : kept)
      if (tiou(dets[idx].iv, dets[k].iv) > threshold) ok = false;
    if (ok) kept.push_back(idx);
  }
  return kept;
}

}  // namespace oracles
