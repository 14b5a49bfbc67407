#include "clap/losses/losses.hpp"

#include <algorithm>
#include <cmath>

namespace clap::losses {

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::kTac: return "tac";
    case Objective::kClapClip: return "clap-clip";
    case Objective::kClapMask: return "clap-mask";
    case Objective::kClap: return "clap";
    case Objective::kClapNoCls: return "clap-no-cls";
  }
  return "?";
}

std::size_t ContrastiveBatch::foreground_count() const {
  std::size_t n = 0;
  for (char f : foreground) n += f != 0;
  return n;
}

void ContrastiveBatch::validate() const {
  std::size_t n = foreground.size();
  if (n == 0) throw UsageError("contrastive batch: empty");
  if (z_video.rows() != n || z_text.rows() != n)
    throw UsageError("contrastive batch: row count mismatch");
  if (z_video.cols() != z_text.cols())
    throw UsageError("contrastive batch: embedding width mismatch");
  if (!texts.empty() && texts.size() != n)
    throw UsageError("contrastive batch: texts length mismatch");
}

double nce(std::span<const double> anchor, std::span<const double> positive,
           const std::vector<std::vector<double>>& negatives, double tau) {
  if (!(tau > 0.0)) throw UsageError("nce: temperature must be positive");
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(numkit::dot(anchor, positive) / tau);
  for (const auto& z : negatives)
    logits.push_back(numkit::dot(anchor, z) / tau);
  double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - m);
  return std::exp(logits.front() - m) / denom;
}

namespace {

// Sum in ascending order so totals are bitwise invariant to how the batch
// was ordered.
double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

// Shared core of the clip and masked losses. weight[i] multiplies both of
// pair i's log terms; in-batch candidates are masked per dedupe rule.
ContrastiveResult weighted_contrastive(const ContrastiveBatch& batch,
                                       double tau,
                                       const std::vector<double>& weight,
                                       bool dedupe_negatives) {
  batch.validate();
  if (!(tau > 0.0))
    throw UsageError("contrastive loss: temperature must be positive");
  std::size_t n = batch.size();
  std::size_t d = batch.z_video.cols();

  // s(i, j) = z_v_i . z_t_j / tau
  numkit::DenseMatrix s = numkit::matmul_bt(batch.z_video, batch.z_text);
  numkit::scale_inplace(s, 1.0 / tau);

  auto excluded = [&](std::size_t i, std::size_t j) {
    return dedupe_negatives && i != j && !batch.texts.empty() &&
           batch.texts[i] == batch.texts[j];
  };

  ContrastiveResult res;
  res.d_z_video = numkit::DenseMatrix(n, d, 0.0);
  res.d_z_text = numkit::DenseMatrix(n, d, 0.0);
  std::vector<double> contributions;
  std::vector<double> exps;

  // One softmax direction; logit_at(j) reads either row i (video anchor)
  // or column i (text anchor) of s.
  auto direction = [&](bool video_anchor) {
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[i] == 0.0) continue;
      auto logit_at = [&](std::size_t j) {
        return video_anchor ? s(i, j) : s(j, i);
      };
      double m = logit_at(i);
      for (std::size_t j = 0; j < n; ++j)
        if (!excluded(i, j)) m = std::max(m, logit_at(j));
      exps.clear();
      for (std::size_t j = 0; j < n; ++j)
        if (!excluded(i, j)) exps.push_back(std::exp(logit_at(j) - m));
      double denom = sorted_sum(exps);
      double log_p = (logit_at(i) - m) - std::log(denom);
      contributions.push_back(-weight[i] * log_p);
      for (std::size_t j = 0; j < n; ++j) {
        if (excluded(i, j)) continue;
        double p = std::exp(logit_at(j) - m) / denom;
        double g = weight[i] * (p - (i == j ? 1.0 : 0.0)) / tau;
        if (video_anchor) {
          for (std::size_t k = 0; k < d; ++k) {
            res.d_z_video(i, k) += g * batch.z_text(j, k);
            res.d_z_text(j, k) += g * batch.z_video(i, k);
          }
        } else {
          for (std::size_t k = 0; k < d; ++k) {
            res.d_z_text(i, k) += g * batch.z_video(j, k);
            res.d_z_video(j, k) += g * batch.z_text(i, k);
          }
        }
      }
    }
  };
  direction(true);   // video -> text
  direction(false);  // text -> video
  res.value = sorted_sum(contributions);
  return res;
}

}  // namespace

ContrastiveResult clip_loss(const ContrastiveBatch& batch, double tau,
                            bool dedupe_negatives) {
  batch.validate();
  std::vector<double> w(batch.size(),
                        1.0 / static_cast<double>(batch.size()));
  return weighted_contrastive(batch, tau, w, dedupe_negatives);
}

ContrastiveResult masked_loss(const ContrastiveBatch& batch, double tau,
                              bool dedupe_negatives) {
  batch.validate();
  std::size_t n_fg = batch.foreground_count();
  std::vector<double> w(batch.size(), 0.0);
  if (n_fg > 0) {
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (batch.foreground[i]) w[i] = 1.0 / static_cast<double>(n_fg);
  }
  return weighted_contrastive(batch, tau, w, dedupe_negatives);
}

double cross_entropy(std::span<const double> logits, int target,
                     std::span<double> grad_out) {
  if (target < 0 || target >= static_cast<int>(logits.size()))
    throw UsageError("cross_entropy: target out of range");
  if (grad_out.size() != logits.size())
    throw UsageError("cross_entropy: gradient buffer size mismatch");
  double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - m);
  for (std::size_t j = 0; j < logits.size(); ++j)
    grad_out[j] = std::exp(logits[j] - m) / denom;
  double loss = -(logits[target] - m) + std::log(denom);
  grad_out[target] -= 1.0;
  return loss;
}

ClassificationResult classification_loss(
    const numkit::DenseMatrix& class_logits,
    const numkit::DenseMatrix& region_logits, const ClassLabels& labels) {
  std::size_t n = labels.region.size();
  if (n == 0) throw UsageError("classification loss: empty batch");
  if (class_logits.rows() != n || region_logits.rows() != n ||
      labels.cls.size() != n)
    throw UsageError("classification loss: row count mismatch");
  if (region_logits.cols() != 2)
    throw UsageError("classification loss: region logits must be 2-wide");

  ClassificationResult res;
  res.d_class_logits =
      numkit::DenseMatrix(n, class_logits.cols(), 0.0);
  res.d_region_logits = numkit::DenseMatrix(n, 2, 0.0);
  double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad_row;
  for (std::size_t i = 0; i < n; ++i) {
    int y_r = labels.region[i];
    if (y_r != 0 && y_r != 1)
      throw UsageError("classification loss: region label must be 0 or 1");
    grad_row.assign(2, 0.0);
    res.value += inv_n * cross_entropy(region_logits.row(i), y_r, grad_row);
    for (std::size_t j = 0; j < 2; ++j)
      res.d_region_logits(i, j) = inv_n * grad_row[j];
    if (y_r == 1) {
      int y_c = labels.cls[i];
      if (y_c < 0)
        throw UsageError(
            "classification loss: foreground clip without class label");
      grad_row.assign(class_logits.cols(), 0.0);
      res.value += inv_n * cross_entropy(class_logits.row(i), y_c, grad_row);
      for (std::size_t j = 0; j < class_logits.cols(); ++j)
        res.d_class_logits(i, j) = inv_n * grad_row[j];
    }
  }
  return res;
}

TotalResult total_loss(const ContrastiveBatch& batch,
                       const numkit::DenseMatrix& class_logits,
                       const numkit::DenseMatrix& region_logits,
                       const ClassLabels& labels, Objective objective,
                       double tau, bool dedupe_negatives) {
  TotalResult out;
  std::size_t n = batch.size();
  std::size_t d = batch.z_video.cols();
  out.d_z_video = numkit::DenseMatrix(n, d, 0.0);
  out.d_z_text = numkit::DenseMatrix(n, d, 0.0);
  out.d_class_logits = numkit::DenseMatrix(n, class_logits.cols(), 0.0);
  out.d_region_logits = numkit::DenseMatrix(n, 2, 0.0);

  bool use_ce = objective != Objective::kClapNoCls;
  bool use_clip = objective == Objective::kClapClip;
  bool use_mask = objective == Objective::kClapMask ||
                  objective == Objective::kClap ||
                  objective == Objective::kClapNoCls;

  if (use_ce) {
    ClassificationResult ce =
        classification_loss(class_logits, region_logits, labels);
    out.report.l_ce = ce.value;
    out.d_class_logits = std::move(ce.d_class_logits);
    out.d_region_logits = std::move(ce.d_region_logits);
  }
  if (use_clip) {
    ContrastiveResult c = clip_loss(batch, tau, dedupe_negatives);
    out.report.l_clip = c.value;
    out.d_z_video = std::move(c.d_z_video);
    out.d_z_text = std::move(c.d_z_text);
  }
  if (use_mask) {
    ContrastiveResult m = masked_loss(batch, tau, dedupe_negatives);
    out.report.l_mask = m.value;
    out.d_z_video = std::move(m.d_z_video);
    out.d_z_text = std::move(m.d_z_text);
  }
  out.report.l_total = out.report.l_ce.value_or(0.0) +
                       out.report.l_clip.value_or(0.0) +
                       out.report.l_mask.value_or(0.0);
  return out;
}

}  // namespace clap::losses
