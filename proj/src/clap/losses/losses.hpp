#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clap/numkit/dense.hpp"

namespace clap::losses {

enum class Objective { kTac, kClapClip, kClapMask, kClap, kClapNoCls };

const char* objective_name(Objective o);

// The positive pairs of one training step: row i of z_video and z_text is
// one video/text pair. Rows are unit vectors. texts are kept for the
// optional duplicate-negative exclusion.
struct ContrastiveBatch {
  numkit::DenseMatrix z_video;  // (N, d_embed)
  numkit::DenseMatrix z_text;   // (N, d_embed)
  std::vector<char> foreground; // N flags; F_g = indices with nonzero flag
  std::vector<std::string> texts;

  std::size_t size() const { return foreground.size(); }
  std::size_t foreground_count() const;
  void validate() const;
};

// Region label 0/1 per clip; class label required iff region == 1
// (background rows use -1).
struct ClassLabels {
  std::vector<int> region;
  std::vector<int> cls;
};

struct LossReport {
  std::optional<double> l_clip;
  std::optional<double> l_mask;
  std::optional<double> l_ce;
  double l_total = 0.0;
};

// Softmax probability of the positive against the negatives, computed with
// max-subtraction. The symmetric direction is obtained by swapping the
// argument roles.
double nce(std::span<const double> anchor, std::span<const double> positive,
           const std::vector<std::vector<double>>& negatives, double tau);

struct ContrastiveResult {
  double value = 0.0;
  numkit::DenseMatrix d_z_video;
  numkit::DenseMatrix d_z_text;
};

// -(1/|B|) sum over pairs of [log nce(z_v, z_t) + log nce(z_t, z_v)], with
// in-batch negatives in both directions.
ContrastiveResult clip_loss(const ContrastiveBatch& batch, double tau,
                            bool dedupe_negatives = false);

// Same per-pair terms gated to foreground pairs, normalized by |F_g|;
// background embeddings stay in every denominator as negatives. Zero when
// no pair is foreground.
ContrastiveResult masked_loss(const ContrastiveBatch& batch, double tau,
                              bool dedupe_negatives = false);

struct ClassificationResult {
  double value = 0.0;
  numkit::DenseMatrix d_class_logits;
  numkit::DenseMatrix d_region_logits;
};

// Cross-entropy on region logits for every clip, plus cross-entropy on
// class logits for foreground clips only. Mean over the batch.
ClassificationResult classification_loss(
    const numkit::DenseMatrix& class_logits,
    const numkit::DenseMatrix& region_logits, const ClassLabels& labels);

struct TotalResult {
  LossReport report;
  numkit::DenseMatrix d_z_video;
  numkit::DenseMatrix d_z_text;
  numkit::DenseMatrix d_class_logits;
  numkit::DenseMatrix d_region_logits;
};

// Objective composition:
//   tac          -> ce
//   clap_clip    -> ce + clip
//   clap_mask    -> ce + mask
//   clap         -> ce + mask
//   clap_no_cls  -> mask
// Reported terms are exactly the ones the objective uses.
TotalResult total_loss(const ContrastiveBatch& batch,
                       const numkit::DenseMatrix& class_logits,
                       const numkit::DenseMatrix& region_logits,
                       const ClassLabels& labels, Objective objective,
                       double tau, bool dedupe_negatives = false);

// -log softmax(logits)[target]; writes softmax - onehot into grad_out.
double cross_entropy(std::span<const double> logits, int target,
                     std::span<double> grad_out);

}  // namespace clap::losses
