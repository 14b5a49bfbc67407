#include <cmath>

#include "clap/losses/losses.hpp"
#include "clap/numkit/grad_check.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clap;
using namespace clap::losses;

namespace {

std::vector<double> random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.gaussian();
  double n = numkit::l2_norm(v);
  for (double& x : v) x /= n;
  return v;
}

ContrastiveBatch random_batch(std::size_t n, std::size_t d, Rng& rng,
                              double fg_probability = 0.5) {
  ContrastiveBatch batch;
  batch.z_video = numkit::DenseMatrix(n, d);
  batch.z_text = numkit::DenseMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> zv = random_unit(d, rng);
    std::vector<double> zt = random_unit(d, rng);
    for (std::size_t k = 0; k < d; ++k) {
      batch.z_video(i, k) = zv[k];
      batch.z_text(i, k) = zt[k];
    }
    batch.foreground.push_back(rng.bernoulli(fg_probability) ? 1 : 0);
    batch.texts.push_back("text" + std::to_string(i));
  }
  return batch;
}

oracles::PairBatch to_oracle(const ContrastiveBatch& batch) {
  oracles::PairBatch o;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    o.z_video.emplace_back(batch.z_video.row(i).begin(),
                           batch.z_video.row(i).end());
    o.z_text.emplace_back(batch.z_text.row(i).begin(),
                          batch.z_text.row(i).end());
    o.foreground.push_back(batch.foreground[i] != 0);
  }
  return o;
}

}  // namespace

TEST_CASE("nce with no negatives is exactly one") {
  Rng rng(1);
  std::vector<double> zv = random_unit(6, rng);
  std::vector<double> zt = random_unit(6, rng);
  CHECK(nce(zv, zt, {}, 0.07) == 1.0);
}

TEST_CASE("nce with an equal-similarity negative is one half") {
  std::vector<double> zv{1.0, 0.0};
  std::vector<double> zt{0.0, 1.0};
  std::vector<std::vector<double>> negatives{{0.0, 1.0}};
  for (double tau : {0.05, 0.5, 1.0, 7.0})
    CHECK(nce(zv, zt, negatives, tau) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nce scalar example: e / (e + 1)") {
  std::vector<double> zv{1.0, 0.0};
  std::vector<double> zt{1.0, 0.0};   // dot 1
  std::vector<std::vector<double>> negatives{{0.0, 1.0}};  // dot 0
  double expected = std::exp(1.0) / (std::exp(1.0) + 1.0);  // 0.731059...
  CHECK(nce(zv, zt, negatives, 1.0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("nce rejects non-positive temperatures") {
  std::vector<double> z{1.0, 0.0};
  CHECK_THROWS_AS(nce(z, z, {}, 0.0), UsageError);
  CHECK_THROWS_AS(nce(z, z, {}, -1.0), UsageError);
}

TEST_CASE("nce candidate distribution sums to one") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + trial % 6;
    std::vector<std::vector<double>> candidates;
    for (std::size_t j = 0; j < n; ++j) candidates.push_back(random_unit(8, rng));
    std::vector<double> anchor = random_unit(8, rng);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::vector<double>> negatives;
      for (std::size_t k = 0; k < n; ++k)
        if (k != j) negatives.push_back(candidates[k]);
      total += nce(anchor, candidates[j], negatives, 0.07);
    }
    CHECK(std::fabs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("temperature changes probabilities but never the argmax") {
  Rng rng(23);
  std::vector<double> anchor = random_unit(8, rng);
  std::vector<std::vector<double>> candidates;
  for (int j = 0; j < 6; ++j) candidates.push_back(random_unit(8, rng));
  auto best_at = [&](double tau) {
    std::size_t best = 0;
    double best_p = -1.0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      std::vector<std::vector<double>> negatives;
      for (std::size_t k = 0; k < candidates.size(); ++k)
        if (k != j) negatives.push_back(candidates[k]);
      double p = nce(anchor, candidates[j], negatives, tau);
      if (p > best_p) {
        best_p = p;
        best = j;
      }
    }
    return best;
  };
  std::size_t reference = best_at(1.0);
  for (double tau : {0.01, 0.07, 0.5, 3.0, 50.0})
    CHECK(best_at(tau) == reference);
}

TEST_CASE("clip loss on a single pair is zero") {
  Rng rng(3);
  ContrastiveBatch batch = random_batch(1, 6, rng);
  ContrastiveResult res = clip_loss(batch, 0.07);
  CHECK(res.value == 0.0);
}

TEST_CASE("clip loss matches the brute-force oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t n = 2 + trial % 7;
    ContrastiveBatch batch = random_batch(n, 8, rng);
    double tau = 0.05 + 0.1 * (trial % 5);
    ContrastiveResult res = clip_loss(batch, tau);
    double expect = oracles::contrastive_loss(to_oracle(batch), tau, false);
    CHECK(res.value == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("clip loss value is bitwise invariant to pair order") {
  Rng rng(7);
  ContrastiveBatch batch = random_batch(6, 8, rng);
  ContrastiveResult base = clip_loss(batch, 0.07);
  ContrastiveResult base_mask = masked_loss(batch, 0.07);
  // rotate the pairs
  for (std::size_t shift = 1; shift < batch.size(); ++shift) {
    ContrastiveBatch rotated;
    std::size_t n = batch.size();
    rotated.z_video = numkit::DenseMatrix(n, 8);
    rotated.z_text = numkit::DenseMatrix(n, 8);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t src = (i + shift) % n;
      for (std::size_t k = 0; k < 8; ++k) {
        rotated.z_video(i, k) = batch.z_video(src, k);
        rotated.z_text(i, k) = batch.z_text(src, k);
      }
      rotated.foreground.push_back(batch.foreground[src]);
      rotated.texts.push_back(batch.texts[src]);
    }
    CHECK(clip_loss(rotated, 0.07).value == base.value);
    CHECK(masked_loss(rotated, 0.07).value == base_mask.value);
  }
}

TEST_CASE("masked loss on an all-background batch is zero with zero grads") {
  Rng rng(9);
  ContrastiveBatch batch = random_batch(5, 8, rng, 0.0);
  ContrastiveResult res = masked_loss(batch, 0.07);
  CHECK(res.value == 0.0);
  for (double g : res.d_z_video.data()) CHECK(g == 0.0);
  for (double g : res.d_z_text.data()) CHECK(g == 0.0);
}

TEST_CASE("masked loss equals clip loss exactly on all-foreground batches") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    ContrastiveBatch batch = random_batch(2 + trial, 8, rng, 1.0);
    CHECK(masked_loss(batch, 0.07).value == clip_loss(batch, 0.07).value);
  }
}

TEST_CASE("masked loss on a mixed batch matches the foreground-only oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    ContrastiveBatch batch = random_batch(4 + trial % 5, 8, rng, 0.5);
    if (batch.foreground_count() == 0) continue;
    double tau = 0.07 + 0.05 * (trial % 4);
    ContrastiveResult res = masked_loss(batch, tau);
    double expect = oracles::contrastive_loss(to_oracle(batch), tau, true);
    CHECK(res.value == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("masking only removes nonnegative terms from the clip sum") {
  // Term-level monotonicity: |F_g| * masked <= |B| * clip. The normalized
  // values use different denominators, so the comparison is made on the
  // underlying sums.
  Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    ContrastiveBatch batch = random_batch(2 + trial % 8, 8, rng, 0.4);
    double clip_sum = clip_loss(batch, 0.07).value * batch.size();
    double mask_sum =
        masked_loss(batch, 0.07).value * batch.foreground_count();
    CHECK(mask_sum <= clip_sum + 1e-9);
  }
}

TEST_CASE("background pairs get gradient only through their negative role") {
  Rng rng(19);
  ContrastiveBatch batch = random_batch(6, 8, rng, 0.5);
  if (batch.foreground_count() == 0 ||
      batch.foreground_count() == batch.size())
    return;
  double tau = 0.07;
  ContrastiveResult res = masked_loss(batch, tau);
  double w = 1.0 / batch.foreground_count();
  std::size_t n = batch.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (batch.foreground[j]) continue;
    // negatives-only oracle: softmax weight of candidate j under each
    // foreground anchor, no positive pull
    std::vector<double> expect_t(8, 0.0), expect_v(8, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!batch.foreground[i]) continue;
      std::vector<double> vt, tv;
      for (std::size_t k = 0; k < n; ++k) {
        vt.push_back(numkit::dot(batch.z_video.row(i), batch.z_text.row(k)) /
                     tau);
        tv.push_back(numkit::dot(batch.z_text.row(i), batch.z_video.row(k)) /
                     tau);
      }
      double p_vt = oracles::softmax_probability(vt, j);
      double p_tv = oracles::softmax_probability(tv, j);
      for (std::size_t d = 0; d < 8; ++d) {
        expect_t[d] += w * p_vt * batch.z_video(i, d) / tau;
        expect_v[d] += w * p_tv * batch.z_text(i, d) / tau;
      }
    }
    for (std::size_t d = 0; d < 8; ++d) {
      CHECK(res.d_z_text(j, d) == doctest::Approx(expect_t[d]).epsilon(1e-9));
      CHECK(res.d_z_video(j, d) == doctest::Approx(expect_v[d]).epsilon(1e-9));
    }
  }
}

TEST_CASE("dedupe_negatives removes duplicate texts from the denominators") {
  Rng rng(21);
  ContrastiveBatch batch = random_batch(4, 8, rng, 1.0);
  batch.texts = {"same", "same", "other", "another"};
  double with_dupes = clip_loss(batch, 0.07, false).value;
  double deduped = clip_loss(batch, 0.07, true).value;
  CHECK(with_dupes != deduped);
  // all-distinct texts: flag has no effect
  batch.texts = {"a", "b", "c", "d"};
  CHECK(clip_loss(batch, 0.07, false).value ==
        clip_loss(batch, 0.07, true).value);
}

TEST_CASE("classification loss: background clips touch only the region head") {
  numkit::DenseMatrix class_logits =
      numkit::DenseMatrix::from_rows({{0.3, -0.2, 0.9, 0.1}});
  numkit::DenseMatrix region_logits =
      numkit::DenseMatrix::from_rows({{0.4, -0.4}});
  ClassLabels labels{{0}, {-1}};
  ClassificationResult res =
      classification_loss(class_logits, region_logits, labels);
  for (double g : res.d_class_logits.data()) CHECK(g == 0.0);
  // value equals region cross-entropy alone
  std::vector<double> grad(2);
  double expect = cross_entropy(region_logits.row(0), 0, grad);
  CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("classification loss: uniform logits give ln2 + lnC") {
  numkit::DenseMatrix class_logits(1, 4, 0.0);
  numkit::DenseMatrix region_logits(1, 2, 0.0);
  ClassLabels labels{{1}, {2}};
  ClassificationResult res =
      classification_loss(class_logits, region_logits, labels);
  CHECK(res.value ==
        doctest::Approx(std::log(2.0) + std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("confidently correct region logits drive the region term to zero") {
  numkit::DenseMatrix class_logits(1, 3, 0.0);
  numkit::DenseMatrix region_logits =
      numkit::DenseMatrix::from_rows({{-40.0, 40.0}});
  ClassLabels labels{{1}, {0}};
  ClassificationResult res =
      classification_loss(class_logits, region_logits, labels);
  CHECK(res.value == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("foreground clip without a class label is an input error") {
  numkit::DenseMatrix class_logits(1, 3, 0.0);
  numkit::DenseMatrix region_logits(1, 2, 0.0);
  ClassLabels labels{{1}, {-1}};
  CHECK_THROWS_AS(classification_loss(class_logits, region_logits, labels),
                  UsageError);
}

namespace {

struct TotalFixture {
  ContrastiveBatch batch;
  numkit::DenseMatrix class_logits;
  numkit::DenseMatrix region_logits;
  ClassLabels labels;
};

TotalFixture total_fixture(std::size_t n, Rng& rng, double fg_probability) {
  TotalFixture f;
  f.batch = random_batch(n, 8, rng, fg_probability);
  f.class_logits = numkit::DenseMatrix(n, 5);
  f.region_logits = numkit::DenseMatrix(n, 2);
  for (double& x : f.class_logits.data()) x = rng.gaussian();
  for (double& x : f.region_logits.data()) x = rng.gaussian();
  for (std::size_t i = 0; i < n; ++i) {
    int fg = f.batch.foreground[i];
    f.labels.region.push_back(fg);
    f.labels.cls.push_back(fg ? static_cast<int>(rng.uniform_int(0, 4)) : -1);
  }
  return f;
}

}  // namespace

TEST_CASE("total loss composition per objective") {
  Rng rng(25);
  TotalFixture f = total_fixture(6, rng, 0.5);

  TotalResult tac = total_loss(f.batch, f.class_logits, f.region_logits,
                               f.labels, Objective::kTac, 0.07);
  CHECK(tac.report.l_ce.has_value());
  CHECK_FALSE(tac.report.l_clip.has_value());
  CHECK_FALSE(tac.report.l_mask.has_value());
  CHECK(tac.report.l_total == *tac.report.l_ce);

  TotalResult clap = total_loss(f.batch, f.class_logits, f.region_logits,
                                f.labels, Objective::kClap, 0.07);
  CHECK(clap.report.l_ce.has_value());
  CHECK(clap.report.l_mask.has_value());
  CHECK(std::fabs(clap.report.l_total -
                  (*clap.report.l_ce + *clap.report.l_mask)) < 1e-12);

  TotalResult no_cls = total_loss(f.batch, f.class_logits, f.region_logits,
                                  f.labels, Objective::kClapNoCls, 0.07);
  CHECK_FALSE(no_cls.report.l_ce.has_value());
  for (double g : no_cls.d_class_logits.data()) CHECK(g == 0.0);
  for (double g : no_cls.d_region_logits.data()) CHECK(g == 0.0);

  // clap-mask uses the same loss algebra as clap
  TotalResult mask = total_loss(f.batch, f.class_logits, f.region_logits,
                                f.labels, Objective::kClapMask, 0.07);
  CHECK(mask.report.l_total == clap.report.l_total);
}

TEST_CASE("clap equals clap-clip on all-foreground batches") {
  Rng rng(27);
  TotalFixture f = total_fixture(5, rng, 1.0);
  TotalResult clap = total_loss(f.batch, f.class_logits, f.region_logits,
                                f.labels, Objective::kClap, 0.07);
  TotalResult clip = total_loss(f.batch, f.class_logits, f.region_logits,
                                f.labels, Objective::kClapClip, 0.07);
  CHECK(clap.report.l_total == clip.report.l_total);
  CHECK(*clap.report.l_mask == *clip.report.l_clip);
}

TEST_CASE("analytic gradients of every loss match finite differences") {
  // >= 20 seeded instances across the loss family, checked against the
  // shared finite-difference machinery at the module tolerance.
  using numkit::ParamRef;
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    Rng rng(seed * 31);
    std::size_t n = 3 + seed % 5;
    TotalFixture f = total_fixture(n, rng, 0.5);
    double tau = std::array{0.2, 0.5, 1.0}[seed % 3];
    Objective objective =
        std::array{Objective::kClapClip, Objective::kClapMask,
                   Objective::kClap, Objective::kTac,
                   Objective::kClapNoCls}[seed % 5];

    numkit::DenseMatrix d_zv, d_zt, d_cls, d_reg;
    {
      TotalResult res = total_loss(f.batch, f.class_logits, f.region_logits,
                                   f.labels, objective, tau);
      d_zv = res.d_z_video;
      d_zt = res.d_z_text;
      d_cls = res.d_class_logits;
      d_reg = res.d_region_logits;
    }
    auto loss_value = [&] {
      return total_loss(f.batch, f.class_logits, f.region_logits, f.labels,
                        objective, tau)
          .report.l_total;
    };
    std::vector<ParamRef> params{
        {f.batch.z_video.data(), d_zv.data()},
        {f.batch.z_text.data(), d_zt.data()},
        {f.class_logits.data(), d_cls.data()},
        {f.region_logits.data(), d_reg.data()}};
    CHECK(numkit::max_relative_gradient_error(loss_value, params, {}) < 1e-4);
  }
}

TEST_CASE("gradients at the sharp default temperature") {
  // tau = 0.07 pushes tail softmax probabilities of non-competitive
  // candidates toward e^-20, so some true gradients sit below the
  // resolution of central differences (~1e-10 absolute at step 1e-5).
  // Those coordinates are accepted when both routes agree the gradient is
  // at the noise floor; everything resolvable is held to 1e-4.
  using numkit::ParamRef;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed * 101);
    TotalFixture f = total_fixture(6, rng, 0.5);
    double tau = 0.07;
    TotalResult res = total_loss(f.batch, f.class_logits, f.region_logits,
                                 f.labels, Objective::kClap, tau);
    auto loss_value = [&] {
      return total_loss(f.batch, f.class_logits, f.region_logits, f.labels,
                        Objective::kClap, tau)
          .report.l_total;
    };
    std::vector<ParamRef> params{
        {f.batch.z_video.data(), res.d_z_video.data()},
        {f.batch.z_text.data(), res.d_z_text.data()},
        {f.class_logits.data(), res.d_class_logits.data()},
        {f.region_logits.data(), res.d_region_logits.data()}};
    double h = 1e-5;
    for (ParamRef p : params) {
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        double saved = p.value[k];
        p.value[k] = saved + h;
        double plus = loss_value();
        p.value[k] = saved - h;
        double minus = loss_value();
        p.value[k] = saved;
        double numeric = (plus - minus) / (2 * h);
        double analytic = p.grad[k];
        double denom =
            std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
        bool resolvable = std::fabs(analytic) > 1e-5;
        bool close = std::fabs(analytic - numeric) / denom < 1e-4;
        bool agree_at_floor = std::fabs(analytic - numeric) < 1e-8;
        CHECK((resolvable ? close : agree_at_floor));
      }
    }
  }
}
