#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "broadface/errors.hpp"
#include "broadface/losses.hpp"
#include "support/oracles.hpp"

namespace broadface {
namespace {

struct RandomProblem {
  Vector e;
  Matrix w;
  std::size_t label;
};

RandomProblem random_problem(std::uint64_t seed, std::size_t classes = 6, std::size_t dim = 5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RandomProblem p{Vector(dim), Matrix(classes, dim), seed % classes};
  for (double& v : p.e) v = normal(rng);
  for (double& v : p.w.flat()) v = normal(rng);
  return p;
}

std::vector<std::vector<double>> rows_of(const Matrix& w) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < w.rows(); ++r) out.emplace_back(w.row(r).begin(), w.row(r).end());
  return out;
}

int kind_index(MarginKind k) { return k == MarginKind::kPlain ? 0 : k == MarginKind::kArcFace ? 1 : 2; }

TEST(CosineLogits, Examples) {
  const Vector aligned = cosine_logits(Vector{0, 2, 0}, Matrix{{1, 0, 0}, {0, 3, 0}, {0, 0, 1}});
  EXPECT_NEAR(aligned[0], 0.0, 1e-15);
  EXPECT_NEAR(aligned[1], 1.0, 1e-15);
  EXPECT_NEAR(aligned[2], 0.0, 1e-15);

  const Vector equal = cosine_logits(Vector{0.3, -0.7}, Matrix{{1, 2}, {1, 2}, {1, 2}});
  EXPECT_EQ(equal[0], equal[1]);
  EXPECT_EQ(equal[1], equal[2]);

  EXPECT_EQ(cosine_logits(Vector{1, 0}, Matrix{{1, 0}, {-1, 0}}), (Vector{1, -1}));
  EXPECT_THROW(cosine_logits(Vector{0, 0}, Matrix{{1, 0}}), NearZeroNorm);
  EXPECT_THROW(cosine_logits(Vector{1, 0}, Matrix{{1, 0}, {0, 0}}), NearZeroNorm);
}

TEST(MarginConfig, Validation) {
  EXPECT_NO_THROW(MarginConfig::arcface(0.5, 64).validate());
  EXPECT_THROW(MarginConfig::arcface(std::numbers::pi / 2, 64).validate(), InvalidArgument);
  EXPECT_THROW(MarginConfig::arcface(-0.1, 64).validate(), InvalidArgument);
  EXPECT_THROW(MarginConfig::cosface(1.0, 64).validate(), InvalidArgument);
  EXPECT_THROW(MarginConfig::plain(0.0).validate(), InvalidArgument);
  EXPECT_EQ(parse_margin_kind("cosface"), MarginKind::kCosFace);
  EXPECT_THROW(parse_margin_kind("sphereface"), InvalidArgument);
}

TEST(MarginLoss, TwoEqualLogitsGiveLn2) {
  // e is orthogonal to both rows, so both cosines are 0.
  const auto out = margin_loss(Vector{0, 1}, 0, Matrix{{1, 0}, {-1, 0}}, MarginConfig::plain(1.0));
  EXPECT_NEAR(out.loss, std::log(2.0), 1e-15);
}

TEST(MarginLoss, ZeroArcMarginEqualsPlain) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = random_problem(seed);
    const auto arc = margin_loss(p.e, p.label, p.w, MarginConfig::arcface(0.0, 1.0));
    const auto plain = margin_loss(p.e, p.label, p.w, MarginConfig::plain(1.0));
    EXPECT_NEAR(arc.loss, plain.loss, 1e-12);
    for (std::size_t d = 0; d < p.e.size(); ++d) EXPECT_NEAR(arc.grad_embedding[d], plain.grad_embedding[d], 1e-12);
    for (const auto& [row, grad] : plain.grad_rows) {
      for (std::size_t d = 0; d < grad.size(); ++d) EXPECT_NEAR(arc.grad_rows.at(row)[d], grad[d], 1e-12);
    }
  }
}

TEST(MarginLoss, MatchesDefinitionOracle) {
  const MarginConfig configs[] = {MarginConfig::plain(8), MarginConfig::arcface(0.5, 64), MarginConfig::cosface(0.35, 30)};
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto p = random_problem(seed);
    const std::vector<double> e(p.e.begin(), p.e.end());
    for (const auto& cfg : configs) {
      const double expected = oracle::softmax_margin_loss(e, p.label, rows_of(p.w), kind_index(cfg.kind), cfg.margin, cfg.scale);
      EXPECT_NEAR(margin_loss(p.e, p.label, p.w, cfg).loss, expected, 1e-10 * std::max(1.0, expected));
    }
  }
}

TEST(MarginLoss, GradientsMatchFiniteDifferences) {
  const MarginConfig configs[] = {MarginConfig::plain(16), MarginConfig::arcface(0.5, 64), MarginConfig::cosface(0.35, 64)};
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto p = random_problem(seed);
    for (const auto& cfg : configs) {
      const auto analytic = margin_loss(p.e, p.label, p.w, cfg);
      std::vector<double> e(p.e.begin(), p.e.end());
      auto w = rows_of(p.w);
      auto loss = [&] { return oracle::softmax_margin_loss(e, p.label, w, kind_index(cfg.kind), cfg.margin, cfg.scale); };
      for (std::size_t d = 0; d < e.size(); ++d) {
        EXPECT_LT(oracle::rel_error(analytic.grad_embedding[d], oracle::central_difference(e, d, loss)), 1e-5);
      }
      for (std::size_t r = 0; r < w.size(); ++r) {
        for (std::size_t d = 0; d < w[r].size(); ++d) {
          EXPECT_LT(oracle::rel_error(analytic.grad_rows.at(r)[d], oracle::central_difference(w[r], d, loss)), 1e-5)
              << to_string(cfg.kind) << " seed " << seed;
        }
      }
    }
  }
}

TEST(MarginLoss, RejectsInvalidInputs) {
  const Matrix w{{1, 0}, {0, 1}};
  EXPECT_THROW(margin_loss(Vector{1, 0}, 2, w, MarginConfig::plain()), InvalidArgument);
  EXPECT_THROW(margin_loss(Vector{0, 0}, 0, w, MarginConfig::plain()), NearZeroNorm);
  EXPECT_THROW(margin_loss(Vector{1, 0, 0}, 0, w, MarginConfig::plain()), DimensionMismatch);
}

TEST(MarginLoss, ArcFaceStaysFiniteAtExtremeCosines) {
  const Matrix w{{1, 0}, {0, 1}};
  for (const Vector& e : {Vector{1, 0}, Vector{-1, 0}, Vector{1, 1e-12}, Vector{-1, 1e-9}}) {
    const auto out = margin_loss(e, 0, w, MarginConfig::arcface(0.5, 64));
    EXPECT_TRUE(std::isfinite(out.loss));
    EXPECT_TRUE(out.grad_embedding.all_finite());
  }
}

TEST(MarginLossProperty, EmbeddingScaleInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto p = random_problem(seed);
    const auto cfg = MarginConfig::arcface(0.5, 64);
    EXPECT_NEAR(margin_loss(scale(rng) * p.e, p.label, p.w, cfg).loss, margin_loss(p.e, p.label, p.w, cfg).loss, 1e-10);
  }
}

TEST(MarginLossProperty, TargetRowStepDecreasesLoss) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto p = random_problem(seed);
    for (const auto& cfg : {MarginConfig::plain(16), MarginConfig::arcface(0.5, 16), MarginConfig::cosface(0.35, 16)}) {
      const auto out = margin_loss(p.e, p.label, p.w, cfg);
      Matrix moved = p.w;
      axpy(-1e-4, out.grad_rows.at(p.label), moved.row(p.label));
      EXPECT_LT(margin_loss(p.e, p.label, moved, cfg).loss, out.loss) << "seed " << seed;
    }
  }
}

TEST(MarginLossProperty, PlainProbabilitiesSumToOne) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto p = random_problem(seed, 9, 4);
    const auto out = margin_loss(p.e, p.label, p.w, MarginConfig::plain(1.0));
    // dL/dz_j = p_j - [j == y]
    double total = 0.0;
    for (std::size_t j = 0; j < out.grad_cosines.size(); ++j) total += out.grad_cosines[j] + (j == p.label ? 1.0 : 0.0);
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

TEST(BatchLoss, SingleSampleEqualsMarginLoss) {
  const auto p = random_problem(4);
  const auto cfg = MarginConfig::cosface(0.35, 30);
  const LabeledEmbedding batch[] = {{p.e, p.label}};
  const auto b = batch_loss(batch, p.w, cfg);
  const auto single = margin_loss(p.e, p.label, p.w, cfg);
  EXPECT_EQ(b.loss, single.loss);
  for (std::size_t d = 0; d < p.e.size(); ++d) EXPECT_NEAR(b.grad_embeddings[0][d], single.grad_embedding[d], 1e-15);
}

TEST(BatchLoss, DuplicatedSampleKeepsMean) {
  const auto p = random_problem(5);
  const auto cfg = MarginConfig::arcface(0.5, 64);
  const LabeledEmbedding once[] = {{p.e, p.label}};
  const LabeledEmbedding twice[] = {{p.e, p.label}, {p.e, p.label}};
  EXPECT_EQ(batch_loss(once, p.w, cfg).loss, batch_loss(twice, p.w, cfg).loss);
}

TEST(BatchLoss, MeanOfThreeSamples) {
  const auto p = random_problem(6);
  const auto q = random_problem(7);
  const auto r = random_problem(8);
  const auto cfg = MarginConfig::arcface(0.5, 64);
  const LabeledEmbedding batch[] = {{p.e, 1}, {q.e, 2}, {r.e, 3}};
  const double expected = (margin_loss(p.e, 1, p.w, cfg).loss + margin_loss(q.e, 2, p.w, cfg).loss +
                           margin_loss(r.e, 3, p.w, cfg).loss) / 3.0;
  EXPECT_NEAR(batch_loss(batch, p.w, cfg).loss, expected, 1e-12);
  EXPECT_THROW(batch_loss(std::span<const LabeledEmbedding>{}, p.w, cfg), InvalidArgument);
}

}  // namespace
}  // namespace broadface
