#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "broadface/data.hpp"
#include "broadface/errors.hpp"
#include "support/oracles.hpp"

namespace broadface {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("bfe_test_" + name); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.num_classes = 6;
  spec.samples_per_class = 5;
  spec.feature_dim = 4;
  spec.intra_class_noise = 0.1;
  spec.seed = 9;
  return spec;
}

TEST(Synthetic, DefaultsMatchDeskScale) {
  const SyntheticSpec spec;
  EXPECT_EQ(spec.num_classes, 512u);
  EXPECT_EQ(spec.samples_per_class, 32u);
  EXPECT_EQ(spec.feature_dim, 32u);
}

TEST(Synthetic, ZeroNoiseClonesClassMembers) {
  auto spec = small_spec();
  spec.intra_class_noise = 0.0;
  const auto ds = generate_synthetic(spec);
  ASSERT_EQ(ds.samples.size(), 30u);
  for (const auto& a : ds.samples) {
    for (const auto& b : ds.samples) {
      if (a.label == b.label) EXPECT_EQ(a.features, b.features);
    }
  }
}

TEST(Synthetic, SameSeedSameDataset) {
  EXPECT_EQ(generate_synthetic(small_spec()), generate_synthetic(small_spec()));
  auto other = small_spec();
  other.seed = 10;
  EXPECT_NE(generate_synthetic(small_spec()), generate_synthetic(other));
}

TEST(Synthetic, WideSeparationIsLinearlySeparable) {
  SyntheticSpec spec{2, 50, 8, 0.01, 100.0, 4};
  const auto ds = generate_synthetic(spec);
  std::vector<oracle::Point> points;
  for (const auto& s : ds.samples) points.emplace_back(std::vector<double>(s.features.begin(), s.features.end()), s.label);
  EXPECT_TRUE(oracle::perceptron_separates(points));
}

TEST(Synthetic, NearestCenterClassifiesLearnableTask) {
  SyntheticSpec spec{64, 20, 16, 0.05, 2.0, 8};
  const auto ds = generate_synthetic(spec);
  // Centers estimated from the data itself.
  std::vector<std::vector<double>> centers(spec.num_classes, std::vector<double>(spec.feature_dim, 0.0));
  for (const auto& s : ds.samples) {
    for (std::size_t d = 0; d < spec.feature_dim; ++d) centers[s.label][d] += s.features[d] / spec.samples_per_class;
  }
  std::size_t correct = 0;
  for (const auto& s : ds.samples) {
    std::size_t best = 0;
    double best_dist = 1e300;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double dist = 0.0;
      for (std::size_t d = 0; d < spec.feature_dim; ++d) dist += (s.features[d] - centers[c][d]) * (s.features[d] - centers[c][d]);
      if (dist < best_dist) best_dist = dist, best = c;
    }
    correct += best == s.label ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(correct) / ds.samples.size(), 0.99);
}

TEST(Synthetic, InvalidSpecThrows) {
  auto spec = small_spec();
  spec.num_classes = 0;
  EXPECT_THROW(generate_synthetic(spec), InvalidArgument);
  spec = small_spec();
  spec.intra_class_noise = -1.0;
  EXPECT_THROW(generate_synthetic(spec), InvalidArgument);
}

TEST(DatasetFile, RoundTrip) {
  const auto ds = generate_synthetic(small_spec());
  const auto path = temp_file("roundtrip.bfds");
  save_dataset(ds, path);
  EXPECT_EQ(load_dataset(path), ds);
  fs::remove(path);
}

TEST(DatasetFile, LabelOutOfRangeNamesRow) {
  const auto path = temp_file("badlabel.bfds");
  write_text(path, "bfds,2,2,2\n0,1.0,2.0\n2,3.0,4.0\n");
  try {
    load_dataset(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  fs::remove(path);
}

TEST(DatasetFile, EmptyFileRejected) {
  const auto path = temp_file("empty.bfds");
  write_text(path, "");
  EXPECT_THROW(load_dataset(path), ParseError);
  fs::remove(path);
}

TEST(DatasetFile, NonFiniteFeatureRejected) {
  const auto path = temp_file("nan.bfds");
  for (const char* bad : {"nan", "inf", "-inf"}) {
    write_text(path, std::string("bfds,2,2,2\n0,1.0,") + bad + "\n1,3.0,4.0\n");
    EXPECT_THROW(load_dataset(path), ParseError) << bad;
  }
  fs::remove(path);
}

TEST(DatasetFile, MalformedInputRejected) {
  const auto path = temp_file("malformed.bfds");
  for (const char* text : {"csv,1,1,1\n0,1\n", "bfds,2,2,2\n0,1.0,2.0\n", "bfds,1,2,1\n0,1.0\n",
                           "bfds,1,2,1\n0,1.0,abc\n", "bfds,1,1,2\n0,1.0\n"}) {
    write_text(path, text);
    EXPECT_ANY_THROW(load_dataset(path)) << text;
  }
  EXPECT_THROW(load_dataset(temp_file("does_not_exist.bfds")), Error);
  fs::remove(path);
}

TEST(SplitHoldout, KeepsClassesOnBothSides) {
  const auto ds = generate_synthetic(small_spec());
  const auto split = split_holdout(ds, 2, 1);
  EXPECT_EQ(split.test.samples.size(), 12u);
  EXPECT_EQ(split.train.samples.size(), 18u);
  for (std::size_t count : split.test.class_counts()) EXPECT_EQ(count, 2u);
  EXPECT_THROW(split_holdout(ds, 5, 1), InvalidArgument);
}

TEST(SplitPairs, SingleClassCannotYieldImpostors) {
  auto spec = small_spec();
  spec.num_classes = 1;
  EXPECT_THROW(split_pairs(generate_synthetic(spec), 0, 3, 1), InvalidArgument);
}

TEST(SplitPairs, OnlyImpostorsWhenNoGenuineRequested) {
  const auto ds = generate_synthetic(small_spec());
  const auto pairs = split_pairs(ds, 0, 40, 2);
  ASSERT_EQ(pairs.size(), 40u);
  for (const auto& p : pairs) {
    EXPECT_FALSE(p.same_identity);
    EXPECT_NE(ds.samples[p.first].label, ds.samples[p.second].label);
  }
}

TEST(SplitPairs, DeterministicAndDistinct) {
  const auto ds = generate_synthetic(small_spec());
  const auto pairs = split_pairs(ds, 30, 200, 3);
  EXPECT_EQ(pairs, split_pairs(ds, 30, 200, 3));
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : pairs) {
    EXPECT_NE(p.first, p.second);
    EXPECT_EQ(p.same_identity, ds.samples[p.first].label == ds.samples[p.second].label);
    EXPECT_TRUE(seen.insert(std::minmax(p.first, p.second)).second);
  }
  // 6 classes * C(5,2) = 60 genuine pairs exist.
  EXPECT_NO_THROW(split_pairs(ds, 60, 0, 3));
  EXPECT_THROW(split_pairs(ds, 61, 0, 3), InvalidArgument);
}

}  // namespace
}  // namespace broadface
