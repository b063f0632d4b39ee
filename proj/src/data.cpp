#include "broadface/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::size_t parse_count(std::string_view text, std::size_t line, const char* what) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(text) + "'", line);
  }
  return value;
}

double parse_real(std::string_view text, std::size_t line, std::size_t column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("invalid number '" + std::string(text) + "' in column " + std::to_string(column + 1), line);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite feature in column " + std::to_string(column + 1), line);
  }
  return value;
}

void append_real(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

std::uint64_t pair_key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

}  // namespace

void LabeledDataset::validate() const {
  if (num_classes == 0) throw InvalidArgument("dataset declares zero classes");
  if (feature_dim == 0) throw InvalidArgument("dataset declares zero feature dimension");
  std::vector<bool> seen(num_classes, false);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label >= num_classes) {
      throw InvalidArgument("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                            " >= class count " + std::to_string(num_classes));
    }
    if (s.features.size() != feature_dim) throw DimensionMismatch("sample features", feature_dim, s.features.size());
    if (!s.features.all_finite()) throw InvalidArgument("sample " + std::to_string(i) + " has non-finite features");
    seen[s.label] = true;
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw InvalidArgument("class " + std::to_string(missing - seen.begin()) + " has no samples");
  }
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& s : samples) ++counts.at(s.label);
  return counts;
}

void SyntheticSpec::validate() const {
  if (num_classes == 0 || samples_per_class == 0 || feature_dim == 0) {
    throw InvalidArgument("synthetic dataset counts must be positive");
  }
  if (!(intra_class_noise >= 0.0) || !std::isfinite(intra_class_noise)) {
    throw InvalidArgument("intra-class noise must be >= 0");
  }
  if (!(inter_class_separation > 0.0) || !std::isfinite(inter_class_separation)) {
    throw InvalidArgument("inter-class separation must be positive");
  }
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Vector> centers;
  centers.reserve(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    Vector direction(spec.feature_dim);
    do {
      for (double& v : direction) v = normal(rng);
    } while (!(l2_norm(direction) > kNormEpsilon));
    centers.push_back(spec.inter_class_separation * l2_normalize(direction));
  }

  LabeledDataset out;
  out.num_classes = spec.num_classes;
  out.feature_dim = spec.feature_dim;
  out.samples.reserve(spec.num_classes * spec.samples_per_class);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
      Vector x = centers[c];
      for (double& v : x) v += spec.intra_class_noise * normal(rng);
      out.samples.push_back({std::move(x), c});
    }
  }
  return out;
}

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::string text = "bfds," + std::to_string(dataset.samples.size()) + "," + std::to_string(dataset.feature_dim) +
                     "," + std::to_string(dataset.num_classes) + "\n";
  for (const auto& s : dataset.samples) {
    text += std::to_string(s.label);
    for (double v : s.features) {
      text += ',';
      append_real(text, v);
    }
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open dataset for writing: " + path.string());
  out << text;
  if (!out) throw Error("failed writing dataset: " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ParseError("empty dataset file", 1);

  const auto header = split_commas(line);
  if (header.size() != 4 || header[0] != "bfds") throw ParseError("expected header 'bfds,<count>,<dim>,<classes>'", 1);
  const std::size_t count = parse_count(header[1], 1, "sample count");
  LabeledDataset out;
  out.feature_dim = parse_count(header[2], 1, "feature dimension");
  out.num_classes = parse_count(header[3], 1, "class count");
  if (out.feature_dim == 0 || out.num_classes == 0) throw ParseError("dimension and class count must be positive", 1);

  std::size_t line_no = 1;
  out.samples.reserve(count);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != out.feature_dim + 1) {
      throw ParseError("expected " + std::to_string(out.feature_dim + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const std::size_t label = parse_count(fields[0], line_no, "label");
    if (label >= out.num_classes) {
      throw ParseError("row " + std::to_string(out.samples.size() + 1) + ": label " + std::to_string(label) +
                           " >= declared class count " + std::to_string(out.num_classes),
                       line_no);
    }
    Vector features(out.feature_dim);
    for (std::size_t d = 0; d < out.feature_dim; ++d) features[d] = parse_real(fields[d + 1], line_no, d + 1);
    out.samples.push_back({std::move(features), label});
  }
  if (out.samples.size() != count) {
    throw ParseError("header declares " + std::to_string(count) + " samples, file has " +
                         std::to_string(out.samples.size()),
                     0);
  }
  try {
    out.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), 0);
  }
  return out;
}

TrainTestSplit split_holdout(const LabeledDataset& dataset, std::size_t per_class, std::uint64_t seed) {
  dataset.validate();
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) by_class[dataset.samples[i].label].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<bool> is_test(dataset.samples.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() <= per_class) {
      throw InvalidArgument("class " + std::to_string(c) + " has too few samples for a holdout of " +
                            std::to_string(per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < per_class; ++k) is_test[members[k]] = true;
  }
  TrainTestSplit out;
  out.train.num_classes = out.test.num_classes = dataset.num_classes;
  out.train.feature_dim = out.test.feature_dim = dataset.feature_dim;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (is_test[i] ? out.test : out.train).samples.push_back(dataset.samples[i]);
  }
  return out;
}

std::vector<SamplePair> split_pairs(const LabeledDataset& dataset, std::size_t num_genuine, std::size_t num_impostor,
                                    std::uint64_t seed) {
  const std::size_t n = dataset.samples.size();
  if (n >= (std::size_t{1} << 32)) throw InvalidArgument("dataset too large for pair sampling");
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < n; ++i) by_class.at(dataset.samples[i].label).push_back(i);

  std::vector<std::size_t> multi_classes;
  std::uint64_t genuine_available = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const std::uint64_t k = by_class[c].size();
    if (k >= 2) multi_classes.push_back(c);
    genuine_available += k * (k - 1) / 2;
  }
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t impostor_available = all_pairs - genuine_available;
  if (num_genuine > genuine_available) {
    throw InvalidArgument("requested " + std::to_string(num_genuine) + " genuine pairs, only " +
                          std::to_string(genuine_available) + " exist");
  }
  if (num_impostor > impostor_available) {
    throw InvalidArgument("requested " + std::to_string(num_impostor) + " impostor pairs, only " +
                          std::to_string(impostor_available) + " exist");
  }

  std::mt19937_64 rng(seed);
  std::vector<SamplePair> out;
  out.reserve(num_genuine + num_impostor);

  auto take = [&](std::vector<SamplePair> candidates, std::size_t count) {
    std::shuffle(candidates.begin(), candidates.end(), rng);
    out.insert(out.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count));
  };

  // Enumerate when the requested share is large, otherwise rejection-sample.
  if (num_genuine > 0) {
    if (4 * static_cast<std::uint64_t>(num_genuine) >= genuine_available) {
      std::vector<SamplePair> candidates;
      for (const auto& members : by_class) {
        for (std::size_t a = 0; a < members.size(); ++a) {
          for (std::size_t b = a + 1; b < members.size(); ++b) candidates.push_back({members[a], members[b], true});
        }
      }
      take(std::move(candidates), num_genuine);
    } else {
      std::uniform_int_distribution<std::size_t> pick_sample(0, n - 1);
      std::set<std::uint64_t> used;
      while (out.size() < num_genuine) {
        const std::size_t a = pick_sample(rng);
        const auto& members = by_class[dataset.samples[a].label];
        if (members.size() < 2) continue;
        std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
        const std::size_t b = members[pick_member(rng)];
        if (a == b || !used.insert(pair_key(a, b)).second) continue;
        out.push_back({std::min(a, b), std::max(a, b), true});
      }
    }
  }
  if (num_impostor > 0) {
    if (4 * static_cast<std::uint64_t>(num_impostor) >= impostor_available) {
      std::vector<SamplePair> candidates;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          if (dataset.samples[a].label != dataset.samples[b].label) candidates.push_back({a, b, false});
        }
      }
      take(std::move(candidates), num_impostor);
    } else {
      std::uniform_int_distribution<std::size_t> pick_sample(0, n - 1);
      std::set<std::uint64_t> used;
      std::size_t taken = 0;
      while (taken < num_impostor) {
        const std::size_t a = pick_sample(rng);
        const std::size_t b = pick_sample(rng);
        if (dataset.samples[a].label == dataset.samples[b].label) continue;
        if (!used.insert(pair_key(a, b)).second) continue;
        out.push_back({std::min(a, b), std::max(a, b), false});
        ++taken;
      }
    }
  }
  return out;
}

}  // namespace broadface
