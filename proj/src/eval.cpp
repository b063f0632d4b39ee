#include "broadface/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

std::vector<Vector> unit_embeddings(std::span<const LabeledEmbedding> items) {
  std::vector<Vector> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(l2_normalize(item.embedding));
  return out;
}

/// Count of values in an ascending array that are >= t.
std::size_t count_at_least(const std::vector<double>& ascending, double t) {
  return static_cast<std::size_t>(ascending.end() - std::lower_bound(ascending.begin(), ascending.end(), t));
}

}  // namespace

TarAtFar tar_at_far(std::span<const double> genuine, std::span<const double> impostor, double far_target) {
  if (genuine.empty() || impostor.empty()) throw InvalidArgument("tar_at_far needs genuine and impostor scores");
  if (!(far_target >= 0.0 && far_target <= 1.0)) throw InvalidArgument("far target must lie in [0, 1]");

  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<double> candidates;
  candidates.reserve(gen.size() + imp.size() + 1);
  candidates.insert(candidates.end(), gen.begin(), gen.end());
  candidates.insert(candidates.end(), imp.begin(), imp.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.push_back(std::nextafter(candidates.back(), std::numeric_limits<double>::infinity()));

  const double n_imp = static_cast<double>(imp.size());
  // The acceptance rate is nonincreasing in the threshold: binary-search the first admissible candidate.
  const auto first_ok = std::partition_point(candidates.begin(), candidates.end(), [&](double t) {
    return static_cast<double>(count_at_least(imp, t)) / n_imp > far_target;
  });
  const double threshold = *first_ok;
  TarAtFar out;
  out.threshold = threshold;
  out.far = static_cast<double>(count_at_least(imp, threshold)) / n_imp;
  out.tar = static_cast<double>(count_at_least(gen, threshold)) / static_cast<double>(gen.size());
  return out;
}

VerificationReport verification_report(std::span<const double> genuine, std::span<const double> impostor,
                                       std::span<const double> far_targets) {
  VerificationReport report;
  for (double far : far_targets) {
    const auto r = tar_at_far(genuine, impostor, far);
    report.far_targets.push_back(far);
    report.tar_at_far.push_back(r.tar);
    report.thresholds.push_back(r.threshold);
  }
  return report;
}

void pair_scores(std::span<const LabeledEmbedding> embeddings, std::span<const SamplePair> pairs,
                 std::vector<double>& genuine, std::vector<double>& impostor) {
  for (const auto& p : pairs) {
    const double score = cosine_similarity(embeddings[p.first].embedding, embeddings[p.second].embedding);
    (p.same_identity ? genuine : impostor).push_back(score);
  }
}

double rank1_identification(std::span<const LabeledEmbedding> probes, std::span<const LabeledEmbedding> gallery) {
  if (probes.empty() || gallery.empty()) throw InvalidArgument("rank-1 identification needs probes and a gallery");
  const auto unit_probes = unit_embeddings(probes);
  const auto unit_gallery = unit_embeddings(gallery);
  std::size_t correct = 0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      const double sim = dot(unit_probes[p], unit_gallery[g]);
      if (sim > best_sim) {
        best_sim = sim;
        best = g;
      }
    }
    if (gallery[best].label == probes[p].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probes.size());
}

std::vector<double> recall_at_k(std::span<const LabeledEmbedding> queries, std::span<const std::size_t> k_values) {
  if (queries.size() < 2) throw InvalidArgument("recall@k needs at least two items");
  for (std::size_t k : k_values) {
    if (k == 0) throw InvalidArgument("recall@k requires k >= 1");
  }
  std::map<std::size_t, std::size_t> label_counts;
  for (const auto& q : queries) ++label_counts[q.label];
  for (const auto& [label, count] : label_counts) {
    if (count < 2) throw InvalidArgument("label " + std::to_string(label) + " has no other instance for recall@k");
  }

  const auto unit = unit_embeddings(queries);
  const std::size_t n = queries.size();
  // rank[q]: position of the first same-label neighbour in q's ordering (similarity desc, index asc).
  std::vector<std::size_t> rank(n);
  std::vector<double> sims(n);
  for (std::size_t q = 0; q < n; ++q) {
    double best_sim = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      sims[j] = dot(unit[q], unit[j]);
      if (queries[j].label == queries[q].label && sims[j] > best_sim) {
        best_sim = sims[j];
        best_idx = j;
      }
    }
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      if (sims[j] > best_sim || (sims[j] == best_sim && j < best_idx)) ++ahead;
    }
    rank[q] = ahead;
  }
  std::vector<double> out;
  for (std::size_t k : k_values) {
    const auto hits = std::count_if(rank.begin(), rank.end(), [k](std::size_t r) { return r < k; });
    out.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  return out;
}

std::vector<LabeledEmbedding> embed_dataset(const MlpEncoder& enc, const LabeledDataset& dataset) {
  std::vector<LabeledEmbedding> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) out.push_back({embed(enc, s.features), s.label});
  return out;
}

std::vector<CompensationErrorRecord> measure_compensation_error(const MlpEncoder& enc, const Matrix& weights,
                                                                const BroadQueue& queue,
                                                                std::size_t latest_iteration,
                                                                std::size_t sample_size, std::uint64_t seed) {
  const auto& entries = queue.entries();
  std::vector<std::size_t> picks(entries.size());
  std::iota(picks.begin(), picks.end(), 0);
  if (sample_size < picks.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(sample_size);
    std::sort(picks.begin(), picks.end());
  }

  struct Sums {
    std::size_t count = 0;
    double uncompensated = 0.0;
    double compensated = 0.0;
  };
  std::map<std::size_t, Sums> by_age;
  for (std::size_t idx : picks) {
    const QueueEntry& entry = entries[idx];
    if (!entry.input) throw InvalidArgument("queue entry has no retained input; enable diagnostics");
    if (entry.iteration > latest_iteration) throw InvalidArgument("queue entry is newer than latest iteration");
    const Vector current = embed(enc, *entry.input);
    const CompensatedEmbedding comp = compensate(entry, weights, true);
    auto& sums = by_age[latest_iteration - entry.iteration];
    ++sums.count;
    sums.uncompensated += 1.0 - cosine_similarity(current, entry.embedding);
    sums.compensated += 1.0 - cosine_similarity(current, comp.e_star);
  }
  std::vector<CompensationErrorRecord> out;
  for (const auto& [age, sums] : by_age) {
    const double n = static_cast<double>(sums.count);
    out.push_back({age, sums.count, std::max(0.0, sums.uncompensated / n), std::max(0.0, sums.compensated / n)});
  }
  return out;
}

std::string format_real(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

MetricsCsv::MetricsCsv(std::string_view config_hash, std::uint64_t seed) {
  text_ = "# config_hash=" + std::string(config_hash) + ",seed=" + std::to_string(seed) + "\n";
  text_ += "metric,step,value,extra\n";
}

void MetricsCsv::add(std::string_view metric, std::size_t step, double value, std::string_view extra) {
  text_ += metric;
  text_ += ',';
  text_ += std::to_string(step);
  text_ += ',';
  text_ += format_real(value);
  text_ += ',';
  text_ += extra;
  text_ += '\n';
}

void MetricsCsv::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open metrics file for writing: " + path);
  out << text_;
  if (!out) throw Error("failed writing metrics file: " + path);
}

}  // namespace broadface
