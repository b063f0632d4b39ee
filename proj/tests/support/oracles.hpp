#pragma once

// Brute-force references used only by tests. Nothing here calls into the
// library code path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

/// Central difference of f around x[i].
template <typename F>
double central_difference(std::vector<double>& x, std::size_t i, F&& f, double h = 1e-6) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

/// Same error measure the acceptance gate uses: relative, with a floor of 1e-2.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-2});
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Normalized-softmax loss written out from its definition.
/// kind: 0 plain, 1 arcface, 2 cosface.
inline double softmax_margin_loss(const std::vector<double>& e, std::size_t y, const std::vector<std::vector<double>>& w,
                                  int kind, double m, double s) {
  std::vector<double> z(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) z[j] = s * cosine(e, w[j]);
  const double c = z[y] / s;
  if (kind == 1) {
    const double theta = std::acos(std::clamp(c, -1.0 + 1e-7, 1.0 - 1e-7));
    z[y] = theta + m <= M_PI ? s * std::cos(theta + m) : s * (c - m * std::sin(m));
  } else if (kind == 2) {
    z[y] = s * (c - m);
  }
  double sum = 0.0;
  for (double v : z) sum += std::exp(v);
  return std::log(sum) - z[y];
}

struct TarResult {
  double tar;
  double threshold;
};

/// Tries every candidate threshold (each score, and one value above all of them).
inline TarResult tar_at_far(const std::vector<double>& genuine, const std::vector<double>& impostor, double far) {
  std::vector<double> candidates = genuine;
  candidates.insert(candidates.end(), impostor.begin(), impostor.end());
  candidates.push_back(std::nextafter(*std::max_element(candidates.begin(), candidates.end()),
                                      std::numeric_limits<double>::infinity()));
  double best = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    std::size_t accepted = 0;
    for (double s : impostor) accepted += s >= t ? 1 : 0;
    if (static_cast<double>(accepted) / static_cast<double>(impostor.size()) <= far) best = std::min(best, t);
  }
  std::size_t hits = 0;
  for (double s : genuine) hits += s >= best ? 1 : 0;
  return {static_cast<double>(hits) / static_cast<double>(genuine.size()), best};
}

using Point = std::pair<std::vector<double>, std::size_t>;  // (embedding, label)

inline double rank1(const std::vector<Point>& probes, const std::vector<Point>& gallery) {
  std::size_t correct = 0;
  for (const auto& [e, label] : probes) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < gallery.size(); ++g) {
      if (cosine(e, gallery[g].first) > cosine(e, gallery[best].first)) best = g;
    }
    correct += gallery[best].second == label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(probes.size());
}

/// Full sort of every neighbour list (similarity desc, index asc).
inline double recall_at_k(const std::vector<Point>& items, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < items.size(); ++q) {
    std::vector<std::pair<double, std::size_t>> nbrs;
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (j != q) nbrs.emplace_back(cosine(items[q].first, items[j].first), j);
    }
    std::sort(nbrs.begin(), nbrs.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool hit = false;
    for (std::size_t r = 0; r < std::min(k, nbrs.size()); ++r) hit = hit || items[nbrs[r].second].second == items[q].second;
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

/// One of the 24 vectors (+-2,0,0,0) and (+-1,+-1,+-1,+-1) up to permutation,
/// scaled by 2^scale_pow. All of them have norm 2^(scale_pow+1), so cosines
/// between them are exact multiples of 1/4 in floating point and ties are real.
template <typename Rng>
std::vector<double> lattice_direction(Rng& rng, int scale_pow = 0) {
  std::uniform_int_distribution<int> pick(0, 23);
  const int k = pick(rng);
  std::vector<double> v(4, 0.0);
  if (k < 8) {
    v[static_cast<std::size_t>(k / 2)] = k % 2 == 0 ? 2.0 : -2.0;
  } else {
    for (int d = 0; d < 4; ++d) v[static_cast<std::size_t>(d)] = ((k - 8) >> d) & 1 ? -1.0 : 1.0;
  }
  for (double& x : v) x = std::ldexp(x, scale_pow);
  return v;
}

/// Rosenblatt perceptron on labels {0, 1}; returns true once an epoch makes no mistakes.
inline bool perceptron_separates(const std::vector<Point>& points, std::size_t max_epochs = 1000) {
  const std::size_t dim = points.front().first.size();
  std::vector<double> w(dim + 1, 0.0);
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    bool clean = true;
    for (const auto& [x, label] : points) {
      const double target = label == 1 ? 1.0 : -1.0;
      double act = w[dim];
      for (std::size_t d = 0; d < dim; ++d) act += w[d] * x[d];
      if (target * act <= 0.0) {
        clean = false;
        for (std::size_t d = 0; d < dim; ++d) w[d] += target * x[d];
        w[dim] += target;
      }
    }
    if (clean) return true;
  }
  return false;
}

}  // namespace oracle
