#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library beyond the Tensor container.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sfagc/tensor.hpp"

namespace sfagc::oracle {

inline double dist2(const Tensor& m, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double d = m.at(i, c) - m.at(j, c);
    s += d * d;
  }
  return s;
}

/// Sorts every other node by (distance, index) and keeps the first k.
inline std::vector<std::size_t> knn(const Tensor& coords, std::size_t k) {
  const std::size_t n = coords.rows();
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<std::size_t> others;
    for (std::size_t u = 0; u < n; ++u) {
      if (u != v) others.push_back(u);
    }
    std::stable_sort(others.begin(), others.end(),
                     [&](std::size_t a, std::size_t b) { return dist2(coords, a, v) < dist2(coords, b, v); });
    out.insert(out.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

/// Greedy farthest point sampling that recomputes every selected/unselected
/// distance at each step.
inline std::vector<std::size_t> fps(const Tensor& coords, std::size_t t, std::size_t seed) {
  const std::size_t n = coords.rows();
  std::vector<std::size_t> chosen{seed};
  while (chosen.size() < t) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double m = INFINITY;
      for (auto s : chosen) m = std::min(m, dist2(coords, i, s));
      if (m > best_d) {
        best_d = m;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

/// Full stable sort of indices by descending score.
inline std::vector<std::size_t> topk(const std::vector<double>& scores, std::size_t t) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(t);
  return idx;
}

/// Filters all nodes by distance to each centroid, sorts, pads.
inline std::vector<std::size_t> ball(const Tensor& coords, const std::vector<std::size_t>& centroids, double r,
                                     std::size_t cap) {
  std::vector<std::size_t> out;
  for (auto c : centroids) {
    std::vector<std::size_t> in;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      if (i != c && std::sqrt(dist2(coords, i, c)) <= r) in.push_back(i);
    }
    std::stable_sort(in.begin(), in.end(),
                     [&](std::size_t a, std::size_t b) { return dist2(coords, a, c) < dist2(coords, b, c); });
    std::vector<std::size_t> group{c};
    for (auto i : in) {
      if (group.size() == cap) break;
      group.push_back(i);
    }
    while (group.size() < cap) group.push_back(c);
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

using Vec = std::vector<double>;

/// Row r of a rank-2 tensor.
inline Vec row(const Tensor& m, std::size_t r) {
  Vec out(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) out[c] = m.at(r, c);
  return out;
}

/// W·x for W stored [out × in].
inline Vec matvec(const Tensor& w, const Vec& x) {
  Vec out(w.rows(), 0.0);
  for (std::size_t o = 0; o < w.rows(); ++o) {
    for (std::size_t i = 0; i < x.size(); ++i) out[o] += w.at(o, i) * x[i];
  }
  return out;
}

inline Vec leaky(Vec x, double slope = 0.2) {
  for (auto& v : x) v = v > 0 ? v : slope * v;
  return x;
}

inline Vec cat(std::initializer_list<Vec> parts) {
  Vec out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline Vec minus(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace sfagc::oracle
