#include "sfagc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace sfagc {

PointSet::PointSet(Tensor c, Tensor f) : coords(std::move(c)), feats(std::move(f)) {
  if (coords.rank() != 2 || feats.rank() != 2) throw DimensionError("point set needs matrix coords and feats");
  if (coords.rows() != feats.rows()) {
    throw DimensionError("point set coords " + shape_string(coords.shape()) + " and feats " +
                         shape_string(feats.shape()) + " disagree on N");
  }
}

PointSet PointSet::from_coords(Tensor coords) {
  Tensor feats = coords;
  return PointSet(std::move(coords), std::move(feats));
}

std::vector<std::size_t> KnnGraph::centers() const {
  std::vector<std::size_t> out(neighbors.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = e / k;
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    d += x * x;
  }
  return d;
}

namespace {

std::span<const double> row(const Tensor& m, std::size_t i) {
  const std::size_t c = m.cols();
  return m.values().subspan(i * c, c);
}

}  // namespace

KnnGraph build_knn_graph(const Tensor& coords, std::size_t k) {
  const std::size_t n = coords.rows();
  if (k < 1 || k >= n) {
    throw std::invalid_argument("build_knn_graph: need 1 <= k < N, got k=" + std::to_string(k) +
                                " N=" + std::to_string(n));
  }
  KnnGraph g;
  g.k = k;
  g.neighbors.resize(n * k);
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    const auto cv = row(coords, v);
    std::size_t m = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (u != v) cand[m++] = {squared_distance(row(coords, u), cv), u};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t j = 0; j < k; ++j) g.neighbors[v * k + j] = cand[j].second;
  }
  return g;
}

std::vector<std::size_t> fps_select(const Tensor& coords, std::size_t t, std::size_t seed_index) {
  const std::size_t n = coords.rows();
  if (t < 1 || t > n) {
    throw std::invalid_argument("fps_select: need 1 <= t <= N, got t=" + std::to_string(t) + " N=" + std::to_string(n));
  }
  if (seed_index >= n) throw std::invalid_argument("fps_select: seed index out of range");
  std::vector<std::size_t> out;
  out.reserve(t);
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t cur = seed_index;
  for (std::size_t s = 0; s < t; ++s) {
    out.push_back(cur);
    taken[cur] = 1;
    const auto cc = row(coords, cur);
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      mind[i] = std::min(mind[i], squared_distance(row(coords, i), cc));
      if (mind[i] > best_d) {
        best_d = mind[i];
        best = i;
      }
    }
    cur = best;
  }
  return out;
}

std::size_t max_norm_index(const Tensor& coords) {
  const std::size_t n = coords.rows();
  std::size_t best = 0;
  double best_d = -1.0;
  std::vector<double> zero(coords.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = squared_distance(row(coords, i), zero);
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> rank_topk(std::span<const double> scores, std::size_t t) {
  if (t < 1 || t > scores.size()) {
    throw std::invalid_argument("rank_topk: need 1 <= t <= N, got t=" + std::to_string(t) +
                                " N=" + std::to_string(scores.size()));
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(t), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(t);
  return idx;
}

std::vector<std::size_t> ball_query(const Tensor& coords, std::span<const std::size_t> centroids, double radius,
                                    std::size_t cap) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be positive");
  if (cap < 1) throw std::invalid_argument("ball_query: group size must be at least 1");
  const std::size_t n = coords.rows();
  const double r2 = radius * radius;
  std::vector<std::size_t> out;
  out.reserve(centroids.size() * cap);
  std::vector<std::pair<double, std::size_t>> inside;
  for (auto c : centroids) {
    if (c >= n) throw std::out_of_range("ball_query: centroid index out of range");
    const auto cc = row(coords, c);
    inside.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c) continue;
      const double d = squared_distance(row(coords, i), cc);
      if (d <= r2) inside.emplace_back(d, i);
    }
    const std::size_t take = std::min(inside.size(), cap - 1);
    std::partial_sort(inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(take), inside.end());
    out.push_back(c);
    for (std::size_t j = 0; j < take; ++j) out.push_back(inside[j].second);
    for (std::size_t j = take + 1; j < cap; ++j) out.push_back(c);
  }
  return out;
}

}  // namespace sfagc
