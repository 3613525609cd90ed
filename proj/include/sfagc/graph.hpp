#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sfagc/tensor.hpp"

namespace sfagc {

/// Graph signal: per node a coordinate row (N×C) and a feature row (N×D).
struct PointSet {
  Tensor coords;
  Tensor feats;

  PointSet() = default;
  PointSet(Tensor coords, Tensor feats);
  /// Features initialized to the coordinates.
  static PointSet from_coords(Tensor coords);

  std::size_t size() const { return coords.rows(); }
  std::size_t coord_dim() const { return coords.cols(); }
  std::size_t feat_dim() const { return feats.cols(); }
};

/// Fixed-degree directed neighborhood: node v's k neighbors are
/// neighbors[v*k .. v*k+k), nearest first.
struct KnnGraph {
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;

  std::size_t nodes() const { return k ? neighbors.size() / k : 0; }
  std::span<const std::size_t> of(std::size_t v) const { return {neighbors.data() + v * k, k}; }
  /// Edge e = v*k + j belongs to center v; returns v for every edge.
  std::vector<std::size_t> centers() const;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// k nearest nodes by Euclidean distance in `coords`, self excluded, ties
/// broken by lower index. Requires 1 ≤ k < N.
KnnGraph build_knn_graph(const Tensor& coords, std::size_t k);

/// Greedy farthest point sampling from `seed_index`; ties by lower index.
std::vector<std::size_t> fps_select(const Tensor& coords, std::size_t t, std::size_t seed_index = 0);

/// Index of the row with the largest norm (ties by lower index). Gives an FPS
/// start that does not depend on node order.
std::size_t max_norm_index(const Tensor& coords);

/// Indices of the t largest scores in descending order; ties by lower index.
std::vector<std::size_t> rank_topk(std::span<const double> scores, std::size_t t);

/// For each centroid: the centroid itself, then up to cap−1 other nodes within
/// `radius` by ascending distance (ties by index), padded with the centroid
/// index to exactly `cap` entries. Flat result of size centroids·cap.
std::vector<std::size_t> ball_query(const Tensor& coords, std::span<const std::size_t> centroids, double radius,
                                    std::size_t cap);

}  // namespace sfagc
