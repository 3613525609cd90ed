#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sfagc/graph.hpp"
#include "sfagc/nn.hpp"
#include "sfagc/sfagc_layer.hpp"

namespace sfagc {

enum class PoolKind { Score, Fps };

/// Where farthest point sampling starts: node 0, or the node of largest norm
/// (independent of node order).
enum class FpsStart { First, MaxNorm };

struct PoolConfig {
  PoolKind kind = PoolKind::Score;
  std::size_t t = 1;
  /// Run the SFAGC branch with coordinates set to the input features.
  bool coords_from_feats = false;
  FpsStart fps_start = FpsStart::First;
  /// The branch layer; its coord_in/feat_in must match the pool input.
  SfagcConfig branch;
  bool bias = false;
  double slope = ops::kDefaultLeakySlope;
};

/// W_1 (scores) and W_pl (merge) exist for score-based pooling only.
struct PoolParams {
  PoolParams() = default;
  PoolParams(ParamStore& store, const std::string& prefix, const PoolConfig& cfg, std::mt19937_64& rng);

  PoolConfig cfg;
  Dense score;
  Dense merge;
  SfagcParams branch;
  std::size_t out_dim() const;
};

struct PooledSet {
  PointSet points;
  std::vector<std::size_t> index;  // idx_select, original node indices
  Tensor scores;                   // score-based pooling only
};

/// softmax over all nodes of W_1·h_v, [N × 1].
Tensor node_scores(Context& ctx, const Tensor& feats, const Dense& w_1);

/// Keeps the t highest-scoring nodes; merges score-weighted input features
/// with the SFAGC branch output through W_pl.
PooledSet score_based_pool(Context& ctx, const PointSet& points, const PoolParams& params);

/// Keeps t nodes chosen by farthest point sampling on the input coordinates;
/// outputs the SFAGC branch features and coordinates at those nodes.
PooledSet fps_based_pool(Context& ctx, const PointSet& points, const PoolParams& params);

PooledSet graph_pool(Context& ctx, const PointSet& points, const PoolParams& params);

struct InterpolationConfig {
  std::size_t neighbors = 3;
  double power = 2.0;
  double copy_distance = 1e-10;
};

/// Per destination, `neighbors` nearest sources and normalized inverse-distance
/// weights. Flat arrays of length dst·min(neighbors, src).
struct Interpolation {
  std::size_t per_point = 0;
  std::vector<std::size_t> index;
  std::vector<double> weights;
};
Interpolation interpolation_weights(const Tensor& src_xyz, const Tensor& dst_xyz, const InterpolationConfig& cfg = {});

/// Upsamples source features onto destination points, appends `skip`
/// (when non-null) and applies σ(map·x) when `map` is non-null.
Tensor feature_propagation(Context& ctx, const Tensor& src_xyz, const Tensor& src_feats, const Tensor& dst_xyz,
                           const Tensor* skip, const Dense* map, const InterpolationConfig& cfg = {},
                           double slope = ops::kDefaultLeakySlope);

struct GroupScale {
  double radius = 0.2;
  std::size_t group = 32;
  std::vector<std::size_t> widths;  // per-point map output widths
};

struct SetAbstractionConfig {
  std::size_t centroids = 512;  // S
  std::vector<GroupScale> scales;
  std::size_t in_dim = 3;
  FpsStart fps_start = FpsStart::First;
  bool bias = false;
  double slope = ops::kDefaultLeakySlope;
};

struct SetAbstractionParams {
  SetAbstractionParams() = default;
  SetAbstractionParams(ParamStore& store, const std::string& prefix, const SetAbstractionConfig& cfg,
                       std::mt19937_64& rng);
  SetAbstractionConfig cfg;
  std::vector<std::vector<Dense>> maps;  // per scale
  std::size_t out_dim() const;
};

struct SetAbstractionOutput {
  PointSet points;  // coords: centroid positions; feats: concatenated scale features
  std::vector<std::size_t> centroids;
};

/// Multi-scale grouping: FPS centroids, ball-query groups per scale, a
/// per-point map on offsets to the centroid, channel-wise max per group.
SetAbstractionOutput set_abstraction_msg(Context& ctx, const Tensor& xyz, const SetAbstractionParams& params);

}  // namespace sfagc
