#include "sfagc/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfagc {

PoolParams::PoolParams(ParamStore& store, const std::string& prefix, const PoolConfig& c, std::mt19937_64& rng)
    : cfg(c) {
  if (c.coords_from_feats && c.branch.coord_in != c.branch.feat_in) {
    throw std::invalid_argument("pool " + prefix + ": coordinates taken from features need coord_in == feat_in");
  }
  if (c.t == 0) throw std::invalid_argument("pool " + prefix + ": t must be positive");
  if (c.kind == PoolKind::Score) {
    score = Dense(store, prefix + "W_1", c.branch.feat_in, 1, c.bias, rng);
    merge = Dense(store, prefix + "W_pl", c.branch.feat_in + c.branch.feat_out, c.branch.feat_out, c.bias, rng);
  }
  branch = SfagcParams(store, prefix + "sfagc.", c.branch, rng);
}

std::size_t PoolParams::out_dim() const { return cfg.branch.feat_out; }

Tensor node_scores(Context& ctx, const Tensor& feats, const Dense& w_1) {
  return ops::reshape(ops::softmax(w_1(ctx, feats)), Shape{feats.rows(), 1});
}

namespace {

PointSet branch_input(const PointSet& points, const PoolConfig& cfg) {
  if (cfg.coords_from_feats) return PointSet(points.feats, points.feats);
  return points;
}

void check_t(const PointSet& points, std::size_t t) {
  if (t < 1 || t > points.size()) {
    throw std::invalid_argument("graph pool: t=" + std::to_string(t) + " outside [1, " +
                                std::to_string(points.size()) + "]");
  }
}

}  // namespace

PooledSet score_based_pool(Context& ctx, const PointSet& points, const PoolParams& params) {
  if (params.cfg.kind != PoolKind::Score) throw std::invalid_argument("score_based_pool: pool has no scoring branch");
  check_t(points, params.cfg.t);
  Tensor scores = node_scores(ctx, points.feats, params.score);
  auto idx = rank_topk(scores.values(), params.cfg.t);
  Tensor integrated = ops::scale_rows(points.feats, scores);
  auto branch = sfagc_forward(ctx, branch_input(points, params.cfg), params.branch);
  Tensor merged = ops::leaky_relu(
      params.merge(ctx, ops::concat({ops::gather_rows(integrated, idx), ops::gather_rows(branch.feats, idx)}, 1)),
      params.cfg.slope);
  return {PointSet(ops::gather_rows(branch.coords, idx), merged), std::move(idx), scores};
}

PooledSet fps_based_pool(Context& ctx, const PointSet& points, const PoolParams& params) {
  check_t(points, params.cfg.t);
  const std::size_t start = params.cfg.fps_start == FpsStart::MaxNorm ? max_norm_index(points.coords) : 0;
  auto idx = fps_select(points.coords, params.cfg.t, start);
  auto branch = sfagc_forward(ctx, branch_input(points, params.cfg), params.branch);
  return {PointSet(ops::gather_rows(branch.coords, idx), ops::gather_rows(branch.feats, idx)), std::move(idx), {}};
}

PooledSet graph_pool(Context& ctx, const PointSet& points, const PoolParams& params) {
  return params.cfg.kind == PoolKind::Score ? score_based_pool(ctx, points, params)
                                            : fps_based_pool(ctx, points, params);
}

Interpolation interpolation_weights(const Tensor& src_xyz, const Tensor& dst_xyz, const InterpolationConfig& cfg) {
  const std::size_t ns = src_xyz.rows(), nd = dst_xyz.rows(), c = src_xyz.cols();
  if (src_xyz.size() == 0 || ns == 0) throw std::invalid_argument("feature_propagation: no source points");
  if (dst_xyz.cols() != c) throw DimensionError("feature_propagation: source and destination widths differ");
  if (cfg.neighbors == 0) throw std::invalid_argument("feature_propagation: need at least one neighbor");
  Interpolation out;
  out.per_point = std::min(cfg.neighbors, ns);
  out.index.reserve(nd * out.per_point);
  out.weights.reserve(nd * out.per_point);
  const auto sv = src_xyz.values();
  const auto dv = dst_xyz.values();
  std::vector<std::pair<double, std::size_t>> cand(ns);
  for (std::size_t i = 0; i < nd; ++i) {
    const auto d = dv.subspan(i * c, c);
    for (std::size_t j = 0; j < ns; ++j) cand[j] = {squared_distance(sv.subspan(j * c, c), d), j};
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(out.per_point), cand.end());
    const bool copy = std::sqrt(cand[0].first) < cfg.copy_distance;
    double total = 0.0;
    std::vector<double> w(out.per_point);
    for (std::size_t j = 0; j < out.per_point; ++j) {
      if (copy) {
        w[j] = j == 0 ? 1.0 : 0.0;
      } else {
        w[j] = 1.0 / std::pow(std::sqrt(cand[j].first), cfg.power);
      }
      total += w[j];
    }
    for (std::size_t j = 0; j < out.per_point; ++j) {
      out.index.push_back(cand[j].second);
      out.weights.push_back(w[j] / total);
    }
  }
  return out;
}

Tensor feature_propagation(Context& ctx, const Tensor& src_xyz, const Tensor& src_feats, const Tensor& dst_xyz,
                           const Tensor* skip, const Dense* map, const InterpolationConfig& cfg, double slope) {
  if (src_feats.rows() != src_xyz.rows()) throw DimensionError("feature_propagation: source features/coords disagree");
  const auto interp = interpolation_weights(src_xyz, dst_xyz, cfg);
  Tensor weights(Shape{interp.weights.size(), 1}, interp.weights);
  Tensor out = ops::group_reduce(ops::scale_rows(ops::gather_rows(src_feats, interp.index), weights),
                                 interp.per_point, ops::Reduce::Sum);
  if (skip) {
    if (skip->rows() != dst_xyz.rows()) throw DimensionError("feature_propagation: skip features do not match destination");
    out = ops::concat({out, *skip}, 1);
  }
  if (map) out = ops::leaky_relu((*map)(ctx, out), slope);
  return out;
}

SetAbstractionParams::SetAbstractionParams(ParamStore& store, const std::string& prefix,
                                           const SetAbstractionConfig& c, std::mt19937_64& rng)
    : cfg(c) {
  if (c.scales.empty()) throw std::invalid_argument("set abstraction " + prefix + ": no scales");
  for (std::size_t s = 0; s < c.scales.size(); ++s) {
    const auto& sc = c.scales[s];
    if (sc.widths.empty()) throw std::invalid_argument("set abstraction " + prefix + ": scale without widths");
    std::vector<Dense> layers;
    std::size_t in = c.in_dim;
    for (std::size_t l = 0; l < sc.widths.size(); ++l) {
      layers.emplace_back(store, prefix + "scale" + std::to_string(s) + ".mlp" + std::to_string(l), in,
                          sc.widths[l], c.bias, rng);
      in = sc.widths[l];
    }
    maps.push_back(std::move(layers));
  }
}

std::size_t SetAbstractionParams::out_dim() const {
  std::size_t n = 0;
  for (const auto& sc : cfg.scales) n += sc.widths.back();
  return n;
}

SetAbstractionOutput set_abstraction_msg(Context& ctx, const Tensor& xyz, const SetAbstractionParams& params) {
  const auto& cfg = params.cfg;
  if (xyz.cols() != cfg.in_dim) throw DimensionError("set_abstraction: input width does not match");
  if (cfg.centroids < 1 || cfg.centroids > xyz.rows()) {
    throw std::invalid_argument("set_abstraction: S=" + std::to_string(cfg.centroids) + " exceeds N=" +
                                std::to_string(xyz.rows()));
  }
  const std::size_t start = cfg.fps_start == FpsStart::MaxNorm ? max_norm_index(xyz) : 0;
  auto centroids = fps_select(xyz, cfg.centroids, start);
  std::vector<Tensor> per_scale;
  for (std::size_t s = 0; s < cfg.scales.size(); ++s) {
    const auto& sc = cfg.scales[s];
    auto members = ball_query(xyz, centroids, sc.radius, sc.group);
    std::vector<std::size_t> owner(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) owner[i] = centroids[i / sc.group];
    Tensor x = ops::sub(ops::gather_rows(xyz, members), ops::gather_rows(xyz, owner));
    for (const auto& layer : params.maps[s]) x = ops::leaky_relu(layer(ctx, x), cfg.slope);
    per_scale.push_back(ops::group_reduce(x, sc.group, ops::Reduce::Max));
  }
  return {PointSet(ops::gather_rows(xyz, centroids), ops::concat(per_scale, 1)), std::move(centroids)};
}

}  // namespace sfagc
