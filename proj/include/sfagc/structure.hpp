#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "sfagc/graph.hpp"
#include "sfagc/nn.hpp"

// Local structure features of a node's neighborhood, computed in coordinate
// space over all k-NN edges at once. Edge e = v*k + j connects center v to its
// j-th neighbor u; per-edge tensors have one row per edge.

namespace sfagc {

struct StructureConfig {
  std::size_t coord_dim = 3;   // C
  std::size_t feat_dim = 3;    // D, width of h
  std::size_t out_dim = 64;    // width of h′
  std::size_t relational_dim = 0;  // 0 → C
  std::size_t encoding_dim = 0;    // 0 → C
  bool bias = false;
  double slope = ops::kDefaultLeakySlope;

  std::size_t re_dim() const { return relational_dim ? relational_dim : coord_dim; }
  std::size_t se_dim() const { return encoding_dim ? encoding_dim : coord_dim; }
  /// Width of s_uv = cat(fd, re, σ(W_se·cat(fd, re))).
  std::size_t s_dim() const { return coord_dim + re_dim() + se_dim(); }
};

/// W_b (base vector), W_re (relational embedding), W_se (structure
/// encoding), W_s (fusing).
struct StructureParams {
  StructureParams() = default;
  StructureParams(ParamStore& store, const std::string& prefix, const StructureConfig& cfg, std::mt19937_64& rng);

  StructureConfig cfg;
  Dense base;
  Dense relational;
  Dense encoding;
  Dense fusing;
};

/// sv_uv = co_u − co_v per edge, [E × C].
Tensor structure_vectors(const Tensor& coords, const KnnGraph& graph);

/// sv_b = mean over v's k edges of σ(W_b·sv_uv), [N × C].
Tensor base_structure_vector(Context& ctx, const Tensor& sv, std::size_t k, const Dense& w_b,
                             double slope = ops::kDefaultLeakySlope);

/// Cosine between each edge's sv_uv and its center's sv_b (one row per edge
/// in both); 0 when either vector has norm below 1e-12. [E × 1].
Tensor feature_angle(const Tensor& sv, const Tensor& sv_b_per_edge);

/// |co_u − co_v| elementwise.
Tensor feature_distance(const Tensor& co_u, const Tensor& co_v);

/// re_uv = σ(W_re·sv_uv).
Tensor relational_embedding(Context& ctx, const Tensor& sv, const Dense& w_re,
                            double slope = ops::kDefaultLeakySlope);

/// s_uv = cat(fd, re, σ(W_se·cat(fd, re))).
Tensor structure_encoding(Context& ctx, const Tensor& fd, const Tensor& re, const Dense& w_se,
                          double slope = ops::kDefaultLeakySlope);

/// af_v = Σ_u fa_uv · s_uv over each block of k edges, [N × dim(s)].
Tensor projection_aggregate(const Tensor& fa, const Tensor& s, std::size_t k);

/// h′_v = σ(W_s·cat(h_v, af_v)).
Tensor fuse_structure(Context& ctx, const Tensor& h, const Tensor& af, const Dense& w_s,
                      double slope = ops::kDefaultLeakySlope);

/// Intermediate values of one structure pass, for inspection and tests.
struct StructureTrace {
  Tensor sv, sv_b, fa, fd, re, s, af;
};

/// Full structure pass producing h′ for every node.
Tensor structure_pass(Context& ctx, const Tensor& coords, const Tensor& feats, const KnnGraph& graph,
                      const StructureParams& params, StructureTrace* trace = nullptr);

}  // namespace sfagc
