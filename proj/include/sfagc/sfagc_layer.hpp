#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "sfagc/graph.hpp"
#include "sfagc/nn.hpp"
#include "sfagc/structure.hpp"

namespace sfagc {

enum class CoordUpdate { Mlp, Identity };

/// Which parts of the convolution are active. The default is the full layer;
/// the ablation variants each switch one part off.
struct AblationFlags {
  bool use_structure = true;
  bool use_position = true;
  bool use_dot = true;
  bool use_sub = true;

  bool operator==(const AblationFlags&) const = default;
};

struct SfagcConfig {
  std::size_t coord_in = 3;
  std::size_t feat_in = 3;
  std::size_t coord_out = 3;  // forced to coord_in in identity mode
  std::size_t feat_out = 64;
  std::size_t k = 20;
  std::size_t att_dim = 0;   // width of a₁, p_u and the values; 0 → feat_out
  std::size_t head_dim = 0;  // output width of W_a1; 0 → att_dim
  CoordUpdate coord_update = CoordUpdate::Mlp;
  AblationFlags flags;
  bool bias = false;
  double slope = ops::kDefaultLeakySlope;

  std::size_t hidden() const { return feat_out; }
  std::size_t att() const { return att_dim ? att_dim : feat_out; }
  std::size_t head() const { return head_dim ? head_dim : att(); }
  std::size_t coord_out_dim() const { return coord_update == CoordUpdate::Identity ? coord_in : coord_out; }

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

/// Learnable maps of one layer. Every map exists regardless of the ablation
/// flags so that all variants share a parameter layout.
struct SfagcParams {
  SfagcParams() = default;
  SfagcParams(ParamStore& store, const std::string& prefix, const SfagcConfig& cfg, std::mt19937_64& rng);

  SfagcConfig cfg;
  StructureParams structure;
  Dense pos1, pos2;      // W_P1, W_P2
  Dense query1, key1;    // W_q1, W_k1
  Dense query2, key2;    // W_q2, W_k2
  Dense lift;            // W_c
  Dense head1, head2;    // W_a1, W_a2
  Dense value;           // W_v
  Dense update;          // W
  Dense coord1, coord2;  // coordinate MLP, Mlp mode only
};

struct LayerOutput {
  Tensor feats;   // h″, N × feat_out
  Tensor coords;  // co′, N × coord_out
};

/// p_u = W_P2·σ(W_P1·(co_u − co_v)) for each edge offset row of `sv`.
Tensor position_embedding(Context& ctx, const Tensor& sv, const Dense& w_p1, const Dense& w_p2,
                          double slope = ops::kDefaultLeakySlope);

/// qk_vu = a₁ + W_c·a₂ + p_u per edge, with a₁ = W_q1·h′_v − W_k1·h′_u and
/// a₂ = (W_q2·h′_v)·(W_k2·h′_u). Terms switched off by the flags are omitted;
/// `position` may be null when the position term is off.
Tensor attention_logits(Context& ctx, const Tensor& h_prime, const KnnGraph& graph, const Tensor* position,
                        const SfagcParams& params);

/// Softmax over each node's k edges of W_a2·σ(W_a1·qk) / sqrt(head width).
Tensor attention_weights(Context& ctx, const Tensor& qk, std::size_t k, const Dense& w_a1, const Dense& w_a2,
                         double slope = ops::kDefaultLeakySlope);

/// h̃_v = Σ_u at_vu·(W_v·h′_u + p_u); `position` may be null.
Tensor weighted_sum_aggregate(Context& ctx, const Tensor& weights, const Tensor& h_prime, const KnnGraph& graph,
                              const Tensor* position, const Dense& w_v);

/// h″_v = σ(W·cat(h_v, co_v, h̃_v)).
Tensor update_features(Context& ctx, const Tensor& h, const Tensor& co, const Tensor& h_tilde, const Dense& w,
                       double slope = ops::kDefaultLeakySlope);

/// co′ = MLP(co) in Mlp mode, co unchanged in Identity mode.
Tensor update_coordinates(Context& ctx, const Tensor& co, const SfagcParams& params);

struct LayerTrace {
  KnnGraph graph;
  StructureTrace structure;
  Tensor h_prime, position, qk, weights, h_tilde;
};

/// One SFAGC convolution: k-NN graph on the input coordinates, structure pass
/// to h′, attention pass to h″, coordinate update.
LayerOutput sfagc_forward(Context& ctx, const PointSet& points, const SfagcParams& params,
                          LayerTrace* trace = nullptr);
/// Same, over a caller-supplied graph.
LayerOutput sfagc_forward(Context& ctx, const PointSet& points, const KnnGraph& graph, const SfagcParams& params,
                          LayerTrace* trace = nullptr);

}  // namespace sfagc
