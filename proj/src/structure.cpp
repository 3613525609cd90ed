#include "sfagc/structure.hpp"

namespace sfagc {

StructureParams::StructureParams(ParamStore& store, const std::string& prefix, const StructureConfig& c,
                                 std::mt19937_64& rng)
    : cfg(c),
      base(store, prefix + "W_b", c.coord_dim, c.coord_dim, c.bias, rng),
      relational(store, prefix + "W_re", c.coord_dim, c.re_dim(), c.bias, rng),
      encoding(store, prefix + "W_se", c.coord_dim + c.re_dim(), c.se_dim(), c.bias, rng),
      fusing(store, prefix + "W_s", c.feat_dim + c.s_dim(), c.out_dim, c.bias, rng) {}

Tensor structure_vectors(const Tensor& coords, const KnnGraph& graph) {
  const auto centers = graph.centers();
  return ops::sub(ops::gather_rows(coords, graph.neighbors), ops::gather_rows(coords, centers));
}

Tensor base_structure_vector(Context& ctx, const Tensor& sv, std::size_t k, const Dense& w_b, double slope) {
  if (sv.rows() == 0 || k == 0) throw std::invalid_argument("base_structure_vector: empty neighborhood");
  return ops::group_reduce(ops::leaky_relu(w_b(ctx, sv), slope), k, ops::Reduce::Mean);
}

Tensor feature_angle(const Tensor& sv, const Tensor& sv_b_per_edge) { return ops::row_cosine(sv, sv_b_per_edge, 1e-12); }

Tensor feature_distance(const Tensor& co_u, const Tensor& co_v) {
  if (co_u.cols() != co_v.cols()) throw DimensionError("feature_distance: coordinate widths differ");
  return ops::abs(ops::sub(co_u, co_v));
}

Tensor relational_embedding(Context& ctx, const Tensor& sv, const Dense& w_re, double slope) {
  return ops::leaky_relu(w_re(ctx, sv), slope);
}

Tensor structure_encoding(Context& ctx, const Tensor& fd, const Tensor& re, const Dense& w_se, double slope) {
  auto fr = ops::concat({fd, re}, 1);
  return ops::concat({fr, ops::leaky_relu(w_se(ctx, fr), slope)}, 1);
}

Tensor projection_aggregate(const Tensor& fa, const Tensor& s, std::size_t k) {
  return ops::group_reduce(ops::scale_rows(s, fa), k, ops::Reduce::Sum);
}

Tensor fuse_structure(Context& ctx, const Tensor& h, const Tensor& af, const Dense& w_s, double slope) {
  return ops::leaky_relu(w_s(ctx, ops::concat({h, af}, 1)), slope);
}

Tensor structure_pass(Context& ctx, const Tensor& coords, const Tensor& feats, const KnnGraph& graph,
                      const StructureParams& params, StructureTrace* trace) {
  const auto& cfg = params.cfg;
  if (coords.cols() != cfg.coord_dim || feats.cols() != cfg.feat_dim) {
    throw DimensionError("structure_pass: inputs " + shape_string(coords.shape()) + "/" +
                         shape_string(feats.shape()) + " do not match layer widths C=" +
                         std::to_string(cfg.coord_dim) + " D=" + std::to_string(cfg.feat_dim));
  }
  const auto centers = graph.centers();
  const std::size_t k = graph.k;

  Tensor sv = structure_vectors(coords, graph);
  Tensor sv_b = base_structure_vector(ctx, sv, k, params.base, cfg.slope);
  Tensor fa = feature_angle(sv, ops::gather_rows(sv_b, centers));
  // |co_u − co_v| is |sv_uv|.
  Tensor fd = ops::abs(sv);
  Tensor re = relational_embedding(ctx, sv, params.relational, cfg.slope);
  Tensor s = structure_encoding(ctx, fd, re, params.encoding, cfg.slope);
  Tensor af = projection_aggregate(fa, s, k);
  Tensor h_prime = fuse_structure(ctx, feats, af, params.fusing, cfg.slope);
  if (trace) *trace = StructureTrace{sv, sv_b, fa, fd, re, s, af};
  return h_prime;
}

}  // namespace sfagc
