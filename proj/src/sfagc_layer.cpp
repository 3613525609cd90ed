#include "sfagc/sfagc_layer.hpp"

#include <cmath>
#include <stdexcept>

namespace sfagc {

void SfagcConfig::validate() const {
  if (coord_in == 0 || feat_in == 0 || feat_out == 0) throw std::invalid_argument("sfagc: widths must be positive");
  if (coord_update == CoordUpdate::Mlp && coord_out == 0) throw std::invalid_argument("sfagc: coord_out must be positive");
  if (coord_update == CoordUpdate::Identity && coord_out != 0 && coord_out != coord_in) {
    throw std::invalid_argument("sfagc: identity coordinate update needs coord_out == coord_in (" +
                                std::to_string(coord_out) + " != " + std::to_string(coord_in) + ")");
  }
  if (k == 0) throw std::invalid_argument("sfagc: k must be positive");
  if (!flags.use_dot && !flags.use_sub) {
    throw std::invalid_argument("sfagc: at least one of the dot and subtraction attention functions must be on");
  }
}

SfagcParams::SfagcParams(ParamStore& store, const std::string& prefix, const SfagcConfig& c, std::mt19937_64& rng)
    : cfg(c) {
  cfg.validate();
  const std::size_t C = c.coord_in, D = c.feat_in, H = c.hidden(), A = c.att();
  StructureConfig sc;
  sc.coord_dim = C;
  sc.feat_dim = D;
  sc.out_dim = H;
  sc.bias = c.bias;
  sc.slope = c.slope;
  structure = StructureParams(store, prefix, sc, rng);
  pos1 = Dense(store, prefix + "W_P1", C, A, c.bias, rng);
  pos2 = Dense(store, prefix + "W_P2", A, A, c.bias, rng);
  query1 = Dense(store, prefix + "W_q1", H, A, c.bias, rng);
  key1 = Dense(store, prefix + "W_k1", H, A, c.bias, rng);
  query2 = Dense(store, prefix + "W_q2", H, A, c.bias, rng);
  key2 = Dense(store, prefix + "W_k2", H, A, c.bias, rng);
  lift = Dense(store, prefix + "W_c", 1, A, c.bias, rng);
  head1 = Dense(store, prefix + "W_a1", A, c.head(), c.bias, rng);
  head2 = Dense(store, prefix + "W_a2", c.head(), 1, c.bias, rng);
  value = Dense(store, prefix + "W_v", H, A, c.bias, rng);
  update = Dense(store, prefix + "W", D + C + A, c.feat_out, c.bias, rng);
  if (c.coord_update == CoordUpdate::Mlp) {
    coord1 = Dense(store, prefix + "coord_mlp.0", C, c.coord_out, c.bias, rng);
    coord2 = Dense(store, prefix + "coord_mlp.1", c.coord_out, c.coord_out, c.bias, rng);
  }
}

Tensor position_embedding(Context& ctx, const Tensor& sv, const Dense& w_p1, const Dense& w_p2, double slope) {
  return w_p2(ctx, ops::leaky_relu(w_p1(ctx, sv), slope));
}

Tensor attention_logits(Context& ctx, const Tensor& h_prime, const KnnGraph& graph, const Tensor* position,
                        const SfagcParams& params) {
  const auto& flags = params.cfg.flags;
  if (!flags.use_dot && !flags.use_sub) throw std::invalid_argument("attention_logits: both attention functions are off");
  const auto centers = graph.centers();
  const auto& nbrs = graph.neighbors;
  Tensor qk;
  bool have = false;
  auto accumulate = [&](const Tensor& term) {
    qk = have ? ops::add(qk, term) : term;
    have = true;
  };
  if (flags.use_sub) {
    // Maps are row-wise, so W·h′ is evaluated per node and then gathered.
    auto q = params.query1(ctx, h_prime);
    auto k = params.key1(ctx, h_prime);
    accumulate(ops::sub(ops::gather_rows(q, centers), ops::gather_rows(k, nbrs)));
  }
  if (flags.use_dot) {
    auto q = params.query2(ctx, h_prime);
    auto k = params.key2(ctx, h_prime);
    auto a2 = ops::row_dot(ops::gather_rows(q, centers), ops::gather_rows(k, nbrs));
    accumulate(params.lift(ctx, a2));
  }
  if (flags.use_position) {
    if (!position) throw std::invalid_argument("attention_logits: position term is on but no embedding given");
    accumulate(*position);
  }
  return qk;
}

Tensor attention_weights(Context& ctx, const Tensor& qk, std::size_t k, const Dense& w_a1, const Dense& w_a2,
                         double slope) {
  if (k == 0 || qk.rows() == 0) throw std::invalid_argument("attention_weights: empty neighborhood");
  auto logits = w_a2(ctx, ops::leaky_relu(w_a1(ctx, qk), slope));
  return ops::group_softmax(logits, k, std::sqrt(static_cast<double>(w_a1.out())));
}

Tensor weighted_sum_aggregate(Context& ctx, const Tensor& weights, const Tensor& h_prime, const KnnGraph& graph,
                              const Tensor* position, const Dense& w_v) {
  auto values = ops::gather_rows(w_v(ctx, h_prime), graph.neighbors);
  if (position) values = ops::add(values, *position);
  return ops::group_reduce(ops::scale_rows(values, weights), graph.k, ops::Reduce::Sum);
}

Tensor update_features(Context& ctx, const Tensor& h, const Tensor& co, const Tensor& h_tilde, const Dense& w,
                       double slope) {
  return ops::leaky_relu(w(ctx, ops::concat({h, co, h_tilde}, 1)), slope);
}

Tensor update_coordinates(Context& ctx, const Tensor& co, const SfagcParams& params) {
  if (params.cfg.coord_update == CoordUpdate::Identity) return co;
  return params.coord2(ctx, ops::leaky_relu(params.coord1(ctx, co), params.cfg.slope));
}

LayerOutput sfagc_forward(Context& ctx, const PointSet& points, const SfagcParams& params, LayerTrace* trace) {
  const auto graph = build_knn_graph(points.coords, params.cfg.k);
  return sfagc_forward(ctx, points, graph, params, trace);
}

LayerOutput sfagc_forward(Context& ctx, const PointSet& points, const KnnGraph& graph, const SfagcParams& params,
                          LayerTrace* trace) {
  const auto& cfg = params.cfg;
  const auto& flags = cfg.flags;
  if (points.coord_dim() != cfg.coord_in || points.feat_dim() != cfg.feat_in) {
    throw DimensionError("sfagc_forward: input widths C=" + std::to_string(points.coord_dim()) +
                         " D=" + std::to_string(points.feat_dim()) + " but layer expects C=" +
                         std::to_string(cfg.coord_in) + " D=" + std::to_string(cfg.feat_in));
  }
  if (graph.nodes() != points.size()) throw DimensionError("sfagc_forward: graph does not match point count");

  const Tensor& co = points.coords;
  const Tensor& h = points.feats;

  StructureTrace st;
  Tensor h_prime;
  if (flags.use_structure) {
    h_prime = structure_pass(ctx, co, h, graph, params.structure, trace ? &st : nullptr);
  } else {
    // Structure term removed: af ≡ 0, so only W_s's feature columns act.
    auto zeros = Tensor::zeros(Shape{points.size(), params.structure.cfg.s_dim()});
    h_prime = fuse_structure(ctx, h, zeros, params.structure.fusing, cfg.slope);
  }

  Tensor position;
  if (flags.use_position) {
    position = position_embedding(ctx, structure_vectors(co, graph), params.pos1, params.pos2, cfg.slope);
  }
  const Tensor* pos = flags.use_position ? &position : nullptr;
  Tensor qk = attention_logits(ctx, h_prime, graph, pos, params);
  Tensor weights = attention_weights(ctx, qk, graph.k, params.head1, params.head2, cfg.slope);
  Tensor h_tilde = weighted_sum_aggregate(ctx, weights, h_prime, graph, pos, params.value);
  Tensor h_out = update_features(ctx, h, co, h_tilde, params.update, cfg.slope);
  Tensor co_out = update_coordinates(ctx, co, params);

  if (trace) {
    trace->graph = graph;
    trace->structure = st;
    trace->h_prime = h_prime;
    trace->position = position;
    trace->qk = qk;
    trace->weights = weights;
    trace->h_tilde = h_tilde;
  }
  return {h_out, co_out};
}

}  // namespace sfagc
