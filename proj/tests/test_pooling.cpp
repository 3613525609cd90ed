#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sfagc/pooling.hpp"
#include "test_util.hpp"

using namespace sfagc;
using sfagc::testing::expect_tensor_near;
using sfagc::testing::random_tensor;
namespace orc = sfagc::oracle;

namespace {

PoolConfig pool_config(PoolKind kind, std::size_t c, std::size_t d, std::size_t f, std::size_t t, std::size_t k) {
  PoolConfig cfg;
  cfg.kind = kind;
  cfg.t = t;
  cfg.branch.coord_in = c;
  cfg.branch.feat_in = d;
  cfg.branch.coord_out = c;
  cfg.branch.feat_out = f;
  cfg.branch.k = k;
  return cfg;
}

struct Pool {
  std::mt19937_64 rng;
  ParamStore store;
  PoolParams params;
  PointSet points;

  Pool(const PoolConfig& cfg, std::size_t n, std::uint64_t seed = 41) : rng(seed) {
    params = PoolParams(store, "P.", cfg, rng);
    points = PointSet(random_tensor({n, cfg.branch.coord_in}, rng), random_tensor({n, cfg.branch.feat_in}, rng));
  }
};

std::vector<double> softmax_oracle(const std::vector<double>& x) {
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(x[i] - m);
  for (auto& v : out) v /= z;
  return out;
}

}  // namespace

TEST(NodeScores, Examples) {
  std::mt19937_64 rng(1);
  ParamStore store;
  Dense w(store, "W_1", 4, 1, false, rng);
  Context ctx;
  auto same = node_scores(ctx, Tensor::full({5, 4}, 0.3), w);
  for (double s : same.values()) EXPECT_NEAR(s, 0.2, 1e-15);
  auto single = node_scores(ctx, random_tensor({1, 4}, rng), w);
  EXPECT_EQ(single[0], 1.0);
  auto h = random_tensor({9, 4}, rng);
  auto got = node_scores(ctx, h, w);
  std::vector<double> logits;
  for (std::size_t v = 0; v < 9; ++v) logits.push_back(orc::matvec(w.weight().value, orc::row(h, v))[0]);
  auto want = softmax_oracle(logits);
  for (std::size_t v = 0; v < 9; ++v) EXPECT_NEAR(got[v], want[v], 1e-15);
}

TEST(ScorePool, KeepsAllNodesInScoreOrder) {
  Pool p(pool_config(PoolKind::Score, 3, 4, 6, 10, 3), 10);
  Context ctx;
  auto out = score_based_pool(ctx, p.points, p.params);
  ASSERT_EQ(out.index.size(), 10u);
  EXPECT_EQ(std::set<std::size_t>(out.index.begin(), out.index.end()).size(), 10u);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_GE(out.scores[out.index[i - 1]], out.scores[out.index[i]]);
}

TEST(ScorePool, IdenticalFeaturesKeepLeadingIndices) {
  auto cfg = pool_config(PoolKind::Score, 3, 4, 6, 4, 3);
  Pool p(cfg, 10);
  p.points.feats = Tensor::full({10, 4}, 0.5);
  Context ctx;
  auto out = score_based_pool(ctx, p.points, p.params);
  EXPECT_EQ(out.index, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(ScorePool, RejectsTAboveN) {
  Pool p(pool_config(PoolKind::Score, 3, 4, 6, 11, 3), 10);
  Context ctx;
  EXPECT_THROW(score_based_pool(ctx, p.points, p.params), std::invalid_argument);
}

TEST(ScorePool, MatchesBranchComposition) {
  for (bool from_feats : {false, true}) {
    auto cfg = pool_config(PoolKind::Score, from_feats ? 4 : 3, 4, 6, 5, 3);
    cfg.coords_from_feats = from_feats;
    Pool p(cfg, 12);
    Context ctx;
    auto out = score_based_pool(ctx, p.points, p.params);

    std::vector<double> logits;
    for (std::size_t v = 0; v < 12; ++v) {
      logits.push_back(orc::matvec(p.params.score.weight().value, orc::row(p.points.feats, v))[0]);
    }
    auto scores = softmax_oracle(logits);
    auto idx = orc::topk(scores, 5);
    EXPECT_EQ(out.index, idx);
    PointSet branch_in = from_feats ? PointSet(p.points.feats, p.points.feats) : p.points;
    auto branch = sfagc_forward(ctx, branch_in, p.params.branch);
    for (std::size_t i = 0; i < 5; ++i) {
      auto hv = orc::row(p.points.feats, idx[i]);
      for (auto& x : hv) x *= scores[idx[i]];
      auto want = orc::leaky(orc::matvec(p.params.merge.weight().value, orc::cat({hv, orc::row(branch.feats, idx[i])})));
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out.points.feats.at(i, c), want[c], 1e-12);
      for (std::size_t c = 0; c < branch.coords.cols(); ++c) {
        EXPECT_EQ(out.points.coords.at(i, c), branch.coords.at(idx[i], c));
      }
    }
  }
}

TEST(FpsPool, FullSelectionAndCollinearExample) {
  auto cfg = pool_config(PoolKind::Fps, 1, 2, 4, 3, 1);
  Pool p(cfg, 3);
  p.points.coords = Tensor::matrix({{0.0}, {1.0}, {10.0}});
  Context ctx;
  auto all = fps_based_pool(ctx, p.points, p.params);
  EXPECT_EQ(std::set<std::size_t>(all.index.begin(), all.index.end()).size(), 3u);
  auto branch = sfagc_forward(ctx, p.points, p.params.branch);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(all.points.feats.at(i, c), branch.feats.at(all.index[i], c));
  }
  p.params.cfg.t = 2;
  auto two = fps_based_pool(ctx, p.points, p.params);
  EXPECT_EQ(two.index, (std::vector<std::size_t>{0, 2}));
}

TEST(FpsPool, MatchesBranchComposition) {
  auto cfg = pool_config(PoolKind::Fps, 3, 4, 6, 5, 3);
  cfg.fps_start = FpsStart::MaxNorm;
  Pool p(cfg, 12);
  Context ctx;
  auto out = fps_based_pool(ctx, p.points, p.params);
  std::size_t start = 0;
  double best = -1.0;
  for (std::size_t v = 0; v < 12; ++v) {
    auto r = orc::row(p.points.coords, v);
    if (orc::dot(r, r) > best) {
      best = orc::dot(r, r);
      start = v;
    }
  }
  auto idx = orc::fps(p.points.coords, 5, start);
  EXPECT_EQ(out.index, idx);
  auto branch = sfagc_forward(ctx, p.points, p.params.branch);
  expect_tensor_near(out.points.feats, ops::gather_rows(branch.feats, idx), 0.0);
  expect_tensor_near(out.points.coords, ops::gather_rows(branch.coords, idx), 0.0);
}

TEST(Pooling, GradientsMatchFiniteDifferences) {
  for (auto kind : {PoolKind::Score, PoolKind::Fps}) {
    auto cfg = pool_config(kind, 3, 4, 6, 5, 4);
    cfg.branch.coord_out = 5;
    Pool p(cfg, 12);
    auto report = check_gradients(p.store, [&](Context& ctx) {
      auto out = graph_pool(ctx, p.points, p.params);
      return ops::concat({ops::reshape(out.points.feats, {out.points.feats.size()}),
                          ops::reshape(out.points.coords, {out.points.coords.size()})},
                         0);
    });
    if (kind == PoolKind::Score) {
      EXPECT_TRUE(p.store.contains("P.W_1"));
      EXPECT_TRUE(p.store.contains("P.W_pl"));
    }
    EXPECT_TRUE(report.pass()) << report.table();
  }
}

TEST(Interpolation, SingleSourceAndCopyRule) {
  auto src = Tensor::matrix({{0.0, 0.0, 0.0}});
  auto feats = Tensor::matrix({{1.5, -2.0}});
  auto dst = Tensor::matrix({{1, 1, 1}, {0.3, 0, 0}});
  Context ctx;
  auto out = feature_propagation(ctx, src, feats, dst, nullptr, nullptr);
  expect_tensor_near(out, Tensor::matrix({{1.5, -2.0}, {1.5, -2.0}}), 0.0);

  auto src3 = Tensor::matrix({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  auto f3 = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}, {7, 8}});
  auto on = feature_propagation(ctx, src3, f3, Tensor::matrix({{0, 1, 0}}), nullptr, nullptr);
  expect_tensor_near(on, Tensor::matrix({{5, 6}}), 0.0);
}

TEST(Interpolation, MatchesInverseDistanceFormula) {
  std::mt19937_64 rng(3);
  auto src = random_tensor({10, 3}, rng);
  auto feats = random_tensor({10, 4}, rng);
  auto dst = random_tensor({6, 3}, rng);
  Context ctx;
  auto out = feature_propagation(ctx, src, feats, dst, nullptr, nullptr);
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < 10; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += (src.at(j, c) - dst.at(i, c)) * (src.at(j, c) - dst.at(i, c));
      d.emplace_back(std::sqrt(s), j);
    }
    std::sort(d.begin(), d.end());
    double total = 0.0;
    for (int j = 0; j < 3; ++j) total += 1.0 / (d[j].first * d[j].first);
    for (std::size_t c = 0; c < 4; ++c) {
      double want = 0.0;
      double lo = INFINITY, hi = -INFINITY;
      for (int j = 0; j < 3; ++j) {
        want += feats.at(d[j].second, c) / (d[j].first * d[j].first) / total;
        lo = std::min(lo, feats.at(d[j].second, c));
        hi = std::max(hi, feats.at(d[j].second, c));
      }
      EXPECT_NEAR(out.at(i, c), want, 1e-12);
      EXPECT_GE(out.at(i, c), lo - 1e-12);
      EXPECT_LE(out.at(i, c), hi + 1e-12);
    }
  }
  auto iw = interpolation_weights(src, dst);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_GE(iw.weights[i * 3 + j], 0.0);
      s += iw.weights[i * 3 + j];
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Interpolation, SkipAndMap) {
  std::mt19937_64 rng(4);
  ParamStore store;
  Dense map(store, "fp", 2 + 3, 4, false, rng);
  auto src = random_tensor({5, 3}, rng);
  auto feats = random_tensor({5, 2}, rng);
  auto dst = random_tensor({7, 3}, rng);
  auto skip = random_tensor({7, 3}, rng);
  Context ctx;
  auto plain = feature_propagation(ctx, src, feats, dst, nullptr, nullptr);
  auto out = feature_propagation(ctx, src, feats, dst, &skip, &map);
  ASSERT_EQ(out.shape(), (Shape{7, 4}));
  for (std::size_t i = 0; i < 7; ++i) {
    auto want = orc::leaky(orc::matvec(map.weight().value, orc::cat({orc::row(plain, i), orc::row(skip, i)})));
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at(i, c), want[c], 1e-14);
  }
  auto report = check_gradients(store, [&](Context& c) { return feature_propagation(c, src, feats, dst, &skip, &map); });
  EXPECT_TRUE(report.pass()) << report.table();
}

TEST(SetAbstraction, HugeRadiusShape) {
  std::mt19937_64 rng(5);
  SetAbstractionConfig cfg;
  cfg.centroids = 6;
  cfg.scales = {{100.0, 8, {4, 5}}, {100.0, 6, {3}}};
  ParamStore store;
  SetAbstractionParams params(store, "sa.", cfg, rng);
  EXPECT_EQ(params.out_dim(), 8u);
  Context ctx;
  auto out = set_abstraction_msg(ctx, random_tensor({6, 3}, rng), params);
  EXPECT_EQ(out.points.feats.shape(), (Shape{6, 8}));
  EXPECT_EQ(out.points.coords.shape(), (Shape{6, 3}));
  cfg.centroids = 7;
  SetAbstractionParams too_many(store, "sb.", cfg, rng);
  EXPECT_THROW(set_abstraction_msg(ctx, random_tensor({6, 3}, rng), too_many), std::invalid_argument);
}

TEST(SetAbstraction, IsolatedCentroidGivesMapOfZeroOffset) {
  std::mt19937_64 rng(6);
  SetAbstractionConfig cfg;
  cfg.centroids = 2;
  cfg.scales = {{0.1, 4, {3}}};
  ParamStore store;
  SetAbstractionParams params(store, "sa.", cfg, rng);
  Context ctx;
  auto out = set_abstraction_msg(ctx, Tensor::matrix({{0, 0, 0}, {5, 5, 5}, {5.05, 5, 5}}), params);
  // Centroid 0 is alone: its group is four copies of a zero offset.
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.points.feats.at(0, c), 0.0);
}

TEST(SetAbstraction, MatchesNaiveGrouping) {
  std::mt19937_64 rng(7);
  SetAbstractionConfig cfg;
  cfg.centroids = 8;
  cfg.scales = {{0.5, 4, {5, 6}}, {0.9, 7, {4}}};
  ParamStore store;
  SetAbstractionParams params(store, "sa.", cfg, rng);
  auto xyz = random_tensor({30, 3}, rng);
  Context ctx;
  auto out = set_abstraction_msg(ctx, xyz, params);
  auto cent = orc::fps(xyz, 8, 0);
  EXPECT_EQ(out.centroids, cent);
  std::size_t col = 0;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& sc = cfg.scales[s];
    auto groups = orc::ball(xyz, cent, sc.radius, sc.group);
    const std::size_t w = sc.widths.back();
    for (std::size_t g = 0; g < 8; ++g) {
      std::vector<double> mx(w, -INFINITY);
      for (std::size_t m = 0; m < sc.group; ++m) {
        auto x = orc::minus(orc::row(xyz, groups[g * sc.group + m]), orc::row(xyz, cent[g]));
        for (const auto& layer : params.maps[s]) x = orc::leaky(orc::matvec(layer.weight().value, x));
        for (std::size_t c = 0; c < w; ++c) mx[c] = std::max(mx[c], x[c]);
      }
      for (std::size_t c = 0; c < w; ++c) EXPECT_NEAR(out.points.feats.at(g, col + c), mx[c], 1e-14);
    }
    col += w;
  }
}

TEST(SetAbstraction, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  SetAbstractionConfig cfg;
  cfg.centroids = 5;
  cfg.scales = {{0.6, 4, {4, 5}}, {1.0, 6, {3}}};
  ParamStore store;
  SetAbstractionParams params(store, "sa.", cfg, rng);
  auto xyz = random_tensor({14, 3}, rng);
  auto report = check_gradients(store, [&](Context& ctx) { return set_abstraction_msg(ctx, xyz, params).points.feats; });
  EXPECT_TRUE(report.pass()) << report.table();
}
