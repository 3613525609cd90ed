#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sfagc/structure.hpp"
#include "test_util.hpp"

using namespace sfagc;
using sfagc::testing::expect_tensor_near;
using sfagc::testing::random_tensor;
namespace orc = sfagc::oracle;

namespace {

struct Fixture {
  std::mt19937_64 rng{21};
  ParamStore store;
  StructureParams params;
  Tensor coords, feats;
  KnnGraph graph;

  Fixture(std::size_t n, std::size_t k, std::size_t c, std::size_t d, std::size_t out) {
    StructureConfig cfg;
    cfg.coord_dim = c;
    cfg.feat_dim = d;
    cfg.out_dim = out;
    params = StructureParams(store, "s.", cfg, rng);
    coords = random_tensor({n, c}, rng);
    feats = random_tensor({n, d}, rng);
    graph = build_knn_graph(coords, k);
  }
};

}  // namespace

TEST(StructureVectors, Examples) {
  auto co = Tensor::matrix({{0, 0, 4}, {1, 2, 3}});
  KnnGraph g{1, {1, 0}};
  auto sv = structure_vectors(co, g);
  expect_tensor_near(sv, Tensor::matrix({{1, 2, -1}, {-1, -2, 1}}), 0.0);
}

TEST(StructureVectors, CoincidentNodesGiveZero) {
  auto co = Tensor::matrix({{0.5, 0.5}, {0.5, 0.5}});
  auto sv = structure_vectors(co, KnnGraph{1, {1, 0}});
  for (double v : sv.values()) EXPECT_EQ(v, 0.0);
}

TEST(BaseStructureVector, SingleAndIdenticalNeighbors) {
  std::mt19937_64 rng(3);
  ParamStore store;
  Dense w(store, "W_b", 3, 3, false, rng);
  Context ctx;
  auto one = Tensor::matrix({{0.3, -0.2, 0.9}});
  auto direct = orc::leaky(orc::matvec(w.weight().value, orc::row(one, 0)));
  expect_tensor_near(base_structure_vector(ctx, one, 1, w), Tensor(Shape{1, 3}, direct), 1e-15);
  auto same = Tensor::matrix({{0.3, -0.2, 0.9}, {0.3, -0.2, 0.9}, {0.3, -0.2, 0.9}});
  expect_tensor_near(base_structure_vector(ctx, same, 3, w), Tensor(Shape{1, 3}, direct), 1e-15);
  EXPECT_THROW(base_structure_vector(ctx, one, 0, w), std::invalid_argument);
}

TEST(BaseStructureVector, MatchesLoopOracle) {
  std::mt19937_64 rng(4);
  ParamStore store;
  Dense w(store, "W_b", 3, 3, false, rng);
  Context ctx;
  auto sv = random_tensor({8, 3}, rng);  // two nodes, four neighbors each
  auto got = base_structure_vector(ctx, sv, 4, w);
  for (std::size_t v = 0; v < 2; ++v) {
    orc::Vec acc(3, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      auto t = orc::leaky(orc::matvec(w.weight().value, orc::row(sv, v * 4 + j)));
      for (std::size_t c = 0; c < 3; ++c) acc[c] += t[c] / 4.0;
    }
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got.at(v, c), acc[c], 1e-14);
  }
}

TEST(FeatureAngle, Examples) {
  auto a = Tensor::matrix({{1, 2, 3}, {1, 2, 3}, {1, 0, 0}, {0, 0, 0}});
  auto b = Tensor::matrix({{1, 2, 3}, {-1, -2, -3}, {0, 5, 0}, {1, 1, 1}});
  auto fa = feature_angle(a, b);
  EXPECT_NEAR(fa[0], 1.0, 1e-15);
  EXPECT_NEAR(fa[1], -1.0, 1e-15);
  EXPECT_EQ(fa[2], 0.0);
  EXPECT_EQ(fa[3], 0.0);
}

TEST(FeatureAngle, BoundedOnRandomAndDegenerateInputs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mag(-30.0, 3.0);
  std::bernoulli_distribution zero(0.05);
  const std::size_t n = 2000;
  std::vector<double> a(n * 3), b(n * 3);
  for (std::size_t i = 0; i < n * 3; ++i) {
    a[i] = zero(rng) ? 0.0 : std::pow(10.0, mag(rng)) * (rng() % 2 ? 1 : -1);
    b[i] = i % 7 == 0 ? a[i] * 3.0 : std::pow(10.0, mag(rng)) * (rng() % 2 ? 1 : -1);
  }
  auto fa = feature_angle(Tensor({n, 3}, a), Tensor({n, 3}, b));
  for (double v : fa.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(FeatureDistance, Examples) {
  auto u = Tensor::matrix({{1, 2, 3}});
  auto v = Tensor::matrix({{0, 0, 4}});
  expect_tensor_near(feature_distance(u, v), Tensor::matrix({{1, 2, 1}}), 0.0);
  expect_tensor_near(feature_distance(v, u), Tensor::matrix({{1, 2, 1}}), 0.0);
  auto self = feature_distance(u, u);
  for (double x : self.values()) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(feature_distance(u, Tensor::matrix({{1, 2}})), DimensionError);
}

TEST(RelationalEmbedding, Examples) {
  std::mt19937_64 rng(5);
  ParamStore store;
  Dense w(store, "W_re", 3, 3, false, rng);
  Context ctx;
  auto zero = relational_embedding(ctx, Tensor::zeros({2, 3}), w);
  for (double x : zero.values()) EXPECT_EQ(x, 0.0);
  auto sv = random_tensor({5, 3}, rng);
  auto got = relational_embedding(ctx, sv, w);
  for (std::size_t e = 0; e < 5; ++e) {
    auto pre = orc::matvec(w.weight().value, orc::row(sv, e));
    auto want = orc::leaky(pre);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got.at(e, c), want[c], 1e-15);
  }
}

TEST(RelationalEmbedding, IdentityWeightGivesLeakyOfInput) {
  std::mt19937_64 rng(5);
  ParamStore store;
  Dense w(store, "W_re", 3, 3, false, rng);
  store.at("W_re").value = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  Context ctx;
  auto sv = Tensor::matrix({{1.0, -1.0, 0.5}});
  expect_tensor_near(relational_embedding(ctx, sv, w), Tensor::matrix({{1.0, -0.2, 0.5}}), 1e-15);
}

TEST(StructureEncoding, ShapeZerosAndComposition) {
  std::mt19937_64 rng(6);
  ParamStore store;
  Dense w(store, "W_se", 6, 3, false, rng);
  Context ctx;
  auto z = structure_encoding(ctx, Tensor::zeros({4, 3}), Tensor::zeros({4, 3}), w);
  EXPECT_EQ(z.shape(), (Shape{4, 9}));
  for (double x : z.values()) EXPECT_EQ(x, 0.0);

  auto fd = random_tensor({4, 3}, rng, 0.0, 1.0);
  auto re = random_tensor({4, 3}, rng);
  auto s = structure_encoding(ctx, fd, re, w);
  for (std::size_t e = 0; e < 4; ++e) {
    auto fr = orc::cat({orc::row(fd, e), orc::row(re, e)});
    auto want = orc::cat({fr, orc::leaky(orc::matvec(w.weight().value, fr))});
    for (std::size_t c = 0; c < 9; ++c) EXPECT_NEAR(s.at(e, c), want[c], 1e-15);
  }
}

TEST(ProjectionAggregate, Examples) {
  auto s = Tensor::matrix({{1, 2}, {3, 4}});
  auto zero = projection_aggregate(Tensor::zeros({2, 1}), s, 2);
  for (double x : zero.values()) EXPECT_EQ(x, 0.0);
  auto one = projection_aggregate(Tensor::full({1, 1}, 1.0), Tensor::matrix({{1, 2}}), 1);
  expect_tensor_near(one, Tensor::matrix({{1, 2}}), 0.0);
}

TEST(ProjectionAggregate, MatchesLoopOracleAndIsLinear) {
  std::mt19937_64 rng(7);
  auto fa = random_tensor({15, 1}, rng);
  auto s = random_tensor({15, 9}, rng);
  auto af = projection_aggregate(fa, s, 5);
  ASSERT_EQ(af.shape(), (Shape{3, 9}));
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t c = 0; c < 9; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 5; ++j) acc += fa[v * 5 + j] * s.at(v * 5 + j, c);
      EXPECT_NEAR(af.at(v, c), acc, 1e-14);
    }
  }
  // Scaling by a power of two is exact in floating point.
  auto af2 = projection_aggregate(fa, ops::scale(s, 4.0), 5);
  for (std::size_t i = 0; i < af.size(); ++i) EXPECT_EQ(af2[i], 4.0 * af[i]);
}

TEST(FuseStructure, ZerosShapeAndManual) {
  std::mt19937_64 rng(9);
  ParamStore store;
  Dense w(store, "W_s", 3 + 9, 16, false, rng);
  Context ctx;
  auto z = fuse_structure(ctx, Tensor::zeros({5, 3}), Tensor::zeros({5, 9}), w);
  EXPECT_EQ(z.shape(), (Shape{5, 16}));
  for (double x : z.values()) EXPECT_EQ(x, 0.0);
  auto h = random_tensor({5, 3}, rng);
  auto af = random_tensor({5, 9}, rng);
  auto got = fuse_structure(ctx, h, af, w);
  for (std::size_t v = 0; v < 5; ++v) {
    auto want = orc::leaky(orc::matvec(w.weight().value, orc::cat({orc::row(h, v), orc::row(af, v)})));
    for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(got.at(v, c), want[c], 1e-14);
  }
  EXPECT_THROW(fuse_structure(ctx, h, Tensor::zeros({5, 8}), w), DimensionError);
}

TEST(StructurePass, MatchesScalarOracle) {
  Fixture f(10, 3, 3, 4, 6);
  Context ctx;
  StructureTrace tr;
  auto hp = structure_pass(ctx, f.coords, f.feats, f.graph, f.params, &tr);
  const auto& Wb = f.params.base.weight().value;
  const auto& Wre = f.params.relational.weight().value;
  const auto& Wse = f.params.encoding.weight().value;
  const auto& Ws = f.params.fusing.weight().value;
  for (std::size_t v = 0; v < 10; ++v) {
    std::vector<orc::Vec> svs;
    orc::Vec svb(3, 0.0);
    for (auto u : f.graph.of(v)) {
      svs.push_back(orc::minus(orc::row(f.coords, u), orc::row(f.coords, v)));
      auto t = orc::leaky(orc::matvec(Wb, svs.back()));
      for (std::size_t c = 0; c < 3; ++c) svb[c] += t[c] / 3.0;
    }
    orc::Vec af(9, 0.0);
    for (const auto& sv : svs) {
      const double fa = orc::dot(sv, svb) / std::sqrt(orc::dot(sv, sv) * orc::dot(svb, svb));
      orc::Vec fd(3);
      for (std::size_t c = 0; c < 3; ++c) fd[c] = std::abs(sv[c]);
      auto re = orc::leaky(orc::matvec(Wre, sv));
      auto fr = orc::cat({fd, re});
      auto s = orc::cat({fr, orc::leaky(orc::matvec(Wse, fr))});
      for (std::size_t c = 0; c < 9; ++c) af[c] += fa * s[c];
    }
    auto want = orc::leaky(orc::matvec(Ws, orc::cat({orc::row(f.feats, v), af})));
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(hp.at(v, c), want[c], 1e-12);
    for (std::size_t c = 0; c < 9; ++c) EXPECT_NEAR(tr.af.at(v, c), af[c], 1e-12);
  }
  for (double x : tr.fa.values()) {
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
  }
  for (double x : tr.fd.values()) EXPECT_GE(x, 0.0);
}

TEST(StructurePass, NeighborOrderInvariance) {
  Fixture f(16, 5, 3, 3, 8);
  Context ctx;
  StructureTrace a, b;
  auto ha = structure_pass(ctx, f.coords, f.feats, f.graph, f.params, &a);
  auto shuffled = f.graph;
  std::mt19937_64 rng(1);
  for (std::size_t v = 0; v < 16; ++v) {
    auto first = shuffled.neighbors.begin() + static_cast<std::ptrdiff_t>(v * 5);
    std::shuffle(first, first + 5, rng);
  }
  auto hb = structure_pass(ctx, f.coords, f.feats, shuffled, f.params, &b);
  expect_tensor_near(a.sv_b, b.sv_b, 1e-12);
  expect_tensor_near(a.af, b.af, 1e-12);
  expect_tensor_near(ha, hb, 1e-12);
}

TEST(StructurePass, RejectsWrongWidths) {
  Fixture f(8, 3, 3, 3, 4);
  Context ctx;
  EXPECT_THROW(structure_pass(ctx, f.coords, Tensor::zeros({8, 5}), f.graph, f.params), DimensionError);
}

TEST(StructurePass, GradientsMatchFiniteDifferences) {
  Fixture f(12, 4, 3, 5, 8);
  auto report = check_gradients(f.store, [&](Context& ctx) {
    return structure_pass(ctx, f.coords, f.feats, f.graph, f.params);
  });
  EXPECT_EQ(report.rows.size(), 4u);
  EXPECT_TRUE(report.pass()) << report.table();
}
