#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "sfagc/metrics.hpp"
#include "sfagc/network.hpp"
#include "test_util.hpp"

using namespace sfagc;
using sfagc::testing::random_tensor;

namespace {

Tensor cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensor({n, 3}, rng);
}

NetworkSpec preset(const std::string& name, std::size_t classes) {
  auto spec = preset_spec(name);
  spec.classes = classes;
  return spec;
}

const StepWidths& widths_of(const Network& net, const std::string& name) {
  for (const auto& w : net.widths()) {
    if (w.name == name) return w;
  }
  throw std::runtime_error("no step " + name);
}

void expect_widths(const Network& net, const std::string& name, std::array<std::size_t, 4> want) {
  const auto& w = widths_of(net, name);
  EXPECT_EQ(w.co_in, want[0]) << name;
  EXPECT_EQ(w.f_in, want[1]) << name;
  EXPECT_EQ(w.co_out, want[2]) << name;
  EXPECT_EQ(w.f_out, want[3]) << name;
}

const char* kSinglePhase = R"(task = classify
classes = 4
dropout = 0
head_hidden = 8
step = sfagc name=a coords=input feats=input k=4 co_out=4 f_out=6 coord=mlp
step = head name=h feats=a
)";

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(NetworkPresets, ClassifyFullMatchesReferenceWidths) {
  Network net(preset("classify-full", 40), 1);
  expect_widths(net, "p1a", {3, 3, 32, 64});
  expect_widths(net, "g1", {131, 131, 32, 64});
  expect_widths(net, "g2", {320, 320, 64, 128});
  expect_widths(net, "p3a", {64, 128, 128, 256});
  expect_widths(net, "p4a", {64, 128, 64, 128});
  expect_widths(net, "g3", {384, 384, 128, 128});
  expect_widths(net, "p5a", {128, 128, 128, 256});
}

TEST(NetworkPresets, SegmentFullMatchesReferenceWidths) {
  Network net(preset("segment-full", 4), 1);
  expect_widths(net, "g1", {3, 131, 3, 64});
  expect_widths(net, "p2a", {3, 64, 32, 64});
  expect_widths(net, "g2", {3, 320, 3, 128});
  expect_widths(net, "p3a", {3, 128, 128, 256});
  expect_widths(net, "f1", {3, 768, 3, 256});
  expect_widths(net, "f2", {3, 384, 3, 128});
}

TEST(NetworkPresets, ToySpecsStayDeskScale) {
  for (const auto* name : {"classify-toy", "segment-toy"}) {
    Network net(preset(name, 4), 1);
    for (const auto& w : net.widths()) {
      EXPECT_LE(w.f_out, 64u) << name << " " << w.name;
      EXPECT_LE(w.co_out, 64u) << name << " " << w.name;
    }
    for (const auto& s : net.spec().steps) {
      if (s.kind == StepKind::Sfagc || s.kind == StepKind::PoolScore || s.kind == StepKind::PoolFps) {
        EXPECT_EQ(s.k, 8u) << name << " " << s.name;
      }
    }
  }
}

TEST(NetworkPresets, UnknownNameThrows) { EXPECT_THROW(preset_spec("classify-huge"), std::invalid_argument); }

TEST(NetworkSpecText, RoundTripsEveryPreset) {
  for (const auto& name : preset_names()) {
    auto spec = preset(name, 5);
    auto again = NetworkSpec::parse(spec.to_text());
    EXPECT_EQ(again.to_text(), spec.to_text()) << name;
    Network a(spec, 3), b(again, 3);
    ASSERT_EQ(a.widths().size(), b.widths().size());
    for (std::size_t i = 0; i < a.widths().size(); ++i) EXPECT_EQ(a.widths()[i].f_out, b.widths()[i].f_out);
  }
}

TEST(NetworkSpecText, RejectsMalformedLines) {
  EXPECT_THROW(NetworkSpec::parse("task classify"), std::invalid_argument);
  EXPECT_THROW(NetworkSpec::parse("task = regress"), std::invalid_argument);
  EXPECT_THROW(NetworkSpec::parse("colour = red"), std::invalid_argument);
  EXPECT_THROW(NetworkSpec::parse("step = convolve name=a"), std::invalid_argument);
  EXPECT_THROW(NetworkSpec::parse("step = sfagc name=a k=-3"), std::invalid_argument);
  EXPECT_THROW(NetworkSpec::parse("step = sfagc name=a coord=spline"), std::invalid_argument);
}

TEST(NetworkConstruction, RejectsInconsistentSpecs) {
  auto spec = NetworkSpec::parse(kSinglePhase);
  auto bad = spec;
  bad.classes = 0;
  EXPECT_THROW(Network(bad, 1), std::invalid_argument);
  bad = spec;
  bad.steps.back().feats = {"missing"};
  EXPECT_THROW(Network(bad, 1), std::invalid_argument);
  bad = spec;
  bad.steps.pop_back();
  EXPECT_THROW(Network(bad, 1), std::invalid_argument);
  bad = spec;
  bad.steps[0].f_out = 0;
  EXPECT_THROW(Network(bad, 1), std::invalid_argument);
  bad = spec;
  bad.task = "segment";
  EXPECT_THROW(Network(bad, 1), std::invalid_argument);
}

TEST(NetworkForward, RejectsNonCloudInput) {
  Network net(NetworkSpec::parse(kSinglePhase), 1);
  Context ctx;
  EXPECT_THROW(net.forward(ctx, ops::reshape(cloud(10, 1), {30})), DimensionError);
  std::mt19937_64 rng(1);
  EXPECT_THROW(net.forward(ctx, random_tensor({10, 2}, rng)), DimensionError);
}

TEST(NetworkForward, TotalPredictionIsSumOfPhaseLogits) {
  Network net(preset("classify-toy", 4), 2);
  Context ctx;
  auto out = net.forward(ctx, cloud(64, 5));
  ASSERT_EQ(out.phase_logits.size(), 2u);
  ASSERT_EQ(out.logits.size(), 4u);
  for (const auto& p : out.phase_logits) ASSERT_EQ(p.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_DOUBLE_EQ(out.logits[c], out.phase_logits[0][c] + out.phase_logits[1][c]);
  }
}

TEST(NetworkForward, SinglePhaseTotalEqualsPhaseOne) {
  Network net(NetworkSpec::parse(kSinglePhase), 2);
  Context ctx;
  auto out = net.forward(ctx, cloud(12, 5));
  ASSERT_EQ(out.phase_logits.size(), 1u);
  EXPECT_EQ(to_vec(out.logits), to_vec(out.phase_logits[0]));
}

TEST(NetworkForward, SegmentationReturnsOneRowPerPoint) {
  Network net(preset("segment-toy", 3), 2);
  Context ctx;
  auto out = net.forward(ctx, cloud(128, 5));
  EXPECT_EQ(out.logits.shape(), (Shape{128, 3}));
}

TEST(NetworkForward, InferenceIsDeterministicAndTrainingDropoutIsSeeded) {
  Network net(preset("classify-toy", 4), 2);
  auto x = cloud(64, 9);
  Context a, b;
  EXPECT_EQ(to_vec(net.forward(a, x).logits), to_vec(net.forward(b, x).logits));
  std::mt19937_64 r1(4), r2(4);
  Context t1, t2;
  t1.training = t2.training = true;
  t1.rng = &r1;
  t2.rng = &r2;
  EXPECT_EQ(to_vec(net.forward(t1, x).logits), to_vec(net.forward(t2, x).logits));
}

TEST(NetworkForward, SegmentationCommutesWithPointPermutation) {
  Network net(preset("segment-toy", 3), 11);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const std::size_t n = 64;
    auto x = cloud(n, 100 + trial);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(trial);
    std::shuffle(perm.begin(), perm.end(), rng);
    Context ctx;
    auto base = net.forward(ctx, x).logits;
    auto moved = net.forward(ctx, ops::gather_rows(x, perm)).logits;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_NEAR(moved[i * 3 + c], base[perm[i] * 3 + c], 1e-9) << "trial " << trial << " row " << i;
      }
    }
  }
}

TEST(NetworkForward, ParametersAreSeeded) {
  Network a(preset("classify-toy", 4), 8), b(preset("classify-toy", 4), 8), c(preset("classify-toy", 4), 9);
  auto pa = a.params().all(), pb = b.params().all(), pc = c.params().all();
  ASSERT_EQ(pa.size(), pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(to_vec(pa[i]->value), to_vec(pb[i]->value));
    differs = differs || to_vec(pa[i]->value) != to_vec(pc[i]->value);
  }
  EXPECT_TRUE(differs);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  for (std::size_t k : {2u, 4u, 40u}) {
    EXPECT_NEAR(ops::cross_entropy(Tensor({1, k}, std::vector<double>(k, 0.7)), 1).item(), std::log(double(k)), 1e-12);
  }
}

TEST(CrossEntropy, ConfidentCorrectLogitApproachesZero) {
  auto l = ops::cross_entropy(Tensor({1, 3}, {50.0, 0.0, 0.0}), 0).item();
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 1e-20);
}

TEST(CrossEntropy, ClosedFormTwoClass) {
  EXPECT_NEAR(ops::cross_entropy(Tensor({1, 2}, {0.0, std::log(3.0)}), 1).item(), -std::log(0.75), 1e-12);
  EXPECT_NEAR(-std::log(0.75), 0.28768, 1e-5);
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  EXPECT_THROW(ops::cross_entropy(Tensor({1, 2}, {0.0, 1.0}), 2), std::out_of_range);
}

TEST(HierarchicalLoss, SumsPhasesInAnyOrder) {
  Tensor a({1}, {0.4}), b({1}, {1.5}), c({1}, {0.25});
  EXPECT_DOUBLE_EQ(hierarchical_loss({a}).item(), 0.4);
  EXPECT_DOUBLE_EQ(hierarchical_loss({b, b, b}).item(), 4.5);
  EXPECT_NEAR(hierarchical_loss({a, b, c}).item(), hierarchical_loss({c, a, b}).item(), 1e-15);
  EXPECT_THROW(hierarchical_loss({}), std::invalid_argument);
}

TEST(HierarchicalLoss, GradientIsSumOfPhaseGradients) {
  Network net(preset("classify-toy", 4), 3);
  auto x = cloud(64, 2);
  auto grads = [&](int which) {
    Tape tape;
    Context ctx(tape);
    auto out = net.forward(ctx, x);
    auto loss = which < 0 ? classification_loss(out, 2) : ops::cross_entropy(out.phase_logits[which], 2);
    tape.backward(loss);
    std::vector<std::vector<double>> g;
    for (auto* p : net.params().all()) g.push_back(to_vec(ctx.grad(*p)));
    return g;
  };
  auto total = grads(-1), g0 = grads(0), g1 = grads(1);
  for (std::size_t i = 0; i < total.size(); ++i) {
    for (std::size_t j = 0; j < total[i].size(); ++j) {
      EXPECT_NEAR(total[i][j], g0[i][j] + g1[i][j], 1e-10 * (1.0 + std::abs(total[i][j])));
    }
  }
}

TEST(HierarchicalLoss, MatchesFiniteDifferencesOnSmallNetwork) {
  auto spec = NetworkSpec::parse(R"(task = classify
classes = 3
dropout = 0
head_hidden = 6
step = sfagc name=a coords=input feats=input k=4 co_out=4 f_out=6 coord=mlp
step = head name=h1 feats=a
step = sfagc name=b coords=a.coords feats=a k=4 f_out=6 coord=identity
step = head name=h2 feats=b
)");
  Network net(spec, 14);
  auto x = cloud(12, 3);
  auto report = check_gradients(net.params(), [&](Context& ctx) { return classification_loss(net.forward(ctx, x), 1); });
  EXPECT_TRUE(report.pass()) << report.table();
}

TEST(Argmax, InvariantToConstantShiftOfEveryPhase) {
  Network net(preset("classify-toy", 4), 5);
  Context ctx;
  auto out = net.forward(ctx, cloud(64, 6));
  std::vector<double> shifted(4, 0.0);
  for (const auto& p : out.phase_logits) {
    for (std::size_t c = 0; c < 4; ++c) shifted[c] += p[c] + 123.0;
  }
  EXPECT_EQ(argmax(out.logits.values()), argmax(shifted));
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.9, 0.9}), 1u);
  EXPECT_EQ(argmax_rows(Tensor({2, 3}, {0, 1, 2, 5, 4, 3})), (std::vector<std::size_t>{2, 0}));
}

TEST(Training, OneSmallAdamStepDoesNotIncreaseLoss) {
  for (const auto* name : {"classify-toy", "segment-toy"}) {
    Network net(preset(name, 3), 6);
    const bool seg = net.segmentation();
    const std::size_t n = 64;
    auto x = cloud(n, 7);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = x[i * 3 + 2] > 0.0 ? 1 : 0;
    auto loss_of = [&](Context& ctx) {
      auto out = net.forward(ctx, x);
      return seg ? segmentation_loss(out, labels) : classification_loss(out, 2);
    };
    Tape tape;
    Context ctx(tape);
    auto before = loss_of(ctx);
    tape.backward(before);
    std::vector<Tensor> g;
    for (auto* p : net.params().all()) g.push_back(ctx.grad(*p));
    Adam adam(net.params(), AdamConfig{1e-4});
    adam.step(g);
    Context eval;
    EXPECT_LE(loss_of(eval).item(), before.item() + 1e-12) << name;
  }
}

TEST(Ablation, VariantsToggleExpectedFlags) {
  EXPECT_EQ(ablation_flags("full"), (AblationFlags{true, true, true, true}));
  EXPECT_EQ(ablation_flags("nS"), (AblationFlags{false, true, true, true}));
  EXPECT_EQ(ablation_flags("nP"), (AblationFlags{true, false, true, true}));
  EXPECT_EQ(ablation_flags("ndot"), (AblationFlags{true, true, false, true}));
  EXPECT_EQ(ablation_flags("nsub"), (AblationFlags{true, true, true, false}));
  EXPECT_THROW(ablation_flags("nX"), std::invalid_argument);
  auto spec = ablation_variant(preset("segment-toy", 2), "nsub");
  EXPECT_EQ(spec.flags, ablation_flags("nsub"));
  EXPECT_THROW(ablation_variant(spec, "none"), std::invalid_argument);
}

TEST(Ablation, NetworkVariantsZeroDisabledGradients) {
  const std::map<std::string, std::vector<std::string>> disabled = {
      {"nS", {"W_b", "W_re", "W_se"}}, {"nP", {"W_P1", "W_P2"}}, {"ndot", {"W_q2", "W_k2", "W_c"}}, {"nsub", {"W_q1", "W_k1"}}};
  for (const auto& [variant, suffixes] : disabled) {
    Network net(ablation_variant(preset("classify-toy", 4), variant), 3);
    Tape tape;
    Context ctx(tape);
    tape.backward(classification_loss(net.forward(ctx, cloud(64, 4)), 1));
    std::size_t checked = 0;
    for (const auto* p : net.params().all()) {
      for (const auto& suf : suffixes) {
        if (p->name.size() < suf.size() || p->name.compare(p->name.size() - suf.size(), suf.size(), suf) != 0) continue;
        ++checked;
        const auto grad = ctx.grad(*p);
        for (double g : grad.values()) EXPECT_EQ(g, 0.0) << variant << " " << p->name;
      }
    }
    // p1a, p1b, the pool branch, p2a, p2b.
    EXPECT_EQ(checked, 5 * suffixes.size()) << variant;
  }
}

TEST(Metrics, PerfectPredictions) {
  std::vector<std::size_t> y{0, 1, 2, 1};
  EXPECT_DOUBLE_EQ(overall_accuracy(y, y), 1.0);
  EXPECT_DOUBLE_EQ(mean_class_accuracy(y, y), 1.0);
  std::vector<std::size_t> parts{1, 2};
  std::vector<std::size_t> seg{1, 2, 2, 1};
  EXPECT_DOUBLE_EQ(shape_iou(seg, seg, parts), 1.0);
}

TEST(Metrics, AccuracyArithmetic) {
  std::vector<std::size_t> truth{0, 0, 0, 1}, pred{0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(overall_accuracy(pred, truth), 0.75);
  EXPECT_DOUBLE_EQ(mean_class_accuracy(pred, truth), 0.5);
  EXPECT_DOUBLE_EQ(overall_accuracy(pred, truth), overall_accuracy(pred, truth));
}

TEST(Metrics, ShapeIouSetArithmetic) {
  std::vector<std::size_t> truth{0, 0, 1, 1}, pred{0, 0, 0, 0};
  std::vector<std::size_t> parts{0, 1};
  // Oracle: IoU per part from explicit set counts.
  double iou_sum = 0.0;
  for (auto p : parts) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      inter += truth[i] == p && pred[i] == p;
      uni += truth[i] == p || pred[i] == p;
    }
    iou_sum += uni == 0 ? 1.0 : double(inter) / double(uni);
  }
  EXPECT_DOUBLE_EQ(shape_iou(pred, truth, parts), iou_sum / 2.0);
  EXPECT_DOUBLE_EQ(shape_iou(pred, truth, parts), 0.25);
  std::vector<std::size_t> three{0, 1, 2};
  EXPECT_DOUBLE_EQ(shape_iou(pred, truth, three), (0.5 + 0.0 + 1.0) / 3.0);
}

TEST(Metrics, EmptyOrMismatchedInputThrows) {
  std::vector<std::size_t> empty, one{0}, two{0, 1};
  EXPECT_THROW(overall_accuracy(empty, empty), std::invalid_argument);
  EXPECT_THROW(mean_class_accuracy(one, two), std::invalid_argument);
  EXPECT_THROW(shape_iou(empty, empty, two), std::invalid_argument);
}
