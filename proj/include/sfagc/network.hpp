#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sfagc/nn.hpp"
#include "sfagc/pooling.hpp"
#include "sfagc/sfagc_layer.hpp"

// Networks are ordered lists of named steps. Every step names the tensors it
// reads: "input" is the raw cloud, "<step>" a step's features and
// "<step>.coords" its coordinates. Features listed together are concatenated.
// Pooling and set abstraction open a coarser point level; a reference to a
// finer level is gathered down through the selected indices.

namespace sfagc {

enum class StepKind { Sfagc, PoolScore, PoolFps, SetAbstraction, Propagate, Head, SegHead };

struct StepSpec {
  StepKind kind = StepKind::Sfagc;
  std::string name;
  std::string coords;               // reference, or "feats" to reuse the features
  std::vector<std::string> feats;   // sfagc/pool/head inputs; fp sources
  std::string to;                   // fp: any reference at the destination level
  std::vector<std::string> skip;    // fp: destination-level features
  std::size_t k = 20;
  std::size_t t = 0;
  std::size_t co_out = 0;
  std::size_t f_out = 0;
  std::size_t centroids = 0;
  std::size_t hidden = 0;           // heads; 0 → NetworkSpec::head_hidden
  CoordUpdate coord = CoordUpdate::Mlp;
  std::vector<GroupScale> scales;   // sa
};

struct NetworkSpec {
  std::string task = "classify";  // classify | segment
  std::size_t classes = 0;        // K for classification, parts for segmentation
  double dropout = 0.3;
  std::size_t head_hidden = 256;
  FpsStart fps_start = FpsStart::MaxNorm;
  double slope = ops::kDefaultLeakySlope;
  AblationFlags flags;
  std::vector<StepSpec> steps;

  /// Parses "key = value" lines; "step = <kind> key=value ..." lines append
  /// steps in order. '#' starts a comment.
  static NetworkSpec parse(const std::string& text);
  std::string to_text() const;
};

/// Built-in specs: classify-full, classify-toy, segment-full, segment-toy.
NetworkSpec preset_spec(const std::string& name);
std::vector<std::string> preset_names();

/// Returns the spec with every SFAGC layer (including pool branches) switched
/// to the variant: full, nS, nP, ndot or nsub.
NetworkSpec ablation_variant(NetworkSpec spec, const std::string& variant);
AblationFlags ablation_flags(const std::string& variant);
std::vector<std::string> ablation_names();

/// Inferred widths of one step, [co_in, f_in, co_out, f_out].
struct StepWidths {
  std::string name;
  StepKind kind;
  std::size_t co_in = 0, f_in = 0, co_out = 0, f_out = 0;
};

struct NetworkOutput {
  /// Classification: one [K] logit row per head. Segmentation: one [N × parts].
  std::vector<Tensor> phase_logits;
  /// Sum of the phase logits.
  Tensor logits;
};

class Network {
 public:
  /// Validates the spec and creates all parameters from `seed`.
  Network(NetworkSpec spec, std::uint64_t seed);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  /// xyz: N × 3 cloud. Features start as the coordinates.
  NetworkOutput forward(Context& ctx, const Tensor& xyz) const;

  const NetworkSpec& spec() const { return spec_; }
  ParamStore& params() { return *store_; }
  const ParamStore& params() const { return *store_; }
  const std::vector<StepWidths>& widths() const { return widths_; }
  bool segmentation() const { return spec_.task == "segment"; }

 private:
  struct Impl;
  NetworkSpec spec_;
  std::unique_ptr<ParamStore> store_;
  std::vector<StepWidths> widths_;
  std::unique_ptr<Impl> impl_;
};

/// Σ_i CE(phase_i, label) for classification.
Tensor classification_loss(const NetworkOutput& out, std::size_t label);
/// Mean per-point cross entropy for segmentation.
Tensor segmentation_loss(const NetworkOutput& out, std::span<const std::size_t> labels);
/// Plain sum of phase losses.
Tensor hierarchical_loss(const std::vector<Tensor>& phase_losses);

std::size_t argmax(std::span<const double> row);
/// Row-wise argmax of an N × C tensor.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

}  // namespace sfagc
