#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfagc/ops.hpp"
#include "sfagc/tensor.hpp"

namespace sfagc {

/// A named learnable tensor. The optimizer replaces `value` in place.
struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered, name-addressable parameter collection. References handed out by
/// create() stay valid for the lifetime of the store.
class ParamStore {
 public:
  /// Weight initialized uniformly in ±sqrt(1/fan_in), fan_in = last extent.
  Parameter& create(const std::string& name, Shape shape, std::mt19937_64& rng);
  Parameter& create_zeros(const std::string& name, Shape shape);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

 private:
  Parameter& insert(Parameter p);
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-forward state: the tape (absent during inference), the mode flag that
/// gates dropout, and the RNG used for dropout masks.
class Context {
 public:
  Context() = default;
  explicit Context(Tape& tape) : tape_(&tape) {}

  /// The parameter's value, watched on the tape when one is attached.
  Tensor param(const Parameter& p);
  /// Gradient accumulated for p by the last backward; zeros if p was unused.
  Tensor grad(const Parameter& p) const;

  Tape* tape() const { return tape_; }
  bool training = false;
  std::mt19937_64* rng = nullptr;

 private:
  Tape* tape_ = nullptr;
  std::unordered_map<const Parameter*, Tensor> leaves_;
};

/// y = x·Wᵀ (+ b when the bias was requested at construction).
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
        std::mt19937_64& rng);

  Tensor operator()(Context& ctx, const Tensor& x) const;
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  const Parameter& weight() const { return *w_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t in_ = 0, out_ = 0;
};

/// Inverted dropout; identity unless ctx.training and rate > 0.
Tensor dropout(Context& ctx, const Tensor& x, double rate);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update; returns the new parameter value.
Tensor adam_step(const Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

/// Adam over every parameter of a store, in store order.
class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg);
  /// grads[i] belongs to the i-th parameter of the store.
  void step(const std::vector<Tensor>& grads);
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  ParamStore* store_;
  AdamConfig cfg_;
  std::vector<AdamState> states_;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

inline constexpr char kCheckpointMagic[] = "SFAGC01";

/// Container: magic "SFAGC01", then per tensor the name length, name bytes,
/// rank and extents as little-endian u64, values as little-endian f64.
void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

void save_parameters(const std::string& path, const ParamStore& store);
/// Copies checkpoint values into the store. Throws std::runtime_error naming
/// every missing, unexpected, or differently shaped tensor.
void load_parameters(const std::string& path, ParamStore& store);

}  // namespace sfagc
