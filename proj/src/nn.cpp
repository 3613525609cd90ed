#include "sfagc/nn.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sfagc {

Parameter& ParamStore::insert(Parameter p) {
  if (index_.count(p.name)) throw std::invalid_argument("duplicate parameter name: " + p.name);
  index_.emplace(p.name, params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParamStore::create(const std::string& name, Shape shape, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(shape.back()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return insert(Parameter{name, Tensor(std::move(shape), std::move(values))});
}

Parameter& ParamStore::create_zeros(const std::string& name, Shape shape) {
  return insert(Parameter{name, Tensor::zeros(std::move(shape))});
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Tensor Context::param(const Parameter& p) {
  if (!tape_) return p.value;
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return it->second;
  auto leaf = tape_->watch(p.value);
  leaves_.emplace(&p, leaf);
  return leaf;
}

Tensor Context::grad(const Parameter& p) const {
  auto it = leaves_.find(&p);
  if (!tape_ || it == leaves_.end()) return Tensor::zeros(p.value.shape());
  return tape_->grad(it->second);
}

Dense::Dense(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
             std::mt19937_64& rng)
    : in_(in), out_(out) {
  w_ = &store.create(name, Shape{out, in}, rng);
  if (bias) b_ = &store.create_zeros(name + ".bias", Shape{out});
}

Tensor Dense::operator()(Context& ctx, const Tensor& x) const {
  auto y = ops::linear(x, ctx.param(*w_));
  if (b_) y = ops::add(y, ctx.param(*b_));
  return y;
}

Tensor dropout(Context& ctx, const Tensor& x, double rate) {
  if (!ctx.training || rate <= 0.0) return x;
  if (!ctx.rng) throw std::logic_error("dropout in training mode needs an RNG");
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = keep(*ctx.rng) ? 1.0 / (1.0 - rate) : 0.0;
  return ops::mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor adam_step(const Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
  if (param.shape() != grad.shape()) {
    throw DimensionError("adam: gradient " + shape_string(grad.shape()) + " for parameter " +
                         shape_string(param.shape()));
  }
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  const std::size_t n = param.size();
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n) throw DimensionError("adam: state does not match parameter size");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto p = param.values();
  const auto g = grad.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    out[i] = p[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  return Tensor(param.shape(), std::move(out));
}

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(&store), cfg_(cfg), states_(store.size()) {}

void Adam::step(const std::vector<Tensor>& grads) {
  auto params = store_->all();
  if (grads.size() != params.size()) throw DimensionError("adam: gradient count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = adam_step(params[i]->value, grads[i], states_[i], cfg_);
  }
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw std::runtime_error("checkpoint truncated while reading " + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  for (const auto& t : tensors) {
    put_u64(os, t.name.size());
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u64(os, t.value.rank());
    for (auto e : t.value.shape()) put_u64(os, e);
    for (double v : t.value.values()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw std::runtime_error("error writing checkpoint " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::string(magic, kMagicLen) != kCheckpointMagic) {
    throw std::runtime_error(path + ": not an SFAGC01 checkpoint");
  }
  std::vector<NamedTensor> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    const auto len = get_u64(is, "name length");
    if (len > (1u << 20)) throw std::runtime_error("checkpoint name length out of range");
    std::string name(len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("checkpoint truncated in name");
    const auto rank = get_u64(is, "rank of " + name);
    if (rank == 0 || rank > 8) throw std::runtime_error("checkpoint rank out of range for " + name);
    Shape shape(rank);
    for (auto& e : shape) e = get_u64(is, "extent of " + name);
    const auto n = shape_size(shape);
    if (n > (std::size_t{1} << 32)) throw std::runtime_error("checkpoint tensor too large: " + name);
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(get_u64(is, "values of " + name));
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return out;
}

void save_parameters(const std::string& path, const ParamStore& store) {
  std::vector<NamedTensor> tensors;
  for (const auto* p : store.all()) tensors.push_back({p->name, p->value});
  save_checkpoint(path, tensors);
}

void load_parameters(const std::string& path, ParamStore& store) {
  const auto tensors = load_checkpoint(path);
  std::ostringstream problems;
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) by_name.emplace(t.name, &t.value);
  for (auto* p : store.all()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      problems << "  missing " << p->name << " " << shape_string(p->value.shape()) << "\n";
    } else if (it->second->shape() != p->value.shape()) {
      problems << "  width mismatch " << p->name << ": model " << shape_string(p->value.shape())
               << ", checkpoint " << shape_string(it->second->shape()) << "\n";
    }
  }
  for (const auto& t : tensors) {
    if (!store.contains(t.name)) problems << "  unexpected " << t.name << " " << shape_string(t.value.shape()) << "\n";
  }
  if (!problems.str().empty()) {
    throw std::runtime_error("checkpoint " + path + " is incompatible with the model:\n" + problems.str());
  }
  for (auto* p : store.all()) p->value = *by_name.at(p->name);
}

}  // namespace sfagc
