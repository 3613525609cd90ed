#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sfagc/nn.hpp"
#include "sfagc/tensor.hpp"

namespace sfagc {

/// Central differences (f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h for every element of θ.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta, double h = 1e-5);

/// Elementwise |a − b| / max(|a|, |b|, floor); the floor keeps entries that
/// are zero in both from dividing by zero.
inline constexpr double kRelErrFloor = 1e-6;
double max_relative_error(const Tensor& a, const Tensor& b, double floor = kRelErrFloor);

struct GradCheckRow {
  std::string name;
  std::size_t count = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double tolerance = 1e-4;
  bool pass() const;
  std::string table() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Test hook: when set, this parameter's autodiff gradient is perturbed
  /// before comparison.
  std::string corrupt;
};

/// Compares tape gradients of the scalar loss sum(output) against central
/// differences for every parameter in the store. `output` must be
/// deterministic in the parameters.
GradCheckReport check_gradients(ParamStore& store, const std::function<Tensor(Context&)>& output,
                                const GradCheckOptions& opts = {});

}  // namespace sfagc
