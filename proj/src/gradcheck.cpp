#include "sfagc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sfagc {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> base(theta.values().begin(), theta.values().end());
  std::vector<double> grad(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double fp = f(Tensor(theta.shape(), std::move(plus)));
    const double fm = f(Tensor(theta.shape(), std::move(minus)));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return Tensor(theta.shape(), std::move(grad));
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

bool GradCheckReport::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const GradCheckRow& r) { return r.pass; });
}

std::string GradCheckReport::table() const {
  std::ostringstream os;
  std::size_t w = 9;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  char line[512];
  std::snprintf(line, sizeof line, "%-*s %8s %14s %14s  %s\n", static_cast<int>(w), "parameter", "count",
                "max_rel_err", "max_abs_err", "result");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s %8zu %14.3e %14.3e  %s\n", static_cast<int>(w), r.name.c_str(), r.count,
                  r.max_rel_err, r.max_abs_err, r.pass ? "PASS" : "FAIL");
    os << line;
  }
  return os.str();
}

GradCheckReport check_gradients(ParamStore& store, const std::function<Tensor(Context&)>& output,
                                const GradCheckOptions& opts) {
  if (!(opts.step > 0.0)) throw std::invalid_argument("check_gradients: step must be positive");
  GradCheckReport report;
  report.tolerance = opts.tolerance;

  Tape tape;
  Context ctx(tape);
  const Tensor out = output(ctx);
  tape.backward(out.size() == 1 ? out : ops::sum(out));

  auto eval = [&]() {
    Context plain;
    return output(plain);
  };

  for (auto* p : store.all()) {
    Tensor analytic = ctx.grad(*p);
    if (p->name == opts.corrupt) {
      std::vector<double> g(analytic.values().begin(), analytic.values().end());
      g[0] += 1e-2 * (1.0 + std::abs(g[0]));
      analytic = Tensor(analytic.shape(), std::move(g));
    }
    const Tensor saved = p->value;
    std::vector<double> numeric(saved.size());
    for (std::size_t i = 0; i < saved.size(); ++i) {
      std::vector<double> plus(saved.values().begin(), saved.values().end());
      auto minus = plus;
      plus[i] += opts.step;
      minus[i] -= opts.step;
      p->value = Tensor(saved.shape(), std::move(plus));
      const Tensor fp = eval();
      p->value = Tensor(saved.shape(), std::move(minus));
      const Tensor fm = eval();
      // Differencing element by element before the sum avoids cancellation
      // at the scale of the total.
      double diff = 0.0;
      for (std::size_t j = 0; j < fp.size(); ++j) diff += fp[j] - fm[j];
      numeric[i] = diff / (2.0 * opts.step);
    }
    p->value = saved;

    GradCheckRow row;
    row.name = p->name;
    row.count = saved.size();
    const Tensor num(saved.shape(), std::move(numeric));
    row.max_rel_err = max_relative_error(analytic, num);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      row.max_abs_err = std::max(row.max_abs_err, std::abs(analytic[i] - num[i]));
    }
    row.pass = row.max_rel_err < opts.tolerance;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace sfagc
