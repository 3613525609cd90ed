#include "sfagc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sfagc::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tensor finish(Tape* tape, Shape shape, std::vector<double> values, Tape::BackwardFn fn) {
  if (tape) return tape->record(std::move(shape), std::move(values), std::move(fn));
  return Tensor(std::move(shape), std::move(values));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.values().data(), t.rows(), t.cols()); }

// Period with which b repeats over a under trailing-dim broadcasting.
std::size_t broadcast_period(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.size();
  if (b.size() == 1) return 1;
  const bool row_like = b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1);
  if (row_like && a.rank() == 2 && b.size() == a.cols()) return b.size();
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(b.shape()) + " onto " +
                       shape_string(a.shape()));
}

enum class Binary { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  const std::size_t period = broadcast_period(a, b, name);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i], y = bv[i % period];
    out[i] = kind == Binary::Add ? x + y : kind == Binary::Sub ? x - y : x * y;
  }
  Tape* tape = common_tape({&a, &b});
  return finish(tape, a.shape(), std::move(out), [a, b, period, kind](std::span<const double> g, Tape& t) {
    if (a.tracked()) {
      if (kind == Binary::Mul) {
        std::vector<double> ga(g.size());
        const auto bv = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * bv[i % period];
        t.accumulate(a, ga);
      } else {
        t.accumulate(a, g);
      }
    }
    if (b.tracked()) {
      std::vector<double> gb(period, 0.0);
      const auto av = a.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = kind == Binary::Add ? g[i] : kind == Binary::Sub ? -g[i] : g[i] * av[i];
        gb[i % period] += d;
      }
      t.accumulate(b, gb);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), n = b.cols();
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = as_matrix(a) * as_matrix(b);
  return finish(common_tape({&a, &b}), Shape{m, n}, std::move(out), [a, b](std::span<const double> g, Tape& t) {
    ConstMap gm(g.data(), a.rows(), b.cols());
    if (a.tracked()) {
      std::vector<double> ga(a.size());
      MutMap(ga.data(), a.rows(), a.cols()).noalias() = gm * as_matrix(b).transpose();
      t.accumulate(a, ga);
    }
    if (b.tracked()) {
      std::vector<double> gb(b.size());
      MutMap(gb.data(), b.rows(), b.cols()).noalias() = as_matrix(a).transpose() * gm;
      t.accumulate(b, gb);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  require_matrix(w, "linear");
  if (x.cols() != w.cols()) {
    throw DimensionError("linear: input width " + std::to_string(x.cols()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  const std::size_t m = x.rows(), n = w.rows();
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = as_matrix(x) * as_matrix(w).transpose();
  return finish(common_tape({&x, &w}), Shape{m, n}, std::move(out), [x, w](std::span<const double> g, Tape& t) {
    ConstMap gm(g.data(), x.rows(), w.rows());
    if (x.tracked()) {
      std::vector<double> gx(x.size());
      MutMap(gx.data(), x.rows(), x.cols()).noalias() = gm * as_matrix(w);
      t.accumulate(x, gx);
    }
    if (w.tracked()) {
      std::vector<double> gw(w.size());
      MutMap(gw.data(), w.rows(), w.cols()).noalias() = gm.transpose() * as_matrix(x);
      t.accumulate(w, gw);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return finish(common_tape({&a}), a.shape(), std::move(out), [a, factor](std::span<const double> g, Tape& t) {
    std::vector<double> ga(g.begin(), g.end());
    for (auto& v : ga) v *= factor;
    t.accumulate(a, ga);
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= v >= 0.0 ? 1.0 : slope;
  return finish(common_tape({&a}), a.shape(), std::move(out), [a, slope](std::span<const double> g, Tape& t) {
    const auto av = a.values();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (av[i] >= 0.0 ? 1.0 : slope);
    t.accumulate(a, ga);
  });
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v = std::abs(v);
  return finish(common_tape({&a}), a.shape(), std::move(out), [a](std::span<const double> g, Tape& t) {
    const auto av = a.values();
    std::vector<double> ga(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = av[i] > 0.0 ? g[i] : av[i] < 0.0 ? -g[i] : 0.0;
    t.accumulate(a, ga);
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return finish(common_tape({&a}), std::move(shape), std::move(out),
                [a](std::span<const double> g, Tape& t) { t.accumulate(a, g); });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return finish(common_tape({&a}), Shape{1}, {s}, [a](std::span<const double> g, Tape& t) {
    t.accumulate(a, std::vector<double>(a.size(), g[0]));
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor group_softmax(const Tensor& x, std::size_t group, double temperature) {
  if (x.size() == 0) throw DimensionError("softmax: empty input");
  if (group == 0 || x.size() % group != 0) {
    throw DimensionError("softmax: group size " + std::to_string(group) + " does not divide " +
                         std::to_string(x.size()));
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  const auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t g0 = 0; g0 < x.size(); g0 += group) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = g0; i < g0 + group; ++i) mx = std::max(mx, xv[i]);
    double z = 0.0;
    for (std::size_t i = g0; i < g0 + group; ++i) {
      out[i] = std::exp((xv[i] - mx) / temperature);
      z += out[i];
    }
    for (std::size_t i = g0; i < g0 + group; ++i) out[i] /= z;
  }
  auto y = std::make_shared<const std::vector<double>>(out);
  return finish(common_tape({&x}), x.shape(), std::move(out),
                [x, y, group, temperature](std::span<const double> g, Tape& t) {
                  std::vector<double> gx(g.size());
                  for (std::size_t g0 = 0; g0 < g.size(); g0 += group) {
                    double dot = 0.0;
                    for (std::size_t i = g0; i < g0 + group; ++i) dot += g[i] * (*y)[i];
                    for (std::size_t i = g0; i < g0 + group; ++i) gx[i] = (*y)[i] * (g[i] - dot) / temperature;
                  }
                  t.accumulate(x, gx);
                });
}

Tensor softmax(const Tensor& x, double temperature) { return group_softmax(x, x.size(), temperature); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  if (axis > 1) throw DimensionError("concat: axis must be 0 or 1");
  if (parts.size() == 1) return parts.front();

  const bool all_vectors =
      std::all_of(parts.begin(), parts.end(), [](const Tensor& p) { return p.rank() == 1; });
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    Tape* pt = common_tape({&p});
    if (pt && tape && pt != tape) throw std::invalid_argument("concat: tensors on different tapes");
    if (pt) tape = pt;
  }

  Shape shape;
  std::vector<double> out;
  if (axis == 0) {
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
      if (!all_vectors && p.cols() != c) {
        throw DimensionError("concat: axis-0 parts need equal widths, got " + shape_string(p.shape()));
      }
      r += p.rows();
      out.insert(out.end(), p.values().begin(), p.values().end());
    }
    shape = all_vectors ? Shape{out.size()} : Shape{r, c};
  } else {
    const std::size_t r = parts.front().rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
      if (p.rows() != r) {
        throw DimensionError("concat: axis-1 parts need equal heights, got " + shape_string(p.shape()));
      }
      c += p.cols();
    }
    out.resize(r * c);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const auto pv = p.values();
      const std::size_t pc = p.cols();
      for (std::size_t i = 0; i < r; ++i) std::copy_n(pv.begin() + i * pc, pc, out.begin() + i * c + off);
      off += pc;
    }
    shape = all_vectors ? Shape{c} : Shape{r, c};
  }

  return finish(tape, shape, std::move(out), [parts, axis, shape](std::span<const double> g, Tape& t) {
    if (axis == 0) {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p.tracked()) t.accumulate(p, g.subspan(off, p.size()));
        off += p.size();
      }
      return;
    }
    const std::size_t c = shape.back();
    const std::size_t r = g.size() / c;
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.cols();
      if (p.tracked()) {
        std::vector<double> gp(p.size());
        for (std::size_t i = 0; i < r; ++i) std::copy_n(g.begin() + i * c + off, pc, gp.begin() + i * pc);
        t.accumulate(p, gp);
      }
      off += pc;
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  const std::size_t c = x.cols(), n = x.rows();
  const auto xv = x.values();
  std::vector<double> out(index.size() * c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw std::out_of_range("gather_rows: index " + std::to_string(index[i]) + " >= " + std::to_string(n));
    std::copy_n(xv.begin() + index[i] * c, c, out.begin() + i * c);
  }
  auto idx = std::make_shared<const std::vector<std::size_t>>(index.begin(), index.end());
  return finish(common_tape({&x}), Shape{index.size(), c}, std::move(out), [x, idx](std::span<const double> g, Tape& t) {
    const std::size_t c = x.cols();
    auto& buf = t.grad_buffer(x.node());
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double* dst = buf.data() + (*idx)[i] * c;
      const double* src = g.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Tensor group_reduce(const Tensor& x, std::size_t group, Reduce how) {
  const std::size_t rows = x.rows(), c = x.cols();
  if (group == 0 || rows % group != 0) {
    throw DimensionError("group_reduce: group " + std::to_string(group) + " does not divide " + std::to_string(rows) + " rows");
  }
  const std::size_t n = rows / group;
  const auto xv = x.values();
  std::vector<double> out(n * c, 0.0);
  std::shared_ptr<std::vector<std::size_t>> argmax;
  if (how == Reduce::Max) argmax = std::make_shared<std::vector<std::size_t>>(n * c, 0);
  for (std::size_t b = 0; b < n; ++b) {
    double* o = out.data() + b * c;
    if (how == Reduce::Max) {
      std::copy_n(xv.begin() + b * group * c, c, o);
      for (std::size_t j = 0; j < c; ++j) (*argmax)[b * c + j] = b * group;
      for (std::size_t r = b * group + 1; r < (b + 1) * group; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          if (xv[r * c + j] > o[j]) {
            o[j] = xv[r * c + j];
            (*argmax)[b * c + j] = r;
          }
        }
      }
    } else {
      for (std::size_t r = b * group; r < (b + 1) * group; ++r) {
        for (std::size_t j = 0; j < c; ++j) o[j] += xv[r * c + j];
      }
      if (how == Reduce::Mean) {
        for (std::size_t j = 0; j < c; ++j) o[j] /= static_cast<double>(group);
      }
    }
  }
  return finish(common_tape({&x}), Shape{n, c}, std::move(out), [x, group, how, argmax](std::span<const double> g, Tape& t) {
    const std::size_t c = x.cols();
    auto& buf = t.grad_buffer(x.node());
    const std::size_t n = g.size() / c;
    if (how == Reduce::Max) {
      for (std::size_t i = 0; i < g.size(); ++i) buf[(*argmax)[i] * c + i % c] += g[i];
      return;
    }
    const double w = how == Reduce::Mean ? 1.0 / static_cast<double>(group) : 1.0;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t r = b * group; r < (b + 1) * group; ++r) {
        for (std::size_t j = 0; j < c; ++j) buf[r * c + j] += w * g[b * c + j];
      }
    }
  });
}

Tensor reduce_rows(const Tensor& x, Reduce how) {
  auto r = group_reduce(x.rank() == 1 ? reshape(x, Shape{1, x.size()}) : x, x.rows(), how);
  return r;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  const std::size_t r = x.rows(), c = x.cols();
  if (s.size() != r) {
    throw DimensionError("scale_rows: " + std::to_string(s.size()) + " factors for " + std::to_string(r) + " rows");
  }
  const auto xv = x.values();
  const auto sv = s.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * sv[i];
  }
  return finish(common_tape({&x, &s}), x.shape(), std::move(out), [x, s](std::span<const double> g, Tape& t) {
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.values();
    const auto sv = s.values();
    if (x.tracked()) {
      std::vector<double> gx(x.size());
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] = g[i * c + j] * sv[i];
      }
      t.accumulate(x, gx);
    }
    if (s.tracked()) {
      std::vector<double> gs(r, 0.0);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gs[i] += g[i * c + j] * xv[i * c + j];
      }
      t.accumulate(s, gs);
    }
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("row_dot: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += av[i * c + j] * bv[i * c + j];
  }
  return finish(common_tape({&a, &b}), Shape{r, 1}, std::move(out), [a, b](std::span<const double> g, Tape& t) {
    const std::size_t r = a.rows(), c = a.cols();
    const auto av = a.values();
    const auto bv = b.values();
    if (a.tracked()) {
      std::vector<double> ga(a.size());
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] = g[i] * bv[i * c + j];
      }
      t.accumulate(a, ga);
    }
    if (b.tracked()) {
      std::vector<double> gb(b.size());
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gb[i * c + j] = g[i] * av[i * c + j];
      }
      t.accumulate(b, gb);
    }
  });
}

Tensor row_cosine(const Tensor& a, const Tensor& b, double eps) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("row_cosine: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dot += av[i * c + j] * bv[i * c + j];
      na += av[i * c + j] * av[i * c + j];
      nb += bv[i * c + j] * bv[i * c + j];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < eps || nb < eps) continue;
    // Rounding can push |cos| marginally past 1.
    out[i] = std::clamp(dot / (na * nb), -1.0, 1.0);
  }
  auto y = std::make_shared<const std::vector<double>>(out);
  return finish(common_tape({&a, &b}), Shape{r, 1}, std::move(out), [a, b, y, eps](std::span<const double> g, Tape& t) {
    const std::size_t r = a.rows(), c = a.cols();
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> ga(a.tracked() ? a.size() : 0, 0.0), gb(b.tracked() ? b.size() : 0, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double na = 0.0, nb = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        na += av[i * c + j] * av[i * c + j];
        nb += bv[i * c + j] * bv[i * c + j];
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      if (na < eps || nb < eps) continue;
      const double cosv = (*y)[i];
      for (std::size_t j = 0; j < c; ++j) {
        const double x = av[i * c + j], z = bv[i * c + j];
        if (!ga.empty()) ga[i * c + j] = g[i] * (z / (na * nb) - cosv * x / (na * na));
        if (!gb.empty()) gb[i * c + j] = g[i] * (x / (na * nb) - cosv * z / (nb * nb));
      }
    }
    if (a.tracked()) t.accumulate(a, ga);
    if (b.tracked()) t.accumulate(b, gb);
  });
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels) {
  const std::size_t r = logits.rows(), k = logits.cols();
  if (labels.size() != r) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(r) + " rows");
  }
  const auto lv = logits.values();
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (labels[i] >= k) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(k) + ")");
    }
    const double* row = lv.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - lse);
    total += lse - row[labels[i]];
  }
  auto lab = std::make_shared<const std::vector<std::size_t>>(labels.begin(), labels.end());
  return finish(common_tape({&logits}), Shape{1}, {total / static_cast<double>(r)},
                [logits, probs, lab](std::span<const double> g, Tape& t) {
                  const std::size_t r = logits.rows(), k = logits.cols();
                  const double w = g[0] / static_cast<double>(r);
                  std::vector<double> gl(logits.size());
                  for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < k; ++j) {
                      gl[i * k + j] = w * ((*probs)[i * k + j] - (j == (*lab)[i] ? 1.0 : 0.0));
                    }
                  }
                  t.accumulate(logits, gl);
                });
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rows() != 1) throw DimensionError("cross_entropy: expected one row of logits, got " + shape_string(logits.shape()));
  const std::size_t labels[] = {label};
  return cross_entropy_rows(logits, labels);
}

}  // namespace sfagc::ops
