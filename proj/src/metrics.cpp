#include "sfagc/metrics.hpp"

#include <map>
#include <stdexcept>

namespace sfagc {

namespace {

void check(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("metrics: prediction and label counts differ");
  if (truth.empty()) throw std::invalid_argument("metrics: empty input");
}

}  // namespace

double overall_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  check(pred, truth);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double mean_class_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  check(pred, truth);
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per;  // class → (hit, total)
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& c = per[truth[i]];
    c.first += pred[i] == truth[i];
    ++c.second;
  }
  double sum = 0.0;
  for (const auto& [cls, c] : per) sum += static_cast<double>(c.first) / static_cast<double>(c.second);
  return sum / static_cast<double>(per.size());
}

double shape_iou(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                 std::span<const std::size_t> parts) {
  check(pred, truth);
  if (parts.empty()) throw std::invalid_argument("shape_iou: category has no parts");
  double sum = 0.0;
  for (auto part : parts) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == part, t = truth[i] == part;
      inter += p && t;
      uni += p || t;
    }
    sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return sum / static_cast<double>(parts.size());
}

}  // namespace sfagc
