#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sfagc {

/// correct / total.
double overall_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

/// Mean of per-class accuracies over the classes that occur in `truth`.
double mean_class_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

/// Mean IoU over the category's parts for one shape. A part absent from both
/// prediction and ground truth counts as IoU 1.
double shape_iou(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                 std::span<const std::size_t> parts);

}  // namespace sfagc
