#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfagc/graph.hpp"
#include "sfagc/tensor.hpp"

namespace sfagc {

/// Malformed input file; the message carries the path and line or byte offset.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PointFormat { XyzText, Bin };

inline constexpr char kPointBinMagic[] = "PCBIN01";

/// ".bin" selects the binary format, anything else text.
PointFormat format_for_path(const std::string& path);

/// N × C values. xyz-text: one point per line, whitespace-separated numbers,
/// blank lines and '#' comments skipped. bin: "PCBIN01", u64 N, u64 C, then
/// N·C f64, all little-endian.
Tensor load_point_table(const std::string& path, PointFormat format);
Tensor load_point_table(const std::string& path);
void save_point_table(const std::string& path, const Tensor& table, PointFormat format);

/// Point set whose features start as the coordinates.
PointSet load_points(const std::string& path, PointFormat format);

struct Mesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;  // polygons are fan-split
};

Mesh parse_off(std::istream& in, const std::string& origin = "<stream>");
Mesh load_off(const std::string& path);

/// n points drawn with probability proportional to triangle area, uniform
/// within each triangle. Throws std::invalid_argument on zero total area.
Tensor sample_mesh(const Mesh& mesh, std::size_t n, std::mt19937_64& rng);
PointSet sample_off_mesh(const std::string& path, std::size_t n, std::uint64_t seed);

/// Zero centroid, then max norm 1. Coincident points all map to the origin.
Tensor normalize_unit_sphere(const Tensor& xyz);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace sfagc
