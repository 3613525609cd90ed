#include "sfagc/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sfagc {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

bool parse_number(std::string_view tok, double& out) {
  const char* end = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view strip_comment(std::string_view line) {
  auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

Tensor load_text(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(strip_comment(line));
    if (toks.empty()) continue;
    if (cols == 0) cols = toks.size();
    if (toks.size() != cols) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) + " values, got " +
                       std::to_string(toks.size()));
    }
    for (auto t : toks) {
      double v;
      if (!parse_number(t, v)) throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + std::string(t) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(path + ": no points");
  return Tensor({rows, cols}, std::move(values));
}

Tensor load_bin(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t magic = sizeof(kPointBinMagic) - 1;
  if (bytes.size() < magic || std::memcmp(bytes.data(), kPointBinMagic, magic) != 0) {
    throw ParseError(path + ": offset 0: missing PCBIN01 magic");
  }
  if (bytes.size() < magic + 16) throw ParseError(path + ": offset " + std::to_string(magic) + ": truncated header");
  std::uint64_t n = 0, c = 0;
  std::memcpy(&n, bytes.data() + magic, 8);
  std::memcpy(&c, bytes.data() + magic + 8, 8);
  const std::size_t body = magic + 16;
  if (n == 0 || c == 0) throw ParseError(path + ": offset " + std::to_string(magic) + ": empty point table");
  if (c > (bytes.size() - body) / 8 || n > (bytes.size() - body) / 8 / c) {
    throw ParseError(path + ": offset " + std::to_string(body) + ": expected " + std::to_string(n * c) +
                     " values, file too short");
  }
  if (body + n * c * 8 != bytes.size()) {
    throw ParseError(path + ": offset " + std::to_string(body + n * c * 8) + ": trailing bytes");
  }
  std::vector<double> values(n * c);
  std::memcpy(values.data(), bytes.data() + body, n * c * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ParseError(path + ": offset " + std::to_string(body + 8 * i) + ": non-finite value");
  }
  return Tensor({n, c}, std::move(values));
}

}  // namespace

PointFormat format_for_path(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0 ? PointFormat::Bin : PointFormat::XyzText;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Tensor load_point_table(const std::string& path, PointFormat format) {
  return format == PointFormat::Bin ? load_bin(path) : load_text(path);
}

Tensor load_point_table(const std::string& path) { return load_point_table(path, format_for_path(path)); }

void save_point_table(const std::string& path, const Tensor& table, PointFormat format) {
  if (table.rank() != 2) throw DimensionError("save_point_table: expected N x C, got " + shape_string(table.shape()));
  const std::size_t n = table.rows(), c = table.cols();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (format == PointFormat::Bin) {
    out.write(kPointBinMagic, sizeof(kPointBinMagic) - 1);
    const std::uint64_t header[2] = {n, c};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(table.values().data()), static_cast<std::streamsize>(n * c * 8));
  } else {
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
      line.clear();
      for (std::size_t j = 0; j < c; ++j) {
        if (j) line += ' ';
        line += format_double(table[i * c + j]);
      }
      line += '\n';
      out << line;
    }
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

PointSet load_points(const std::string& path, PointFormat format) {
  return PointSet::from_coords(load_point_table(path, format));
}

Mesh parse_off(std::istream& in, const std::string& origin) {
  // Tokens with their line numbers, so errors can point at the line.
  std::vector<std::pair<std::string, std::size_t>> toks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (auto t : split_ws(strip_comment(line))) toks.emplace_back(std::string(t), lineno);
  }
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    const std::size_t at = pos < toks.size() ? toks[pos].second : lineno;
    return ParseError(origin + ":" + std::to_string(at) + ": " + what);
  };
  if (toks.empty()) throw ParseError(origin + ": empty OFF file");
  // Some writers glue the counts to the header ("OFF8 6 0").
  if (toks[0].first.rfind("OFF", 0) != 0) throw fail("missing OFF header");
  if (toks[0].first.size() > 3) {
    toks[0].first = toks[0].first.substr(3);
  } else {
    ++pos;
  }
  auto next_count = [&](const char* what) {
    if (pos >= toks.size()) throw fail(std::string("missing ") + what);
    double v;
    if (!parse_number(toks[pos].first, v) || v < 0 || v != std::floor(v)) throw fail(std::string("bad ") + what);
    ++pos;
    return static_cast<std::size_t>(v);
  };
  auto next_real = [&] {
    if (pos >= toks.size()) throw fail("unexpected end of file");
    double v;
    if (!parse_number(toks[pos].first, v)) throw fail("bad number '" + toks[pos].first + "'");
    ++pos;
    return v;
  };
  const std::size_t nv = next_count("vertex count");
  const std::size_t nf = next_count("face count");
  next_count("edge count");
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) {
    for (auto& x : v) x = next_real();
  }
  for (std::size_t f = 0; f < nf; ++f) {
    const std::size_t face_line = pos < toks.size() ? toks[pos].second : lineno;
    const std::size_t m = next_count("face size");
    if (m < 3) throw fail("face with fewer than 3 vertices");
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) {
      i = next_count("vertex index");
      if (i >= nv) throw fail("vertex index " + std::to_string(i) + " out of range");
    }
    // Optional per-face colour fills the rest of the line.
    while (pos < toks.size() && toks[pos].second == face_line) ++pos;
    for (std::size_t j = 1; j + 1 < m; ++j) mesh.triangles.push_back({idx[0], idx[j], idx[j + 1]});
  }
  return mesh;
}

Mesh load_off(const std::string& path) {
  auto in = open_in(path);
  return parse_off(in, path);
}

Tensor sample_mesh(const Mesh& mesh, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw std::invalid_argument("sample_mesh: n must be positive");
  std::vector<double> area(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& a = mesh.vertices[mesh.triangles[t][0]];
    const auto& b = mesh.vertices[mesh.triangles[t][1]];
    const auto& c = mesh.vertices[mesh.triangles[t][2]];
    const double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double cx = u[1] * v[2] - u[2] * v[1], cy = u[2] * v[0] - u[0] * v[2], cz = u[0] * v[1] - u[1] * v[0];
    area[t] = 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    total += area[t];
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_mesh: degenerate mesh with zero surface area");
  std::discrete_distribution<std::size_t> pick(area.begin(), area.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tri = mesh.triangles[pick(rng)];
    double r1 = unit(rng), r2 = unit(rng);
    // Reflect the upper half of the unit square back into the triangle.
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const auto& a = mesh.vertices[tri[0]];
    const auto& b = mesh.vertices[tri[1]];
    const auto& c = mesh.vertices[tri[2]];
    for (std::size_t d = 0; d < 3; ++d) out[i * 3 + d] = a[d] + r1 * (b[d] - a[d]) + r2 * (c[d] - a[d]);
  }
  return Tensor({n, 3}, std::move(out));
}

PointSet sample_off_mesh(const std::string& path, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return PointSet::from_coords(sample_mesh(load_off(path), n, rng));
}

Tensor normalize_unit_sphere(const Tensor& xyz) {
  if (xyz.rank() != 2 || xyz.rows() == 0) throw DimensionError("normalize_unit_sphere: expected N x C");
  const std::size_t n = xyz.rows(), c = xyz.cols();
  std::vector<double> out(xyz.values().begin(), xyz.values().end());
  std::vector<double> mean(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) mean[j] += out[i * c + j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] -= mean[j];
      sq += out[i * c + j] * out[i * c + j];
    }
    radius = std::max(radius, std::sqrt(sq));
  }
  if (radius > 0.0) {
    for (auto& v : out) v /= radius;
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
  return Tensor(xyz.shape(), std::move(out));
}

}  // namespace sfagc
