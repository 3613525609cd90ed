#include "sfagc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "sfagc/io.hpp"

namespace sfagc {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::size_t DatasetManifest::label_count() const {
  if (task == "classify") return classes.size();
  std::size_t top = 0;
  for (const auto& [cat, ps] : parts) {
    for (auto p : ps) top = std::max(top, p + 1);
  }
  return top;
}

std::size_t DatasetManifest::class_index(const std::string& name) const {
  auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw std::invalid_argument("manifest: unknown label '" + name + "'");
  return static_cast<std::size_t>(it - classes.begin());
}

namespace {

std::vector<ManifestEntry> read_split(const json& j, const char* key) {
  std::vector<ManifestEntry> out;
  if (!j.contains(key)) return out;
  for (const auto& e : j.at(key)) out.push_back({e.at("file").get<std::string>(), e.at("label").get<std::string>()});
  return out;
}

json write_split(const std::vector<ManifestEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back({{"file", e.file}, {"label", e.label}});
  return arr;
}

Sample read_sample(const DatasetManifest& m, const ManifestEntry& e) {
  const std::string path = (fs::path(m.root) / e.file).string();
  auto table = load_point_table(path);
  Sample s;
  s.label = m.class_index(e.label);
  const std::size_t n = table.rows();
  if (m.points && n != m.points) {
    throw std::invalid_argument(path + ": " + std::to_string(n) + " points, manifest declares " + std::to_string(m.points));
  }
  if (m.task == "classify") {
    if (table.cols() != 3) throw std::invalid_argument(path + ": expected 3 columns, got " + std::to_string(table.cols()));
    s.xyz = table;
    return s;
  }
  if (table.cols() != 4) throw std::invalid_argument(path + ": expected x y z part, got " + std::to_string(table.cols()) + " columns");
  const auto& allowed = m.parts.at(e.label);
  std::vector<double> xyz(n * 3);
  s.point_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(table.values().begin() + i * 4, 3, xyz.begin() + i * 3);
    const double lab = table[i * 4 + 3];
    if (lab < 0 || lab != std::floor(lab) ||
        std::find(allowed.begin(), allowed.end(), static_cast<std::size_t>(lab)) == allowed.end()) {
      throw std::invalid_argument(path + ":" + std::to_string(i + 1) + ": part label " + format_double(lab) +
                                  " not declared for category '" + e.label + "'");
    }
    s.point_labels[i] = static_cast<std::size_t>(lab);
  }
  s.xyz = Tensor({n, 3}, std::move(xyz));
  return s;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open manifest '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.root = fs::path(path).parent_path().string();
    m.task = j.at("task").get<std::string>();
    m.points = j.value("points", std::size_t{0});
    m.classes = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("parts")) m.parts = j.at("parts").get<std::map<std::string, std::vector<std::size_t>>>();
    m.train = read_split(j, "train");
    m.test = read_split(j, "test");
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  if (m.task != "classify" && m.task != "segment") throw std::invalid_argument(path + ": task must be classify or segment");
  if (m.classes.empty()) throw std::invalid_argument(path + ": no classes");
  if (std::set<std::string>(m.classes.begin(), m.classes.end()).size() != m.classes.size()) {
    throw std::invalid_argument(path + ": duplicate class names");
  }
  if (m.task == "segment") {
    for (const auto& c : m.classes) {
      if (!m.parts.count(c) || m.parts.at(c).empty()) throw std::invalid_argument(path + ": category '" + c + "' has no parts");
    }
  }
  if (m.train.empty() && m.test.empty()) throw std::invalid_argument(path + ": no entries");
  for (const auto* split : {&m.train, &m.test}) {
    for (const auto& e : *split) {
      if (!fs::exists(fs::path(m.root) / e.file)) throw std::invalid_argument(path + ": missing file '" + e.file + "'");
      read_sample(m, e);
    }
  }
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  json j;
  j["task"] = m.task;
  j["points"] = m.points;
  j["classes"] = m.classes;
  if (!m.parts.empty()) j["parts"] = m.parts;
  j["train"] = write_split(m.train);
  j["test"] = write_split(m.test);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << "\n";
}

std::vector<Sample> load_split(const DatasetManifest& m, const std::string& split) {
  const auto* entries = split == "train" ? &m.train : split == "test" ? &m.test : nullptr;
  if (!entries) throw std::invalid_argument("unknown split '" + split + "'");
  std::vector<Sample> out;
  out.reserve(entries->size());
  for (const auto& e : *entries) out.push_back(read_sample(m, e));
  return out;
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 unit_sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (;;) {
    Vec3 p{g(rng), g(rng), g(rng)};
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (r > 1e-12) return {p[0] / r, p[1] / r, p[2] / r};
  }
}

// Rotation matrix of a uniformly random unit quaternion.
std::array<double, 9> random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  double q[4];
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : q) {
      x = g(rng);
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

Vec3 surface_point(const std::string& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), unit(0.0, 1.0);
  if (shape == "sphere") return unit_sphere_point(rng);
  if (shape == "cube") {
    const double s = 1.0 / std::sqrt(3.0);
    const int face = static_cast<int>(unit(rng) * 6.0) % 6;
    Vec3 p{s * u(rng), s * u(rng), s * u(rng)};
    p[face / 2] = face % 2 ? s : -s;
    return p;
  }
  if (shape == "cylinder") {
    // A slender rod, so that no rotation makes it resemble the cube. Rim
    // points sit at norm 1.
    const double r = 0.35, hh = std::sqrt(1.0 - r * r);
    const double side = 2.0 * std::numbers::pi * r * 2.0 * hh, caps = 2.0 * std::numbers::pi * r * r;
    const double a = 2.0 * std::numbers::pi * unit(rng);
    if (unit(rng) * (side + caps) < side) return {r * std::cos(a), r * std::sin(a), hh * u(rng)};
    const double rad = r * std::sqrt(unit(rng));
    return {rad * std::cos(a), rad * std::sin(a), unit(rng) < 0.5 ? -hh : hh};
  }
  if (shape == "plane") {
    const double s = 1.0 / std::sqrt(2.0);
    return {s * u(rng), s * u(rng), 0.0};
  }
  throw std::invalid_argument("unknown synthetic shape '" + shape + "'");
}

const std::vector<std::string> kClassify4 = {"sphere", "cube", "cylinder", "plane"};

}  // namespace

Tensor synth_shape(const std::string& shape, std::size_t n, std::mt19937_64& rng, double jitter) {
  std::normal_distribution<double> noise(0.0, jitter > 0.0 ? jitter : 1.0);
  auto jit = [&] { return jitter > 0.0 ? noise(rng) : 0.0; };
  if (shape == "capped") {
    // Open-bottom cylinder along z with a top cap. Labels follow the axial
    // coordinate before jitter: within kCapTolerance of the cap plane is cap.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double r = 0.4 + 0.3 * unit(rng), h = 0.8 + 0.6 * unit(rng);
    const double side = 2.0 * std::numbers::pi * r * h, cap = std::numbers::pi * r * r;
    std::vector<double> out(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * unit(rng);
      Vec3 p;
      if (unit(rng) * (side + cap) < side) {
        p = {r * std::cos(a), r * std::sin(a), h * (unit(rng) - 0.5)};
      } else {
        const double rad = r * std::sqrt(unit(rng));
        p = {rad * std::cos(a), rad * std::sin(a), 0.5 * h};
      }
      const bool is_cap = p[2] >= 0.5 * h - kCapTolerance;
      for (std::size_t d = 0; d < 3; ++d) out[i * 4 + d] = p[d] + jit();
      out[i * 4 + 3] = is_cap ? 1.0 : 0.0;
    }
    return Tensor({n, 4}, std::move(out));
  }
  const auto rot = random_rotation(rng);
  std::vector<double> out(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = surface_point(shape, rng);
    for (std::size_t d = 0; d < 3; ++d) {
      out[i * 3 + d] = rot[d * 3] * p[0] + rot[d * 3 + 1] * p[1] + rot[d * 3 + 2] * p[2] + jit();
    }
  }
  return Tensor({n, 3}, std::move(out));
}

DatasetManifest synth_dataset(const SynthOptions& opts, const std::string& dir) {
  if (opts.train_per_class < 2) throw std::invalid_argument("synth: at least 2 training samples per class");
  if (opts.points == 0) throw std::invalid_argument("synth: points must be positive");
  DatasetManifest m;
  std::vector<std::string> shapes;
  if (opts.kind == "classify4") {
    m.task = "classify";
    m.classes = kClassify4;
    shapes = kClassify4;
  } else if (opts.kind == "segment2") {
    m.task = "segment";
    m.classes = {"capped"};
    m.parts["capped"] = {0, 1};
    shapes = {"capped"};
  } else {
    throw std::invalid_argument("synth: unknown kind '" + opts.kind + "' (classify4, segment2)");
  }
  m.root = dir;
  m.points = opts.points;
  std::mt19937_64 rng(opts.seed);
  for (const auto* split : {"train", "test"}) {
    const std::size_t count = std::string(split) == "train" ? opts.train_per_class : opts.test_per_class;
    fs::create_directories(fs::path(dir) / split);
    auto& entries = std::string(split) == "train" ? m.train : m.test;
    for (std::size_t c = 0; c < shapes.size(); ++c) {
      for (std::size_t i = 0; i < count; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s/%s_%04zu.xyz", split, m.classes[c].c_str(), i);
        save_point_table((fs::path(dir) / name).string(), synth_shape(shapes[c], opts.points, rng, opts.jitter),
                         PointFormat::XyzText);
        entries.push_back({name, m.classes[c]});
      }
    }
  }
  save_manifest((fs::path(dir) / "manifest.json").string(), m);
  return m;
}

}  // namespace sfagc
