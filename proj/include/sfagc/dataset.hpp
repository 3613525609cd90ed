#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sfagc/tensor.hpp"

namespace sfagc {

/// One cloud on disk. Classification entries carry a class name; segmentation
/// entries a category name, with per-point part labels in the file's last
/// column.
struct ManifestEntry {
  std::string file;   // relative to the manifest's directory
  std::string label;  // class or category name
};

struct DatasetManifest {
  std::string root;   // directory holding the manifest; not serialized
  std::string task = "classify";  // classify | segment
  std::size_t points = 0;
  std::vector<std::string> classes;  // label map: index = position
  /// Segmentation: part labels owned by each category.
  std::map<std::string, std::vector<std::size_t>> parts;
  std::vector<ManifestEntry> train, test;

  /// Classification: number of classes. Segmentation: largest part label + 1.
  std::size_t label_count() const;
  std::size_t class_index(const std::string& name) const;
};

/// Reads manifest.json and checks that every referenced file exists, parses,
/// has the declared point count, and carries labels within range.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

struct Sample {
  Tensor xyz;                             // N × 3
  std::size_t label = 0;                  // class, or category index
  std::vector<std::size_t> point_labels;  // segmentation only
};

std::vector<Sample> load_split(const DatasetManifest& manifest, const std::string& split);

struct SynthOptions {
  std::string kind = "classify4";  // classify4 | segment2
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 40;
  std::size_t points = 64;
  std::uint64_t seed = 7;
  double jitter = 0.01;
};

/// Axial band below the cap plane that counts as cap in segment2.
inline constexpr double kCapTolerance = 0.05;

/// classify4: sphere, cube, cylinder and plane surfaces, each randomly rotated
/// and jittered. segment2: capped cylinders, parts side (0) and cap (1).
/// Writes the clouds and manifest.json under `dir`.
DatasetManifest synth_dataset(const SynthOptions& opts, const std::string& dir);

/// One synthetic cloud in memory. Shape names follow the classify4 classes;
/// "capped" yields a segment2 cylinder with labels in column 3.
Tensor synth_shape(const std::string& shape, std::size_t n, std::mt19937_64& rng, double jitter);

}  // namespace sfagc
