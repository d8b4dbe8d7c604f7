#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgcn/ink/trajectory.hpp"

namespace sgcn::ink {

struct Sample {
  std::uint32_t label = 0;
  Trajectory trajectory;
  std::string id;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;

  std::size_t num_classes() const { return class_names.size(); }
  /// Throws when a label is out of range or a trajectory is invalid.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthSpec {
  std::size_t num_classes = 10;
  std::size_t samples_per_class = 200;
  /// Standard deviation of per-point Gaussian noise, in template units
  /// (templates span roughly one unit).
  double jitter = 0.015;
  /// Rotation drawn uniformly from [-rotation_range, rotation_range] radians.
  double rotation_range = 0.2;
  /// Uniform scale factor drawn from [scale_min, scale_max].
  double scale_min = 0.8;
  double scale_max = 1.25;
};

/// Number of built-in digit-like stroke templates.
std::size_t num_templates();

/// The noiseless template of class `index` ("0".."9").
Trajectory digit_template(std::size_t index);

/// Deterministic for a fixed seed. Samples are interleaved by class.
Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

/// One JSON object per line: {"label": str, "id": str, "strokes": [[[x,y],...],...]}.
/// Class names are read from `classes.json` next to `path` unless given.
Dataset load_jsonl(const std::filesystem::path& path,
                   const std::vector<std::string>& class_names = {});

/// Writes `path` and a sibling `classes.json`.
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

std::vector<std::string> load_class_names(const std::filesystem::path& classes_json);

/// Parses JSONL samples without label lookup (labels default to 0); for
/// inference inputs that carry no ground truth.
std::vector<Sample> load_unlabeled_jsonl(const std::filesystem::path& path);

}  // namespace sgcn::ink
