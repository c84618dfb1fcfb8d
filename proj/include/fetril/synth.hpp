#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "fetril/feature_store.hpp"

namespace fetril {

enum class SynthPreset { easy, hard };

std::string to_string(SynthPreset p);
SynthPreset parse_preset(const std::string& text);

/// Gaussian class clusters: class k has a center drawn uniformly in
/// [-scale, scale]^dim and rows drawn as center + N(0, sigma^2 I).
struct SynthSpec {
  std::size_t num_classes = 20;
  std::size_t dim = 64;
  std::size_t samples_per_class = 100;
  double class_center_scale = 1.0;
  double within_class_sigma = 1.0;
  std::uint64_t seed = 0;
  SynthPreset preset = SynthPreset::easy;

  /// Spec with the preset's scale and sigma filled in.
  static SynthSpec from_preset(SynthPreset preset, std::size_t num_classes, std::size_t dim, std::size_t samples,
                               std::uint64_t seed);

  /// Test rows per class: 20% of the training count, at least one.
  std::size_t test_samples_per_class() const noexcept;

  void validate() const;
};

struct SynthDataset {
  FeatureStore train;
  FeatureStore test;
};

SynthDataset generate(const SynthSpec& spec);

/// Writes `<out>/train.json`, `<out>/test.json` and the class files they reference.
void write_synth(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace fetril
