#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fetril/types.hpp"

namespace fetril {

/// Per-class embedding block exactly as stored on disk (float32, row-major).
struct FeatureMatrix {
  ClassId class_id = 0;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t i) const noexcept { return {data.data() + i * dim, dim}; }

  /// Throws DataError on non-finite values and ContractError on shape problems.
  void validate() const;

  DenseMatrix to_dense() const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

enum class Split { train, test };

struct ManifestEntry {
  ClassId class_id = 0;
  std::size_t count = 0;
  std::string path;  // as written in the manifest, relative to the manifest directory
};

struct DatasetManifest {
  std::string name;
  std::size_t dim = 0;
  Split split = Split::train;
  std::vector<ManifestEntry> classes;

  std::size_t num_classes() const noexcept { return classes.size(); }
};

/// Centroid of a class in the frozen representation space. Never modified once built.
struct ClassPrototype {
  ClassId class_id = 0;
  std::vector<double> centroid;
  int state_first_seen = 0;
};

// Binary feature file: "FTRL1", u32 class_id, u32 rows, u32 dim, rows*dim f32, all little-endian.
inline constexpr char kFeatureMagic[5] = {'F', 'T', 'R', 'L', '1'};
inline constexpr std::size_t kFeatureHeaderBytes = 5 + 3 * 4;

std::vector<std::uint8_t> encode_feature_file(const FeatureMatrix& m);
FeatureMatrix decode_feature_file(std::span<const std::uint8_t> bytes);

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

/// Validated, fully loaded dataset split. Class matrices are immutable after load.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(DatasetManifest manifest, std::vector<FeatureMatrix> matrices);

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  std::size_t dim() const noexcept { return manifest_.dim; }
  std::size_t num_classes() const noexcept { return matrices_.size(); }

  /// Class ids in ascending order.
  std::vector<ClassId> class_ids() const;
  bool contains(ClassId id) const { return index_.contains(id); }
  const FeatureMatrix& matrix(ClassId id) const;
  std::size_t count(ClassId id) const { return matrix(id).rows; }
  std::size_t max_class_count() const noexcept;

 private:
  DatasetManifest manifest_;
  std::vector<FeatureMatrix> matrices_;
  std::map<ClassId, std::size_t> index_;
};

/// Parses the manifest, loads every referenced class file, and checks headers,
/// dimensionality and finiteness against the manifest.
FeatureStore load_dataset(const std::filesystem::path& manifest_path);

/// Writes class files under `dir/<split>/` and the manifest at `manifest_path`.
void write_dataset(const std::filesystem::path& manifest_path, const std::string& name, Split split,
                   const std::vector<FeatureMatrix>& matrices);

ClassPrototype compute_prototype(const FeatureMatrix& m, int state_first_seen = 0);
ClassPrototype compute_prototype(ClassId class_id, const DenseMatrix& rows, int state_first_seen = 0);

inline constexpr double kNormEpsilon = 1e-12;

std::vector<double> l2_normalize(std::span<const double> v);
DenseMatrix l2_normalize_rows(const DenseMatrix& m);

}  // namespace fetril
