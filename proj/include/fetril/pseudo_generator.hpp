#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fetril/feature_store.hpp"
#include "fetril/types.hpp"

namespace fetril {

enum class SelectionKind { kth_similar, random, herding };

/// How the s source features of a past class are picked among new-class rows.
struct SelectionStrategy {
  SelectionKind kind = SelectionKind::kth_similar;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  /// Random strategy only: draw with replacement even when the pool is large enough.
  bool random_with_replacement = false;

  static SelectionStrategy kth(std::size_t k) { return {SelectionKind::kth_similar, k, 0, false}; }
  static SelectionStrategy random(std::uint64_t seed) { return {SelectionKind::random, 1, seed, false}; }
  static SelectionStrategy herding() { return {SelectionKind::herding, 1, 0, false}; }

  /// Accepts "k:<int>", "random" or "herding"; throws ContractError otherwise.
  static SelectionStrategy parse(const std::string& text);
  std::string to_string() const;

  void validate() const;
};

struct SourceRef {
  ClassId source_class = 0;
  std::size_t source_row = 0;

  friend bool operator==(const SourceRef&, const SourceRef&) = default;
};

struct PseudoFeatureSet {
  ClassId target_class = 0;
  DenseMatrix features;
  std::vector<SourceRef> source_record;
};

/// A class introduced in the current state: its prototype and its training rows.
struct NewClassView {
  const ClassPrototype* prototype = nullptr;
  const DenseMatrix* rows = nullptr;
};

/// f + mu_p - mu_n, dimension by dimension.
std::vector<double> translate(std::span<const double> feature, const ClassPrototype& target,
                              const ClassPrototype& source);

/// New classes by descending centroid cosine similarity to `target`, ties by class id.
std::vector<ClassId> rank_new_classes(const ClassPrototype& target, std::span<const ClassPrototype> new_protos);

PseudoFeatureSet generate_for_past_class(const ClassPrototype& target, std::span<const NewClassView> new_classes,
                                         const SelectionStrategy& strategy, std::size_t samples);

}  // namespace fetril
