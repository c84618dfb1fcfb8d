#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fetril/classifier.hpp"
#include "fetril/feature_store.hpp"
#include "fetril/metrics.hpp"
#include "fetril/pseudo_generator.hpp"

namespace fetril {

/// Partition of classes into an initial state and T incremental states.
struct IncrementalSchedule {
  std::vector<ClassId> initial_classes;
  std::vector<std::vector<ClassId>> states;
  std::uint64_t seed = 0;

  /// Number of states including the initial one.
  std::size_t total_states() const noexcept { return states.size() + 1; }
  const std::vector<ClassId>& classes_of(std::size_t state) const {
    return state == 0 ? initial_classes : states.at(state - 1);
  }
};

/// Seeded shuffle of 0..N-1; the first `initial_count` classes form state 0 and the
/// rest is cut into `increments` contiguous blocks, earlier blocks taking the
/// remainder. `increments == 0` is accepted only when every class is initial.
IncrementalSchedule build_schedule(std::size_t num_classes, std::size_t initial_count, std::size_t increments,
                                   std::uint64_t seed);

enum class Method { fetril, ncm, deesil };
enum class TranslationSpace { raw, normalized };

std::string to_string(Method m);
Method parse_method(const std::string& text);
std::string to_string(TranslationSpace s);
TranslationSpace parse_translation_space(const std::string& text);

struct RunConfig {
  std::size_t initial_count = 0;
  std::size_t increments = 0;
  Method method = Method::fetril;
  SelectionStrategy strategy = SelectionStrategy::kth(1);
  /// Pseudo-features per past class; defaults to the largest training class size.
  std::optional<std::size_t> samples_per_class;
  TrainConfig classifier;
  /// Where translation and prototype averaging happen; classifier input is always normalized.
  TranslationSpace translation_space = TranslationSpace::raw;
  std::uint64_t seed = 0;
  std::size_t repeats = 3;
};

/// Insert-only map of class prototypes.
class PrototypeRegistry {
 public:
  void insert(ClassPrototype prototype);
  const ClassPrototype& at(ClassId id) const;
  bool contains(ClassId id) const { return prototypes_.contains(id); }
  std::size_t size() const noexcept { return prototypes_.size(); }
  const std::map<ClassId, ClassPrototype>& all() const noexcept { return prototypes_; }

 private:
  std::map<ClassId, ClassPrototype> prototypes_;
};

/// Hands out training rows of a class; every hand-out is logged with the state
/// that requested it, so tests can verify that no class is read after arrival.
class TrainFeed {
 public:
  explicit TrainFeed(const FeatureStore& store) : store_(store) {}

  FeatureMatrix fetch(ClassId id, std::size_t state);
  const std::vector<std::pair<ClassId, std::size_t>>& log() const noexcept { return log_; }

 private:
  const FeatureStore& store_;
  std::vector<std::pair<ClassId, std::size_t>> log_;
};

/// What an observer sees after each state has been trained and evaluated.
struct StateSnapshot {
  std::size_t state = 0;
  const PrototypeRegistry& registry;
  const ClassifierBank& bank;
  const StateReport& report;
};

using StateObserver = std::function<void(const StateSnapshot&)>;

struct RunResult {
  IncrementalSchedule schedule;
  std::vector<StateReport> reports;
  ClassifierBank final_bank;
  std::vector<std::pair<ClassId, std::size_t>> fetch_log;

  double average_incremental_accuracy() const { return fetril::average_incremental_accuracy(reports); }
};

/// Seed of repeat `r` derived from the configuration seed.
std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat);

/// One pass of the incremental process with the given seed.
RunResult run_once(const RunConfig& config, const FeatureStore& train, const FeatureStore& test, std::uint64_t seed,
                   const StateObserver& observer = {});

/// `config.repeats` passes with derived seeds.
std::vector<RunResult> run(const RunConfig& config, const FeatureStore& train, const FeatureStore& test);

/// Test top-1 of the same classifier trained on every real training row at once.
double joint_upper_bound(const FeatureStore& train, const FeatureStore& test, const TrainConfig& config);

/// Normalized copy of a stored class block.
DenseMatrix normalized_rows(const FeatureMatrix& m);

PerClassTally evaluate(const ClassifierBank& bank, const std::map<ClassId, DenseMatrix>& test_rows,
                       const std::vector<ClassId>& classes);

}  // namespace fetril
