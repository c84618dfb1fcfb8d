#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fetril/types.hpp"

namespace fetril {

struct ClassTally {
  std::size_t correct = 0;
  std::size_t total = 0;

  friend bool operator==(const ClassTally&, const ClassTally&) = default;
};

using PerClassTally = std::map<ClassId, ClassTally>;

struct StateReport {
  int state_idx = 0;
  std::size_t seen_class_count = 0;
  double top1 = 0.0;
  std::optional<double> past_top1;  // empty at state 0
  double new_top1 = 0.0;
  PerClassTally per_class_correct;
};

struct PastNewSplit {
  std::optional<double> past_top1;
  double new_top1 = 0.0;
  ClassTally past;
  ClassTally fresh;
};

/// Micro-averaged accuracy over past classes (everything not in
/// `current_state_classes`) and over the classes introduced in this state.
PastNewSplit split_past_new(const PerClassTally& per_class, std::span<const ClassId> current_state_classes);

StateReport make_state_report(int state_idx, PerClassTally per_class, std::span<const ClassId> current_state_classes);

/// Unweighted mean of top1 over every state, the initial one included.
double average_incremental_accuracy(std::span<const StateReport> reports);

/// One CSV line of states.csv.
struct StateRow {
  int state_idx = 0;
  std::size_t seen_classes = 0;
  double top1 = 0.0;
  std::optional<double> past_top1;
  double new_top1 = 0.0;
};

StateRow to_row(const StateReport& report);

/// Element-wise mean over repeats; every repeat must have the same state count.
std::vector<StateRow> mean_rows(const std::vector<std::vector<StateRow>>& repeats);

double average_incremental_accuracy(std::span<const StateRow> rows);

inline constexpr const char* kStatesCsvHeader = "state_idx,seen_classes,top1,past_top1,new_top1";

std::string format_states_csv(std::span<const StateRow> rows);
std::vector<StateRow> parse_states_csv(const std::string& text);

}  // namespace fetril
