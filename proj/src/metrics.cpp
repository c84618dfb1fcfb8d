#include "fetril/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "fetril/errors.hpp"

namespace fetril {

namespace {

constexpr const char* kModule = "metrics";

double fraction(const ClassTally& t) {
  return t.total == 0 ? 0.0 : static_cast<double>(t.correct) / static_cast<double>(t.total);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw FormatError(kModule, "states.csv line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

PastNewSplit split_past_new(const PerClassTally& per_class, std::span<const ClassId> current_state_classes) {
  PastNewSplit out;
  for (const auto& [id, tally] : per_class) {
    const bool is_new = std::find(current_state_classes.begin(), current_state_classes.end(), id) != current_state_classes.end();
    auto& bucket = is_new ? out.fresh : out.past;
    bucket.correct += tally.correct;
    bucket.total += tally.total;
  }
  bool any_past = false;
  for (const auto& [id, _] : per_class) {
    if (std::find(current_state_classes.begin(), current_state_classes.end(), id) == current_state_classes.end()) {
      any_past = true;
      break;
    }
  }
  if (any_past) out.past_top1 = fraction(out.past);
  out.new_top1 = fraction(out.fresh);
  return out;
}

StateReport make_state_report(int state_idx, PerClassTally per_class, std::span<const ClassId> current_state_classes) {
  StateReport r;
  r.state_idx = state_idx;
  r.seen_class_count = per_class.size();
  ClassTally all;
  for (const auto& [_, t] : per_class) {
    if (t.correct > t.total) throw ContractError(kModule, "more correct predictions than samples");
    all.correct += t.correct;
    all.total += t.total;
  }
  r.top1 = fraction(all);
  const auto split = split_past_new(per_class, current_state_classes);
  r.past_top1 = split.past_top1;
  r.new_top1 = split.new_top1;
  r.per_class_correct = std::move(per_class);
  return r;
}

double average_incremental_accuracy(std::span<const StateReport> reports) {
  if (reports.empty()) throw ContractError(kModule, "no state reports to average");
  double sum = 0.0;
  for (const auto& r : reports) sum += r.top1;
  return sum / static_cast<double>(reports.size());
}

double average_incremental_accuracy(std::span<const StateRow> rows) {
  if (rows.empty()) throw ContractError(kModule, "no state rows to average");
  double sum = 0.0;
  for (const auto& r : rows) sum += r.top1;
  return sum / static_cast<double>(rows.size());
}

StateRow to_row(const StateReport& report) {
  return {report.state_idx, report.seen_class_count, report.top1, report.past_top1, report.new_top1};
}

std::vector<StateRow> mean_rows(const std::vector<std::vector<StateRow>>& repeats) {
  if (repeats.empty()) throw ContractError(kModule, "no repeats to average");
  const std::size_t states = repeats.front().size();
  const double inv = 1.0 / static_cast<double>(repeats.size());
  std::vector<StateRow> out(states);
  for (std::size_t s = 0; s < states; ++s) {
    out[s].state_idx = repeats.front()[s].state_idx;
    out[s].seen_classes = repeats.front()[s].seen_classes;
    double past = 0.0;
    bool has_past = true;
    for (const auto& rep : repeats) {
      if (rep.size() != states) throw ContractError(kModule, "repeats disagree on the number of states");
      out[s].top1 += rep[s].top1 * inv;
      out[s].new_top1 += rep[s].new_top1 * inv;
      if (rep[s].past_top1) {
        past += *rep[s].past_top1 * inv;
      } else {
        has_past = false;
      }
    }
    if (has_past) out[s].past_top1 = past;
  }
  return out;
}

std::string format_states_csv(std::span<const StateRow> rows) {
  std::ostringstream out;
  out << kStatesCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.state_idx << ',' << r.seen_classes << ',' << format_double(r.top1) << ','
        << (r.past_top1 ? format_double(*r.past_top1) : std::string()) << ',' << format_double(r.new_top1) << '\n';
  }
  return out.str();
}

std::vector<StateRow> parse_states_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kStatesCsvHeader) throw FormatError(kModule, "states.csv has an unexpected header");
  std::vector<StateRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 5) throw FormatError(kModule, "states.csv line " + std::to_string(lineno) + ": expected 5 fields");
    StateRow r;
    r.state_idx = static_cast<int>(parse_double(fields[0], lineno));
    r.seen_classes = static_cast<std::size_t>(parse_double(fields[1], lineno));
    r.top1 = parse_double(fields[2], lineno);
    if (!fields[3].empty()) r.past_top1 = parse_double(fields[3], lineno);
    r.new_top1 = parse_double(fields[4], lineno);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace fetril
