#include "fetril/protocol.hpp"

#include <algorithm>
#include <numeric>

#include "fetril/errors.hpp"
#include "fetril/rng.hpp"

namespace fetril {

namespace {

constexpr const char* kModule = "protocol_runner";

void check_stores(const FeatureStore& train_store, const FeatureStore& test_store) {
  if (train_store.num_classes() == 0) throw ContractError(kModule, "training store has no classes");
  if (train_store.dim() != test_store.dim()) {
    throw ConsistencyError(kModule, "train dim " + std::to_string(train_store.dim()) + " differs from test dim " +
                                        std::to_string(test_store.dim()));
  }
  for (auto id : train_store.class_ids()) {
    if (!test_store.contains(id)) throw ConsistencyError(kModule, "class " + std::to_string(id) + " has no test features");
  }
}

ClassifierBank ncm_bank(const PrototypeRegistry& registry) {
  ClassifierBank bank;
  for (const auto& [id, proto] : registry.all()) {
    bank.weights.append_row(l2_normalize(proto.centroid));
    bank.biases.push_back(0.0);
    bank.class_ids.push_back(id);
  }
  return bank;
}

}  // namespace

IncrementalSchedule build_schedule(std::size_t num_classes, std::size_t initial_count, std::size_t increments,
                                   std::uint64_t seed) {
  if (initial_count < 1) throw ContractError(kModule, "initial state needs at least one class");
  if (increments == 0 && initial_count != num_classes) {
    throw ContractError(kModule, "zero increments require every class in the initial state");
  }
  if (initial_count + increments > num_classes) {
    throw ContractError(kModule, std::to_string(initial_count) + " initial classes and " + std::to_string(increments) +
                                     " states do not fit in " + std::to_string(num_classes) + " classes");
  }
  std::vector<ClassId> order(num_classes);
  std::iota(order.begin(), order.end(), ClassId{0});
  auto rng = make_rng(seed, 0x5C4ED);
  std::shuffle(order.begin(), order.end(), rng);

  IncrementalSchedule schedule;
  schedule.seed = seed;
  schedule.initial_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(initial_count));
  if (increments == 0) return schedule;
  const std::size_t rest = num_classes - initial_count;
  const std::size_t base = rest / increments;
  const std::size_t extra = rest % increments;
  auto it = order.begin() + static_cast<std::ptrdiff_t>(initial_count);
  for (std::size_t s = 0; s < increments; ++s) {
    const auto size = static_cast<std::ptrdiff_t>(base + (s < extra ? 1 : 0));
    schedule.states.emplace_back(it, it + size);
    it += size;
  }
  return schedule;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::fetril:
      return "fetril";
    case Method::ncm:
      return "ncm";
    case Method::deesil:
      return "deesil";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  if (text == "fetril") return Method::fetril;
  if (text == "ncm") return Method::ncm;
  if (text == "deesil") return Method::deesil;
  throw ContractError(kModule, "unknown method '" + text + "', expected fetril, ncm or deesil");
}

std::string to_string(TranslationSpace s) { return s == TranslationSpace::raw ? "raw" : "normalized"; }

TranslationSpace parse_translation_space(const std::string& text) {
  if (text == "raw") return TranslationSpace::raw;
  if (text == "normalized") return TranslationSpace::normalized;
  throw ContractError(kModule, "unknown translation space '" + text + "', expected raw or normalized");
}

void PrototypeRegistry::insert(ClassPrototype prototype) {
  const auto id = prototype.class_id;
  if (!prototypes_.emplace(id, std::move(prototype)).second) {
    throw ProtocolError(kModule, "prototype of class " + std::to_string(id) + " is already registered");
  }
}

const ClassPrototype& PrototypeRegistry::at(ClassId id) const {
  auto it = prototypes_.find(id);
  if (it == prototypes_.end()) throw ProtocolError(kModule, "no prototype for class " + std::to_string(id));
  return it->second;
}

FeatureMatrix TrainFeed::fetch(ClassId id, std::size_t state) {
  log_.emplace_back(id, state);
  return store_.matrix(id);
}

std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) { return mix_seed(seed, 0xC0FFEE + repeat); }

DenseMatrix normalized_rows(const FeatureMatrix& m) { return l2_normalize_rows(m.to_dense()); }

PerClassTally evaluate(const ClassifierBank& bank, const std::map<ClassId, DenseMatrix>& test_rows,
                       const std::vector<ClassId>& classes) {
  PerClassTally tally;
  for (auto id : classes) {
    const auto& rows = test_rows.at(id);
    ClassTally t;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      t.correct += predict(bank, rows.row(i)) == id ? 1 : 0;
      ++t.total;
    }
    tally[id] = t;
  }
  return tally;
}

RunResult run_once(const RunConfig& config, const FeatureStore& train_store, const FeatureStore& test_store, std::uint64_t seed,
                   const StateObserver& observer) {
  check_stores(train_store, test_store);
  config.classifier.validate();
  config.strategy.validate();
  if (config.samples_per_class && *config.samples_per_class == 0) {
    throw ContractError(kModule, "samples per class must be >= 1");
  }

  const auto ids = train_store.class_ids();
  auto schedule = build_schedule(ids.size(), config.initial_count, config.increments, seed);
  auto remap = [&](std::vector<ClassId>& v) {
    for (auto& c : v) c = ids[c];
  };
  remap(schedule.initial_classes);
  for (auto& s : schedule.states) remap(s);

  if (config.method == Method::deesil) {
    for (std::size_t t = 0; t < schedule.total_states(); ++t) {
      if (schedule.classes_of(t).size() < 2) {
        throw ProtocolError(kModule, "deesil needs at least two classes per state; state " + std::to_string(t) +
                                         " has " + std::to_string(schedule.classes_of(t).size()));
      }
    }
  }

  TrainConfig classifier = config.classifier;
  classifier.seed = mix_seed(seed, 3);
  SelectionStrategy strategy = config.strategy;
  strategy.seed = mix_seed(seed, 2);
  const std::size_t samples = config.samples_per_class.value_or(train_store.max_class_count());

  std::map<ClassId, DenseMatrix> test_rows;
  for (auto id : ids) test_rows.emplace(id, normalized_rows(test_store.matrix(id)));

  TrainFeed feed(train_store);
  PrototypeRegistry registry;
  RunResult result;
  std::vector<ClassId> seen;
  ClassifierBank bank;

  for (std::size_t t = 0; t < schedule.total_states(); ++t) {
    const auto& arriving = schedule.classes_of(t);
    // Training rows live only for the duration of their arrival state.
    std::map<ClassId, DenseMatrix> working;
    for (auto id : arriving) {
      DenseMatrix rows = feed.fetch(id, t).to_dense();
      if (config.translation_space == TranslationSpace::normalized) rows = l2_normalize_rows(rows);
      registry.insert(compute_prototype(id, rows, static_cast<int>(t)));
      working.emplace(id, std::move(rows));
    }
    seen.insert(seen.end(), arriving.begin(), arriving.end());

    switch (config.method) {
      case Method::ncm:
        bank = ncm_bank(registry);
        break;
      case Method::deesil: {
        LabeledRows input;
        for (const auto& [id, rows] : working) input.emplace(id, l2_normalize_rows(rows));
        bank.append(train(input, classifier));
        break;
      }
      case Method::fetril: {
        LabeledRows input;
        for (const auto& [id, rows] : working) input.emplace(id, l2_normalize_rows(rows));
        if (t > 0) {
          std::vector<NewClassView> views;
          for (const auto& [id, rows] : working) views.push_back({&registry.at(id), &rows});
          for (const auto& [id, proto] : registry.all()) {
            if (working.contains(id)) continue;
            auto pseudo = generate_for_past_class(proto, views, strategy, samples);
            input.emplace(id, l2_normalize_rows(pseudo.features));
          }
        }
        bank = train(input, classifier);
        break;
      }
    }
    bank.trained_in_state = static_cast<int>(t);

    std::vector<ClassId> seen_sorted = seen;
    std::sort(seen_sorted.begin(), seen_sorted.end());
    result.reports.push_back(make_state_report(static_cast<int>(t), evaluate(bank, test_rows, seen_sorted), arriving));
    if (observer) observer(StateSnapshot{t, registry, bank, result.reports.back()});
  }

  result.schedule = std::move(schedule);
  result.final_bank = std::move(bank);
  result.fetch_log = feed.log();
  return result;
}

std::vector<RunResult> run(const RunConfig& config, const FeatureStore& train_store, const FeatureStore& test_store) {
  if (config.repeats == 0) throw ContractError(kModule, "repeats must be >= 1");
  std::vector<RunResult> out;
  for (std::size_t r = 0; r < config.repeats; ++r) out.push_back(run_once(config, train_store, test_store, repeat_seed(config.seed, r)));
  return out;
}

double joint_upper_bound(const FeatureStore& train_store, const FeatureStore& test_store, const TrainConfig& config) {
  check_stores(train_store, test_store);
  LabeledRows input;
  std::map<ClassId, DenseMatrix> test_rows;
  const auto ids = train_store.class_ids();
  for (auto id : ids) {
    input.emplace(id, normalized_rows(train_store.matrix(id)));
    test_rows.emplace(id, normalized_rows(test_store.matrix(id)));
  }
  const auto bank = train(input, config);
  const auto report = make_state_report(0, evaluate(bank, test_rows, ids), ids);
  return report.top1;
}

}  // namespace fetril
