#include "fetril/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fetril/errors.hpp"
#include "fetril/metrics.hpp"

namespace fetril::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "cli";

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(kModule, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(kModule, "cannot write " + path.string());
  out << text;
}

nlohmann::json parse_json_file(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kModule, path.string() + " is not valid JSON: " + e.what());
  }
}

std::string neg_ratio_text(const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : "all"; }

std::optional<std::size_t> parse_neg_ratio(const std::string& text) {
  if (text == "all") return std::nullopt;
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto r = std::stoull(text);
    if (r >= 1) return r;
  }
  throw ContractError(kModule, "--neg-ratio must be 'all' or a positive integer, got '" + text + "'");
}

nlohmann::ordered_json synth_to_json(const SynthSpec& s) {
  return {{"classes", s.num_classes}, {"dim", s.dim},     {"samples", s.samples_per_class}, {"scale", s.class_center_scale},
          {"sigma", s.within_class_sigma}, {"seed", s.seed}, {"preset", to_string(s.preset)}};
}

SynthSpec synth_from_json(const nlohmann::json& j) {
  auto spec = SynthSpec::from_preset(parse_preset(j.value("preset", std::string("easy"))), j.value("classes", 20),
                                     j.value("dim", 64), j.value("samples", 100), j.value("seed", std::uint64_t{0}));
  if (j.contains("scale")) spec.class_center_scale = j.at("scale").get<double>();
  if (j.contains("sigma")) spec.within_class_sigma = j.at("sigma").get<double>();
  return spec;
}

// ---------------------------------------------------------------------------
// run

struct RunFlags {
  std::string config_path, manifest, test_manifest, method, strategy, classifier, loss, neg_ratio, translate_space, out;
  std::size_t initial = 0, states = 0, repeats = 0, samples = 0, max_epochs = 0;
  double reg_c = 0, tolerance = 0;
  std::uint64_t seed = 0;
  bool random_replacement = false, save_bank = false;
};

nlohmann::ordered_json repeat_summary(const RunResult& r, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["average_incremental_accuracy"] = r.average_incremental_accuracy();
  j["schedule"] = {{"initial", r.schedule.initial_classes}, {"states", r.schedule.states}};
  return j;
}

int cmd_run(CLI::App& sub, const RunFlags& flags, std::ostream& out) {
  ExperimentConfig config;
  if (sub.count("--config")) apply_json(config, parse_json_file(flags.config_path));

  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--manifest")) config.manifest = flags.manifest;
  if (given("--test-manifest")) config.test_manifest = flags.test_manifest;
  if (given("--initial")) config.run.initial_count = flags.initial;
  if (given("--states")) config.run.increments = flags.states;
  if (given("--method")) config.run.method = parse_method(flags.method);
  if (given("--repeats")) config.run.repeats = flags.repeats;
  if (given("--strategy")) config.run.strategy = SelectionStrategy::parse(flags.strategy);
  if (given("--random-replacement")) config.run.strategy.random_with_replacement = flags.random_replacement;
  if (given("--samples-per-class")) config.run.samples_per_class = flags.samples;
  if (given("--classifier")) config.run.classifier.variant = parse_variant(flags.classifier);
  if (given("--loss")) config.run.classifier.loss = parse_loss(flags.loss);
  if (given("--neg-ratio")) config.run.classifier.neg_ratio = parse_neg_ratio(flags.neg_ratio);
  if (given("--reg-c")) config.run.classifier.reg_c = flags.reg_c;
  if (given("--tolerance")) config.run.classifier.tolerance = flags.tolerance;
  if (given("--max-epochs")) config.run.classifier.max_epochs = flags.max_epochs;
  if (given("--seed")) config.run.seed = flags.seed;
  if (given("--translate-space")) config.run.translation_space = parse_translation_space(flags.translate_space);
  if (given("--out")) config.out_dir = flags.out;
  if (given("--save-bank")) config.save_bank = flags.save_bank;

  const fs::path out_dir = config.out_dir;
  if (config.manifest.empty() && config.synth) {
    write_synth(*config.synth, out_dir / "data");
    config.manifest = fs::absolute(out_dir / "data" / "train.json").string();
    config.test_manifest = fs::absolute(out_dir / "data" / "test.json").string();
  }
  if (config.manifest.empty()) throw UsageError("run: --manifest is required");
  if (config.test_manifest.empty()) throw UsageError("run: --test-manifest is required");
  if (config.run.initial_count == 0) throw UsageError("run: --initial is required");

  const auto train_store = load_dataset(config.manifest);
  const auto test_store = load_dataset(config.test_manifest);
  config.manifest = fs::absolute(config.manifest).string();
  config.test_manifest = fs::absolute(config.test_manifest).string();

  fs::create_directories(out_dir);
  write_text(out_dir / "config.json", to_json(config).dump(2) + "\n");

  std::vector<std::vector<StateRow>> per_repeat;
  nlohmann::ordered_json repeats = nlohmann::ordered_json::array();
  double total = 0.0;
  for (std::size_t r = 0; r < config.run.repeats; ++r) {
    const auto seed = repeat_seed(config.run.seed, r);
    const auto result = run_once(config.run, train_store, test_store, seed);
    std::vector<StateRow> rows;
    for (const auto& rep : result.reports) rows.push_back(to_row(rep));
    const auto dir = out_dir / ("repeat_" + std::to_string(r));
    write_text(dir / "states.csv", format_states_csv(rows));
    auto summary = repeat_summary(result, seed);
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    if (config.save_bank) save_bank(dir / "bank_final.ftrlw", result.final_bank);
    total += result.average_incremental_accuracy();
    repeats.push_back(std::move(summary));
    per_repeat.push_back(std::move(rows));
    out << "repeat " << r << ": average incremental accuracy " << result.average_incremental_accuracy() << "\n";
  }
  const auto mean = mean_rows(per_repeat);
  write_text(out_dir / "states.csv", format_states_csv(mean));

  nlohmann::ordered_json summary;
  summary["method"] = to_string(config.run.method);
  summary["strategy"] = config.run.strategy.to_string();
  summary["classifier"] = to_string(config.run.classifier.variant);
  summary["neg_ratio"] = neg_ratio_text(config.run.classifier.neg_ratio);
  summary["initial"] = config.run.initial_count;
  summary["states"] = config.run.increments;
  summary["repeats"] = config.run.repeats;
  summary["average_incremental_accuracy"] = total / static_cast<double>(config.run.repeats);
  summary["per_repeat"] = std::move(repeats);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  out << "mean average incremental accuracy " << total / static_cast<double>(config.run.repeats) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// summarize

int cmd_summarize(const std::vector<std::string>& dirs, bool as_json, std::ostream& out) {
  if (dirs.empty()) throw UsageError("summarize: at least one result directory is required");
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  double total = 0.0;
  for (const auto& d : dirs) {
    const fs::path dir = d;
    const auto states = parse_states_csv(read_text(dir / "states.csv"));
    std::string method = "?";
    std::string strategy = "?";
    std::size_t increments = states.empty() ? 0 : states.size() - 1;
    if (fs::exists(dir / "config.json")) {
      const auto cfg = parse_json_file(dir / "config.json");
      method = cfg.value("method", method);
      strategy = cfg.value("strategy", strategy);
      increments = cfg.value("states", increments);
    }
    const double acc = average_incremental_accuracy(std::span<const StateRow>(states));
    total += acc;
    rows.push_back({{"dir", d}, {"method", method}, {"strategy", strategy}, {"T", increments},
                    {"average_incremental_accuracy", acc}});
  }
  const double mean = total / static_cast<double>(dirs.size());
  if (as_json) {
    out << nlohmann::ordered_json{{"rows", rows}, {"mean", mean}}.dump(2) << "\n";
    return 0;
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-10s %4s %8s  %s\n", "method", "strategy", "T", "avg_acc", "dir");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-8s %-10s %4zu %8.2f  %s\n", r["method"].get<std::string>().c_str(),
                  r["strategy"].get<std::string>().c_str(), r["T"].get<std::size_t>(),
                  100.0 * r["average_incremental_accuracy"].get<double>(), r["dir"].get<std::string>().c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "mean over %zu: %.2f\n", dirs.size(), 100.0 * mean);
  out << line;
  return 0;
}

// ---------------------------------------------------------------------------
// extract-check

int cmd_extract_check(const std::vector<std::string>& manifests, std::size_t expected_dim, std::ostream& out,
                      std::ostream& err) {
  if (manifests.empty()) throw UsageError("extract-check: at least one --manifest is required");
  int status = 0;
  for (const auto& m : manifests) {
    try {
      const auto store = load_dataset(m);
      if (expected_dim != 0 && store.dim() != expected_dim) {
        throw ConsistencyError("feature_store", m + " has dim " + std::to_string(store.dim()) + ", expected " +
                                                    std::to_string(expected_dim));
      }
      const auto base = fs::path(m).parent_path();
      std::size_t rows = 0;
      for (const auto& entry : store.manifest().classes) {
        const auto bytes = read_file_bytes(base / entry.path);
        if (encode_feature_file(store.matrix(entry.class_id)) != bytes) {
          throw FormatError("feature_store", entry.path + " does not round-trip byte-identically");
        }
        rows += entry.count;
      }
      out << "ok " << m << ": " << store.num_classes() << " classes, dim " << store.dim() << ", " << rows
          << " rows\n";
    } catch (const Error& e) {
      err << "FAIL " << m << ": " << e.what() << "\n";
      status = 1;
    }
  }
  return status;
}

}  // namespace

nlohmann::ordered_json to_json(const ExperimentConfig& config) {
  const auto& r = config.run;
  nlohmann::ordered_json j;
  j["manifest"] = config.manifest;
  j["test_manifest"] = config.test_manifest;
  j["initial"] = r.initial_count;
  j["states"] = r.increments;
  j["method"] = to_string(r.method);
  j["strategy"] = r.strategy.to_string();
  j["random_replacement"] = r.strategy.random_with_replacement;
  j["samples_per_class"] = r.samples_per_class ? nlohmann::ordered_json(*r.samples_per_class) : nlohmann::ordered_json();
  j["classifier"] = to_string(r.classifier.variant);
  j["loss"] = to_string(r.classifier.loss);
  j["neg_ratio"] = neg_ratio_text(r.classifier.neg_ratio);
  j["reg_c"] = r.classifier.reg_c;
  j["tolerance"] = r.classifier.tolerance;
  j["max_epochs"] = r.classifier.max_epochs;
  j["softmax_epochs"] = r.classifier.softmax_epochs;
  j["softmax_initial_lr"] = r.classifier.softmax_initial_lr;
  j["softmax_lr_decay"] = r.classifier.softmax_lr_decay;
  j["softmax_patience"] = r.classifier.softmax_patience;
  j["softmax_batch_size"] = r.classifier.softmax_batch_size;
  j["translate_space"] = to_string(r.translation_space);
  j["seed"] = r.seed;
  j["repeats"] = r.repeats;
  j["out"] = config.out_dir;
  j["save_bank"] = config.save_bank;
  if (config.synth) j["synth"] = synth_to_json(*config.synth);
  return j;
}

void apply_json(ExperimentConfig& config, const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError(kModule, "config must be a JSON object");
  auto& r = config.run;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "manifest") config.manifest = v.get<std::string>();
      else if (key == "test_manifest") config.test_manifest = v.get<std::string>();
      else if (key == "initial") r.initial_count = v.get<std::size_t>();
      else if (key == "states") r.increments = v.get<std::size_t>();
      else if (key == "method") r.method = parse_method(v.get<std::string>());
      else if (key == "strategy") {
        const bool replacement = r.strategy.random_with_replacement;
        r.strategy = SelectionStrategy::parse(v.get<std::string>());
        r.strategy.random_with_replacement = replacement;
      } else if (key == "random_replacement") r.strategy.random_with_replacement = v.get<bool>();
      else if (key == "samples_per_class") {
        if (v.is_null()) r.samples_per_class.reset();
        else r.samples_per_class = v.get<std::size_t>();
      } else if (key == "classifier") r.classifier.variant = parse_variant(v.get<std::string>());
      else if (key == "loss") r.classifier.loss = parse_loss(v.get<std::string>());
      else if (key == "neg_ratio") r.classifier.neg_ratio = v.is_string() ? parse_neg_ratio(v.get<std::string>())
                                                                           : std::optional<std::size_t>(v.get<std::size_t>());
      else if (key == "reg_c") r.classifier.reg_c = v.get<double>();
      else if (key == "tolerance") r.classifier.tolerance = v.get<double>();
      else if (key == "max_epochs") r.classifier.max_epochs = v.get<std::size_t>();
      else if (key == "softmax_epochs") r.classifier.softmax_epochs = v.get<std::size_t>();
      else if (key == "softmax_initial_lr") r.classifier.softmax_initial_lr = v.get<double>();
      else if (key == "softmax_lr_decay") r.classifier.softmax_lr_decay = v.get<double>();
      else if (key == "softmax_patience") r.classifier.softmax_patience = v.get<std::size_t>();
      else if (key == "softmax_batch_size") r.classifier.softmax_batch_size = v.get<std::size_t>();
      else if (key == "translate_space") r.translation_space = parse_translation_space(v.get<std::string>());
      else if (key == "seed") r.seed = v.get<std::uint64_t>();
      else if (key == "repeats") r.repeats = v.get<std::size_t>();
      else if (key == "out") config.out_dir = v.get<std::string>();
      else if (key == "save_bank") config.save_bank = v.get<bool>();
      else if (key == "synth") config.synth = synth_from_json(v);
      else throw FormatError(kModule, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kModule, std::string("config value has the wrong type: ") + e.what());
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exemplar-free class-incremental learning in a frozen feature space"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a seeded Gaussian-cluster feature dataset");
  std::size_t s_classes = 20, s_dim = 64, s_samples = 100;
  double s_sigma = 0, s_scale = 0;
  std::uint64_t s_seed = 0;
  std::string s_preset = "easy", s_out;
  synth->add_option("--classes", s_classes, "Number of classes")->check(CLI::PositiveNumber);
  synth->add_option("--dim", s_dim, "Feature dimensionality")->check(CLI::PositiveNumber);
  synth->add_option("--samples", s_samples, "Training rows per class")->check(CLI::PositiveNumber);
  synth->add_option("--sigma", s_sigma, "Within-class standard deviation (overrides preset)");
  synth->add_option("--scale", s_scale, "Half-width of the center hypercube (overrides preset)");
  synth->add_option("--preset", s_preset, "easy or hard")->check(CLI::IsMember({"easy", "hard"}));
  synth->add_option("--seed", s_seed, "Generator seed");
  synth->add_option("--out", s_out, "Output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the incremental protocol and write per-state results");
  RunFlags f;
  run->add_option("--config", f.config_path, "Flat JSON experiment config; flags override its values");
  run->add_option("--manifest", f.manifest, "Training manifest");
  run->add_option("--test-manifest", f.test_manifest, "Test manifest");
  run->add_option("--initial", f.initial, "Classes in the initial state");
  run->add_option("--states", f.states, "Number of incremental states");
  run->add_option("--method", f.method, "fetril, ncm or deesil")->check(CLI::IsMember({"fetril", "ncm", "deesil"}));
  run->add_option("--repeats", f.repeats, "Repeats with derived seeds")->check(CLI::PositiveNumber);
  run->add_option("--strategy", f.strategy, "k:<int>, random or herding");
  run->add_flag("--random-replacement", f.random_replacement, "Random strategy draws with replacement");
  run->add_option("--samples-per-class", f.samples, "Pseudo-features per past class")->check(CLI::PositiveNumber);
  run->add_option("--classifier", f.classifier, "hinge or softmax")->check(CLI::IsMember({"hinge", "softmax"}));
  run->add_option("--loss", f.loss, "squared-hinge or hinge")->check(CLI::IsMember({"squared-hinge", "hinge"}));
  run->add_option("--neg-ratio", f.neg_ratio, "all or negatives per positive");
  run->add_option("--reg-c", f.reg_c, "Regularization C")->check(CLI::PositiveNumber);
  run->add_option("--tolerance", f.tolerance, "Solver tolerance")->check(CLI::PositiveNumber);
  run->add_option("--max-epochs", f.max_epochs, "Solver iteration cap")->check(CLI::PositiveNumber);
  run->add_option("--seed", f.seed, "Base seed");
  run->add_option("--translate-space", f.translate_space, "raw or normalized")
      ->check(CLI::IsMember({"raw", "normalized"}));
  run->add_option("--out", f.out, "Output directory");
  run->add_flag("--save-bank", f.save_bank, "Write the final classifier bank of each repeat");

  // summarize
  auto* summarize = app.add_subcommand("summarize", "Average incremental accuracy of result directories");
  std::vector<std::string> dirs;
  bool as_json = false;
  summarize->add_option("dirs", dirs, "Result directories written by run")->required();
  summarize->add_flag("--json", as_json, "Emit JSON instead of a table");

  // extract-check
  auto* check = app.add_subcommand("extract-check", "Validate feature files and manifests");
  std::vector<std::string> manifests;
  std::size_t expected_dim = 0;
  check->add_option("--manifest", manifests, "Manifest to validate (repeatable)")->required();
  check->add_option("--dim", expected_dim, "Expected feature dimensionality");

  // schedule
  auto* sched = app.add_subcommand("schedule", "Print the class-to-state assignment for a seed");
  std::size_t c_classes = 0, c_initial = 0, c_states = 0;
  std::uint64_t c_seed = 0;
  sched->add_option("--classes", c_classes, "Number of classes")->required();
  sched->add_option("--initial", c_initial, "Classes in the initial state")->required();
  sched->add_option("--states", c_states, "Number of incremental states")->required();
  sched->add_option("--seed", c_seed, "Schedule seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      auto spec = SynthSpec::from_preset(parse_preset(s_preset), s_classes, s_dim, s_samples, s_seed);
      if (synth->count("--sigma")) spec.within_class_sigma = s_sigma;
      if (synth->count("--scale")) spec.class_center_scale = s_scale;
      write_synth(spec, s_out);
      write_text(fs::path(s_out) / "synth.json", synth_to_json(spec).dump(2) + "\n");
      out << "wrote " << spec.num_classes << " classes to " << s_out << "\n";
      return 0;
    }
    if (run->parsed()) return cmd_run(*run, f, out);
    if (summarize->parsed()) return cmd_summarize(dirs, as_json, out);
    if (check->parsed()) return cmd_extract_check(manifests, expected_dim, out, err);
    if (sched->parsed()) {
      const auto s = build_schedule(c_classes, c_initial, c_states, c_seed);
      out << nlohmann::ordered_json{{"seed", s.seed}, {"initial", s.initial_classes}, {"states", s.states}}.dump(2)
          << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fetril::cli
