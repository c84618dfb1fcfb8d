#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fetril/classifier.hpp"
#include "fetril/cli.hpp"
#include "fetril/metrics.hpp"
#include "oracles.hpp"

using namespace fetril;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One synthetic dataset shared by the cases below.
const fs::path& dataset() {
  static const fs::path dir = [] {
    auto d = oracle::temp_dir("cli_data");
    const auto r = invoke({"synth", "--classes", "10", "--dim", "8", "--samples", "20", "--seed", "3", "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> run_args(const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> a{"run",       "--manifest", (dataset() / "train.json").string(), "--test-manifest",
                             (dataset() / "test.json").string(), "--initial", "4", "--states", "3",
                             "--repeats", "2",          "--out",  out.string()};
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

}  // namespace

TEST_CASE("missing manifest is a runtime error naming the path") {
  const auto r = invoke({"run", "--manifest", "/nonexistent/train.json", "--test-manifest", "/nonexistent/test.json",
                      "--initial", "2", "--states", "1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("/nonexistent/train.json") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke({"run", "--no-such-flag"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"run", "--method", "icarl"}).code == 2);
  CHECK(invoke({"run", "--manifest", "x.json"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("run writes per-state results and summarize averages them") {
  const auto out = oracle::temp_dir("cli_run");
  const auto r = invoke(run_args(out, {"--save-bank"}));
  REQUIRE(r.code == 0);
  const auto rows = parse_states_csv(slurp(out / "states.csv"));
  CHECK(rows.size() == 4);
  CHECK(rows.back().seen_classes == 10);
  for (int rep = 0; rep < 2; ++rep) {
    const auto dir = out / ("repeat_" + std::to_string(rep));
    CHECK(parse_states_csv(slurp(dir / "states.csv")).size() == 4);
    const auto bank = load_bank(dir / "bank_final.ftrlw");
    CHECK(bank.size() == 10);
    CHECK(bank.trained_in_state == 3);
  }

  const auto s = invoke({"summarize", "--json", out.string()});
  REQUIRE(s.code == 0);
  const auto doc = nlohmann::json::parse(s.out);
  double hand = 0;
  for (const auto& row : rows) hand += row.top1;
  CHECK(doc["mean"].get<double>() == doctest::Approx(hand / 4.0).epsilon(1e-12));
  CHECK(doc["rows"][0]["method"] == "fetril");

  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["average_incremental_accuracy"].get<double>() == doctest::Approx(hand / 4.0).epsilon(1e-9));

  const auto table = invoke({"summarize", out.string()});
  CHECK(table.code == 0);
  CHECK(table.out.find("fetril") != std::string::npos);
  CHECK(invoke({"summarize", (out / "nowhere").string()}).code == 1);
  fs::remove_all(out);
}

TEST_CASE("config.json reproduces the run and flags override it") {
  const auto first = oracle::temp_dir("cli_cfg_a");
  REQUIRE(invoke(run_args(first, {"--strategy", "k:2", "--neg-ratio", "3"})).code == 0);
  const auto cfg = nlohmann::json::parse(slurp(first / "config.json"));
  CHECK(cfg["strategy"] == "k:2");
  CHECK(cfg["neg_ratio"] == "3");
  CHECK(fs::path(cfg["manifest"].get<std::string>()).is_absolute());

  const auto second = oracle::temp_dir("cli_cfg_b");
  REQUIRE(invoke({"run", "--config", (first / "config.json").string(), "--out", second.string()}).code == 0);
  CHECK(slurp(first / "states.csv") == slurp(second / "states.csv"));

  const auto third = oracle::temp_dir("cli_cfg_c");
  REQUIRE(invoke({"run", "--config", (first / "config.json").string(), "--out", third.string(), "--method", "ncm",
               "--repeats", "1"})
              .code == 0);
  const auto cfg3 = nlohmann::json::parse(slurp(third / "config.json"));
  CHECK(cfg3["method"] == "ncm");
  CHECK(cfg3["strategy"] == "k:2");
  CHECK(cfg3["repeats"] == 1);

  const auto bad = oracle::temp_dir("cli_cfg_bad");
  {
    std::ofstream f(bad / "config.json");
    f << R"({"initial": 2, "bogus": 1})";
  }
  CHECK(invoke({"run", "--config", (bad / "config.json").string()}).code == 1);
  for (const auto& d : {first, second, third, bad}) fs::remove_all(d);
}

TEST_CASE("config round trip through JSON") {
  cli::ExperimentConfig c;
  c.manifest = "a.json";
  c.test_manifest = "b.json";
  c.run.initial_count = 5;
  c.run.increments = 2;
  c.run.method = Method::deesil;
  c.run.strategy = SelectionStrategy::random(0);
  c.run.strategy.random_with_replacement = true;
  c.run.classifier.neg_ratio = 10;
  c.run.classifier.variant = ClassifierVariant::softmax;
  c.run.samples_per_class = 7;
  c.synth = SynthSpec::from_preset(SynthPreset::hard, 6, 4, 10, 2);
  cli::ExperimentConfig back;
  cli::apply_json(back, nlohmann::json::parse(cli::to_json(c).dump()));
  CHECK(cli::to_json(back) == cli::to_json(c));
  CHECK(back.run.strategy.random_with_replacement);
  CHECK(back.synth->within_class_sigma == c.synth->within_class_sigma);
}

TEST_CASE("run can generate its own data from a synth block") {
  const auto out = oracle::temp_dir("cli_synth_cfg");
  {
    std::ofstream f(out / "cfg.json");
    f << R"({"initial": 3, "states": 2, "repeats": 1, "synth": {"classes": 7, "dim": 4, "samples": 12, "seed": 1}})";
  }
  REQUIRE(invoke({"run", "--config", (out / "cfg.json").string(), "--out", (out / "res").string()}).code == 0);
  CHECK(fs::exists(out / "res" / "data" / "train.json"));
  CHECK(parse_states_csv(slurp(out / "res" / "states.csv")).size() == 3);
  fs::remove_all(out);
}

TEST_CASE("extract-check accepts good data and reports corruption") {
  const auto good = invoke({"extract-check", "--manifest", (dataset() / "train.json").string(), "--dim", "8"});
  CHECK(good.code == 0);
  CHECK(good.out.find("10 classes") != std::string::npos);
  CHECK(invoke({"extract-check", "--manifest", (dataset() / "train.json").string(), "--dim", "9"}).code == 1);

  const auto copy = oracle::temp_dir("cli_corrupt");
  fs::copy(dataset(), copy, fs::copy_options::recursive);
  const auto victim = copy / "train" / "class_00002.ftrl";
  REQUIRE(fs::exists(victim));
  {
    std::ofstream f(victim, std::ios::binary | std::ios::app);
    f << "junk";
  }
  const auto bad = invoke({"extract-check", "--manifest", (copy / "train.json").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("class_00002.ftrl") != std::string::npos);
  fs::remove_all(copy);
}

TEST_CASE("schedule prints the class assignment") {
  const auto r = invoke({"schedule", "--classes", "10", "--initial", "4", "--states", "3", "--seed", "1"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["initial"].size() == 4);
  CHECK(doc["states"].size() == 3);
  CHECK(doc["states"][0].size() == 2);
  CHECK(invoke({"schedule", "--classes", "10", "--initial", "9", "--states", "3"}).code == 1);
}
