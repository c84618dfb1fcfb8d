#include <doctest.h>

#include <random>

#include "fetril/errors.hpp"
#include "fetril/metrics.hpp"
#include "fetril/protocol.hpp"
#include "fetril/synth.hpp"

using namespace fetril;

namespace {

StateReport report_with_top1(int idx, double top1) {
  StateReport r;
  r.state_idx = idx;
  r.top1 = top1;
  return r;
}

}  // namespace

TEST_CASE("average incremental accuracy") {
  const std::vector<StateReport> three{report_with_top1(0, 0.8), report_with_top1(1, 0.6), report_with_top1(2, 0.4)};
  CHECK(average_incremental_accuracy(three) == doctest::Approx(0.6).epsilon(1e-12));
  const std::vector<StateReport> one{report_with_top1(0, 0.9)};
  CHECK(average_incremental_accuracy(one) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK_THROWS_AS(average_incremental_accuracy(std::span<const StateReport>{}), ContractError);
  CHECK_THROWS_AS(average_incremental_accuracy(std::span<const StateRow>{}), ContractError);
}

TEST_CASE("past/new split") {
  PerClassTally tally;
  tally[1] = {45, 50};
  tally[2] = {40, 50};
  tally[3] = {20, 50};
  tally[4] = {30, 50};
  const std::vector<ClassId> current{3, 4};
  const auto split = split_past_new(tally, current);
  REQUIRE(split.past_top1.has_value());
  CHECK(*split.past_top1 == doctest::Approx(0.85));
  CHECK(split.new_top1 == doctest::Approx(0.5));
  CHECK(split.past == ClassTally{85, 100});
  CHECK(split.fresh == ClassTally{50, 100});

  const auto report = make_state_report(1, tally, current);
  CHECK(report.top1 == doctest::Approx(135.0 / 200.0));
  CHECK(report.seen_class_count == 4);

  SUBCASE("state 0 has no past") {
    const std::vector<ClassId> all{1, 2, 3, 4};
    const auto s0 = split_past_new(tally, all);
    CHECK_FALSE(s0.past_top1.has_value());
    CHECK(s0.new_top1 == doctest::Approx(135.0 / 200.0));
  }
}

TEST_CASE("property: top1 decomposes into past and new by sample counts") {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 200; ++trial) {
    PerClassTally tally;
    const std::size_t classes = 2 + rng() % 20;
    std::vector<ClassId> current;
    for (ClassId c = 0; c < classes; ++c) {
      const std::size_t total = 1 + rng() % 40;
      tally[c] = {rng() % (total + 1), total};
      if (c + 1 == classes || rng() % 3 == 0) current.push_back(c);
    }
    if (current.size() == classes) current.pop_back();
    if (current.empty()) current.push_back(static_cast<ClassId>(classes - 1));
    const auto report = make_state_report(1, tally, current);
    const auto split = split_past_new(tally, current);
    // Oracle: plain tally sums.
    std::size_t correct = 0, total = 0;
    for (const auto& [_, t] : tally) {
      correct += t.correct;
      total += t.total;
    }
    CHECK(report.top1 == doctest::Approx(static_cast<double>(correct) / static_cast<double>(total)).epsilon(1e-12));
    REQUIRE(report.past_top1.has_value());
    const double n_past = static_cast<double>(split.past.total);
    const double n_new = static_cast<double>(split.fresh.total);
    CHECK(report.top1 ==
          doctest::Approx((n_past * *report.past_top1 + n_new * report.new_top1) / (n_past + n_new)).epsilon(1e-9));
  }
}

TEST_CASE("states.csv round trip and mean over repeats") {
  std::vector<StateRow> rows{{0, 10, 0.9, std::nullopt, 0.9}, {1, 15, 0.7, 0.75, 0.6}, {2, 20, 0.5, 0.55, 0.35}};
  const auto text = format_states_csv(rows);
  CHECK(text.rfind(kStatesCsvHeader, 0) == 0);
  CHECK(text.find("0,10,0.90000000000000002,,0.90000000000000002") != std::string::npos);
  const auto back = parse_states_csv(text);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].state_idx == rows[i].state_idx);
    CHECK(back[i].seen_classes == rows[i].seen_classes);
    CHECK(back[i].top1 == rows[i].top1);
    CHECK(back[i].past_top1 == rows[i].past_top1);
    CHECK(back[i].new_top1 == rows[i].new_top1);
  }
  auto other = rows;
  for (auto& r : other) {
    r.top1 -= 0.1;
    r.new_top1 -= 0.1;
    if (r.past_top1) *r.past_top1 -= 0.1;
  }
  const auto mean = mean_rows({rows, other});
  CHECK(mean[1].top1 == doctest::Approx(0.65));
  CHECK(*mean[2].past_top1 == doctest::Approx(0.5));
  CHECK_FALSE(mean[0].past_top1.has_value());
  CHECK_THROWS_AS(mean_rows({rows, {rows[0]}}), ContractError);
  CHECK_THROWS_AS(parse_states_csv("nope\n1,2,3,4,5\n"), FormatError);
}

TEST_CASE("reported average matches a recomputation from states.csv") {
  const auto data = generate(SynthSpec::from_preset(SynthPreset::easy, 22, 12, 20, 3));
  RunConfig cfg;
  cfg.initial_count = 12;
  cfg.increments = 10;
  cfg.repeats = 1;
  const auto result = run_once(cfg, data.train, data.test, 9);
  REQUIRE(result.reports.size() == 11);
  std::vector<StateRow> rows;
  for (const auto& r : result.reports) rows.push_back(to_row(r));
  const auto parsed = parse_states_csv(format_states_csv(rows));
  double sum = 0;
  for (const auto& r : parsed) sum += r.top1;
  CHECK(std::abs(result.average_incremental_accuracy() - sum / 11.0) <= 1e-9);
  CHECK(parsed.back().seen_classes == 22);
}
