#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ccd/error.hpp"
#include "ccd/localization.hpp"
#include "ccd/rng.hpp"
#include "ccd/spectra.hpp"

using namespace ccd;

namespace {

// Run with explicit per-test coverage sets.
CoverageRun make_run(StatementId statements,
                     const std::vector<std::pair<std::vector<StatementId>,
                                                 Verdict>>& tests,
                     const std::set<StatementId>& faults) {
  CoverageRun run;
  run.program_id = "hand";
  run.statement_count = statements;
  int i = 0;
  for (const auto& [trace, verdict] : tests) {
    run.tests.push_back(TestRecord{
        ExecutionTrace{"t" + std::to_string(++i), trace}, verdict});
  }
  run.faulty_statements = faults;
  return run;
}

// Brute-force cost: independently score, sort and scan.
double oracle_cost(const SpectraCounts& counts,
                   const std::set<StatementId>& faults, Formula formula,
                   TiePolicy tie) {
  const std::size_t n = counts.ef.size();
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double ef = static_cast<double>(counts.ef[i]);
    const double ep = static_cast<double>(counts.ep[i]);
    const double f_total = static_cast<double>(counts.total_failing);
    const double p_total = static_cast<double>(counts.total_passing);
    if (ef == 0) continue;
    if (formula == Formula::Ochiai) {
      scores[i] = ef / std::sqrt(f_total * (ef + ep));
    } else {
      const double fr = ef / f_total;
      const double pr = p_total > 0 ? ep / p_total : 0.0;
      scores[i] = fr / (fr + pr);
    }
  }
  double target = -1.0;
  for (StatementId s : faults) target = std::max(target, scores[s - 1]);
  std::vector<double> sorted(scores);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::size_t higher = 0;
  while (higher < n && sorted[higher] > target) ++higher;
  std::size_t ties = 0;
  while (higher + ties < n && sorted[higher + ties] == target) ++ties;
  double examined = 0;
  if (tie == TiePolicy::Worst) examined = static_cast<double>(higher + ties);
  if (tie == TiePolicy::Best) examined = static_cast<double>(higher) + 1.0;
  if (tie == TiePolicy::Average) {
    examined = static_cast<double>(higher) + (static_cast<double>(ties) + 1) / 2;
  }
  return examined / static_cast<double>(n);
}

SpectraCounts random_counts(SplitMix64& rng, std::size_t statements) {
  SpectraCounts c;
  c.total_failing = rng.range(1, 6);
  c.total_passing = rng.range(0, 10);
  for (std::size_t i = 0; i < statements; ++i) {
    c.ef.push_back(rng.range(0, c.total_failing));
    c.ep.push_back(rng.range(0, c.total_passing));
  }
  return c;
}

} // namespace

TEST_CASE("suspiciousness spot values") {
  SpectraCounts c;
  c.total_failing = 2;
  c.total_passing = 3;
  c.ef = {2, 0, 1};
  c.ep = {0, 2, 1};

  const auto ochiai = suspiciousness(c, Formula::Ochiai);
  CHECK(ochiai[0] == doctest::Approx(1.0));        // ef=2, ep=0, F=2
  CHECK(ochiai[1] == 0.0);                         // never covered by a failure
  CHECK(ochiai[2] == doctest::Approx(0.5));        // 1/sqrt(2*2)

  const auto tarantula = suspiciousness(c, Formula::Tarantula);
  CHECK(tarantula[0] == doctest::Approx(1.0));
  CHECK(tarantula[1] == 0.0);
  CHECK(tarantula[2] ==
        doctest::Approx((0.5) / (0.5 + 1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("tarantula handles a passing-free view") {
  SpectraCounts c;
  c.total_failing = 2;
  c.total_passing = 0;
  c.ef = {1};
  c.ep = {0};
  const auto scores = suspiciousness(c, Formula::Tarantula);
  CHECK(scores[0] == doctest::Approx(1.0));
}

TEST_CASE("suspiciousness requires a failing test") {
  SpectraCounts c;
  c.total_failing = 0;
  c.total_passing = 2;
  c.ef = {0};
  c.ep = {1};
  CHECK_THROWS_AS(suspiciousness(c, Formula::Ochiai), Error);
}

TEST_CASE("formula oracle over random spectra") {
  SplitMix64 rng(17);
  for (int iter = 0; iter < 100; ++iter) {
    const SpectraCounts c = random_counts(rng, 10);
    for (Formula f : {Formula::Ochiai, Formula::Tarantula}) {
      const auto scores = suspiciousness(c, f);
      for (std::size_t i = 0; i < 10; ++i) {
        const double ef = static_cast<double>(c.ef[i]);
        const double ep = static_cast<double>(c.ep[i]);
        double want = 0.0;
        if (ef > 0) {
          if (f == Formula::Ochiai) {
            want = ef / std::sqrt(static_cast<double>(c.total_failing) *
                                  (ef + ep));
          } else {
            const double fr = ef / static_cast<double>(c.total_failing);
            const double pr =
                c.total_passing > 0
                    ? ep / static_cast<double>(c.total_passing)
                    : 0.0;
            want = fr / (fr + pr);
          }
        }
        CHECK(scores[i] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("uniquely top-ranked fault among 45 statements") {
  SpectraCounts c;
  c.total_failing = 2;
  c.total_passing = 10;
  c.ef.assign(45, 0);
  c.ep.assign(45, 0);
  c.ef[14] = 2; // statement 15 covered by both failures only
  for (std::size_t i = 0; i < 45; ++i) {
    if (i != 14) {
      c.ef[i] = 1;
      c.ep[i] = 5;
    }
  }
  const double cost =
      localization_cost(c, {15}, Formula::Ochiai, TiePolicy::Worst);
  CHECK(cost == doctest::Approx(1.0 / 45.0).epsilon(1e-12));
}

TEST_CASE("all statements tied under worst policy costs 1") {
  SpectraCounts c;
  c.total_failing = 1;
  c.total_passing = 0;
  c.ef.assign(8, 1);
  c.ep.assign(8, 0);
  CHECK(localization_cost(c, {3}, Formula::Ochiai, TiePolicy::Worst) == 1.0);
  CHECK(localization_cost(c, {3}, Formula::Ochiai, TiePolicy::Best) ==
        doctest::Approx(1.0 / 8.0));
  CHECK(localization_cost(c, {3}, Formula::Ochiai, TiePolicy::Average) ==
        doctest::Approx((8.0 + 1.0) / 2.0 / 8.0));
}

TEST_CASE("cost matches the sort-and-scan oracle") {
  SplitMix64 rng(23);
  for (int iter = 0; iter < 100; ++iter) {
    const SpectraCounts c = random_counts(rng, 10);
    const std::set<StatementId> faults{
        static_cast<StatementId>(rng.range(1, 10))};
    for (Formula f : {Formula::Ochiai, Formula::Tarantula}) {
      for (TiePolicy t :
           {TiePolicy::Worst, TiePolicy::Best, TiePolicy::Average}) {
        CHECK(localization_cost(c, faults, f, t) ==
              doctest::Approx(oracle_cost(c, faults, f, t)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("cost preconditions") {
  SpectraCounts c;
  c.total_failing = 1;
  c.ef = {1};
  c.ep = {0};
  CHECK_THROWS_AS(localization_cost(c, {}, Formula::Ochiai, TiePolicy::Worst),
                  Error);
  CHECK_THROWS_AS(localization_cost(c, {9}, Formula::Ochiai, TiePolicy::Worst),
                  Error);

  SpectraCounts no_failing;
  no_failing.total_failing = 0;
  no_failing.total_passing = 1;
  no_failing.ef = {0};
  no_failing.ep = {1};
  CHECK_THROWS_AS(
      localization_cost(no_failing, {1}, Formula::Ochiai, TiePolicy::Worst),
      Error);
}

TEST_CASE("collect_spectra counts hits once per test") {
  const CoverageRun run = make_run(
      3,
      {{{1, 1, 2}, Verdict::Passing}, {{2, 3}, Verdict::Failing}},
      {3});
  const SpectraCounts c = collect_spectra(run);
  CHECK(c.total_failing == 1);
  CHECK(c.total_passing == 1);
  CHECK(c.ef == std::vector<std::int64_t>{0, 1, 1});
  CHECK(c.ep == std::vector<std::int64_t>{1, 1, 0});
}

TEST_CASE("flip preserves counts, trim removes them") {
  const CoverageRun run = make_run(
      3,
      {{{1}, Verdict::Passing},
       {{1, 2}, Verdict::Passing},
       {{2, 3}, Verdict::Failing}},
      {3});

  const SpectraCounts flipped = collect_spectra(run, {"t1"}, {});
  CHECK(flipped.total_failing == 2);
  CHECK(flipped.total_passing == 1);
  CHECK(flipped.total_failing + flipped.total_passing == 3);
  CHECK(flipped.ef == std::vector<std::int64_t>{1, 1, 1});

  const SpectraCounts trimmed = collect_spectra(run, {}, {"t1"});
  CHECK(trimmed.total_failing == 1);
  CHECK(trimmed.total_passing == 1);
  CHECK(trimmed.ep == std::vector<std::int64_t>{1, 1, 0});
}

TEST_CASE("strategy on a fixture where the CC test hides the fault") {
  // Fault is statement 3; the only passing test covering it is t1 (the CC
  // test). Statement 2 ties with the fault until t1 is flipped or trimmed.
  const CoverageRun run = make_run(
      5,
      {{{3}, Verdict::Passing},          // t1: CC
       {{1, 2, 4}, Verdict::Passing},    // t2
       {{4, 5}, Verdict::Passing},       // t3
       {{2, 3}, Verdict::Failing}},      // t4
      {3});

  const CostReport none = apply_strategy(run, {"t1"}, Strategy::None,
                                         Variant::Both, Formula::Ochiai,
                                         TiePolicy::Worst);
  CHECK(none.original_cost == doctest::Approx(2.0 / 5.0));
  CHECK(*none.all_at_once == none.original_cost);
  CHECK(none.one_at_a_time.empty());

  for (Strategy strategy : {Strategy::Trim, Strategy::Flip}) {
    const CostReport report =
        apply_strategy(run, {"t1"}, strategy, Variant::Both, Formula::Ochiai,
                       TiePolicy::Worst);
    CHECK(report.original_cost == doctest::Approx(2.0 / 5.0));
    REQUIRE(report.all_at_once.has_value());
    CHECK(*report.all_at_once == doctest::Approx(1.0 / 5.0));
    CHECK(*report.all_at_once < report.original_cost);

    // |CT| = 1: one-at-a-time equals all-at-once.
    REQUIRE(report.one_at_a_time.size() == 1);
    CHECK(report.one_at_a_time[0] == *report.all_at_once);
    CHECK(report.per_change.at("t1") == *report.all_at_once);

    // Independent recomputation of the single change.
    const SpectraCounts changed =
        strategy == Strategy::Flip ? collect_spectra(run, {"t1"}, {})
                                   : collect_spectra(run, {}, {"t1"});
    CHECK(*report.all_at_once ==
          doctest::Approx(
              oracle_cost(changed, {3}, Formula::Ochiai, TiePolicy::Worst)));
  }
}

TEST_CASE("empty ct is a no-op strategy") {
  const CoverageRun run = make_run(
      3, {{{1, 2}, Verdict::Passing}, {{2, 3}, Verdict::Failing}}, {3});
  const CostReport report =
      apply_strategy(run, {}, Strategy::Trim, Variant::Both, Formula::Ochiai,
                     TiePolicy::Worst);
  CHECK(report.one_at_a_time.empty());
  CHECK(*report.all_at_once == report.original_cost);
}

TEST_CASE("unknown or non-passing ids are rejected") {
  const CoverageRun run = make_run(
      3, {{{1, 2}, Verdict::Passing}, {{2, 3}, Verdict::Failing}}, {3});
  CHECK_THROWS_AS(apply_strategy(run, {"ghost"}, Strategy::Trim, Variant::Both,
                                 Formula::Ochiai, TiePolicy::Worst),
                  Error);
  // t2 exists but fails; strategies only apply to passing tests.
  CHECK_THROWS_AS(apply_strategy(run, {"t2"}, Strategy::Flip, Variant::Both,
                                 Formula::Ochiai, TiePolicy::Worst),
                  Error);
}

TEST_CASE("one_at_a_time reports distinct values only") {
  // Two CC tests with identical coverage produce the same single-change
  // cost, so the distinct set collapses to one value.
  const CoverageRun run = make_run(
      4,
      {{{3}, Verdict::Passing},
       {{3}, Verdict::Passing},
       {{1, 2}, Verdict::Passing},
       {{2, 3}, Verdict::Failing}},
      {3});
  const CostReport report =
      apply_strategy(run, {"t1", "t2"}, Strategy::Trim, Variant::Both,
                     Formula::Ochiai, TiePolicy::Worst);
  CHECK(report.per_change.size() == 2);
  CHECK(report.one_at_a_time.size() == 1);
  CHECK(std::is_sorted(report.one_at_a_time.begin(),
                       report.one_at_a_time.end()));
}

TEST_CASE("variant selects which costs are computed") {
  const CoverageRun run = make_run(
      3, {{{3}, Verdict::Passing}, {{2, 3}, Verdict::Failing}}, {3});
  const CostReport one =
      apply_strategy(run, {"t1"}, Strategy::Trim, Variant::OneAtATime,
                     Formula::Ochiai, TiePolicy::Worst);
  CHECK_FALSE(one.all_at_once.has_value());
  CHECK(one.one_at_a_time.size() == 1);

  const CostReport all =
      apply_strategy(run, {"t1"}, Strategy::Trim, Variant::AllAtOnce,
                     Formula::Ochiai, TiePolicy::Worst);
  CHECK(all.all_at_once.has_value());
  CHECK(all.one_at_a_time.empty());
}

TEST_CASE("cost table csv renders brace sets and quoting") {
  CostTableRow row;
  row.program = "demo";
  row.one_at_a_time[0] = {0.08, 0.06};
  row.one_at_a_time[1] = {0.05};
  row.one_at_a_time[2] = {0.05};
  row.all_at_once = {0.06, 0.05, 0.05};
  row.original_cost = 0.16;
  const std::string csv = cost_table_csv({row});
  CHECK(csv.find("\"{0.08, 0.06}\"") != std::string::npos);
  CHECK(csv.find("program,one_at_a_time_combo1") == 0);
  CHECK(csv.find(",0.16\n") != std::string::npos);
}
