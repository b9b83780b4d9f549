#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccd/spectra.hpp"

namespace ccd {

enum class Formula { Ochiai, Tarantula };
enum class TiePolicy { Worst, Best, Average };
enum class Strategy { None, Flip, Trim };
enum class Variant { OneAtATime, AllAtOnce, Both };

// Binary hit spectra: per statement, how many failing/passing tests cover
// it. nf/np follow from the totals (ef + nf = F, ep + np = P).
struct SpectraCounts {
  std::vector<std::int64_t> ef; // index s-1 for statement s
  std::vector<std::int64_t> ep;
  std::int64_t total_failing = 0;
  std::int64_t total_passing = 0;

  StatementId statement_count() const {
    return static_cast<StatementId>(ef.size());
  }
};

// Hit spectra of a run after relabeling `flipped` passing tests as failing
// and removing `trimmed` tests. The two sets must be disjoint.
SpectraCounts collect_spectra(const CoverageRun& run,
                              const std::set<std::string>& flipped = {},
                              const std::set<std::string>& trimmed = {});

// Per-statement suspiciousness. Both formulas are 0 when ef = 0; Tarantula
// treats ep/P as 0 when P = 0. Requires at least one failing test.
std::vector<double> suspiciousness(const SpectraCounts& counts,
                                   Formula formula);

// Fraction of statements examined, scanning the suspiciousness ranking from
// the top, before reaching the best-ranked faulty statement. Statements tied
// with it count per `tie`: Worst examines all of them, Best just one,
// Average (ties+1)/2. Minimum cost is therefore 1/statement_count.
double localization_cost(const SpectraCounts& counts,
                         const std::set<StatementId>& faults, Formula formula,
                         TiePolicy tie);

struct CostReport {
  Strategy strategy = Strategy::None;
  Variant variant = Variant::Both;
  Formula formula = Formula::Ochiai;
  TiePolicy tie_policy = TiePolicy::Worst;
  double original_cost = 0.0;
  // One-at-a-time: cost of applying the strategy to each detected test
  // alone. one_at_a_time holds the sorted distinct values; per_change the
  // full map.
  std::vector<double> one_at_a_time;
  std::map<std::string, double> per_change;
  std::optional<double> all_at_once;
};

// Recomputes localization cost under the strategy. Every member of `ct` must
// be a passing test of the run. Strategy None returns original_cost in every
// slot it computes.
CostReport apply_strategy(const CoverageRun& run,
                          const std::set<std::string>& ct, Strategy strategy,
                          Variant variant, Formula formula, TiePolicy tie);

nlohmann::ordered_json cost_report_json(const CostReport& report);

// One program row of the cost tables emitted by the CLI.
struct CostTableRow {
  std::string program;
  // Indexed by combo k-1.
  std::array<std::vector<double>, 3> one_at_a_time; // distinct sorted values
  std::array<std::optional<double>, 3> all_at_once;
  double original_cost = 0.0;
};

// CSV with columns one_at_a_time_combo{1..3}, all_at_once_combo{1..3},
// original_cost. Multi-valued cells render as "{a, b}" and are quoted.
std::string cost_table_csv(const std::vector<CostTableRow>& rows);

std::string_view formula_name(Formula f);
std::string_view tie_policy_name(TiePolicy t);
std::string_view strategy_name(Strategy s);

} // namespace ccd
