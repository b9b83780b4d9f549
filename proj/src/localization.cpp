#include "ccd/localization.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ccd/error.hpp"

namespace ccd {

std::string_view formula_name(Formula f) {
  return f == Formula::Ochiai ? "ochiai" : "tarantula";
}

std::string_view tie_policy_name(TiePolicy t) {
  switch (t) {
    case TiePolicy::Worst: return "worst";
    case TiePolicy::Best: return "best";
    case TiePolicy::Average: return "average";
  }
  return "worst";
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::Flip: return "flip";
    case Strategy::Trim: return "trim";
  }
  return "none";
}

SpectraCounts collect_spectra(const CoverageRun& run,
                              const std::set<std::string>& flipped,
                              const std::set<std::string>& trimmed) {
  SpectraCounts counts;
  counts.ef.assign(run.statement_count, 0);
  counts.ep.assign(run.statement_count, 0);

  std::vector<bool> covered(run.statement_count + 1);
  for (const TestRecord& t : run.tests) {
    if (trimmed.count(t.trace.test_id)) continue;
    const bool flip = flipped.count(t.trace.test_id) > 0;
    const bool failing = flip || t.verdict == Verdict::Failing;

    std::fill(covered.begin(), covered.end(), false);
    for (StatementId s : t.trace.sequence) covered[s] = true;
    for (StatementId s = 1; s <= run.statement_count; ++s) {
      if (!covered[s]) continue;
      if (failing) {
        ++counts.ef[s - 1];
      } else {
        ++counts.ep[s - 1];
      }
    }
    if (failing) {
      ++counts.total_failing;
    } else {
      ++counts.total_passing;
    }
  }
  return counts;
}

std::vector<double> suspiciousness(const SpectraCounts& counts,
                                   Formula formula) {
  if (counts.total_failing < 1) {
    throw Error(Errc::NoFailingTests,
                "suspiciousness needs at least one failing test");
  }
  const double f_total = static_cast<double>(counts.total_failing);
  const double p_total = static_cast<double>(counts.total_passing);

  std::vector<double> scores(counts.ef.size(), 0.0);
  for (std::size_t i = 0; i < counts.ef.size(); ++i) {
    const double ef = static_cast<double>(counts.ef[i]);
    const double ep = static_cast<double>(counts.ep[i]);
    if (ef == 0.0) continue; // both formulas define 0 here
    if (formula == Formula::Ochiai) {
      scores[i] = ef / std::sqrt(f_total * (ef + ep));
    } else {
      const double fail_ratio = ef / f_total;
      const double pass_ratio = p_total > 0.0 ? ep / p_total : 0.0;
      scores[i] = fail_ratio / (fail_ratio + pass_ratio);
    }
  }
  return scores;
}

double localization_cost(const SpectraCounts& counts,
                         const std::set<StatementId>& faults, Formula formula,
                         TiePolicy tie) {
  const StatementId n = counts.statement_count();
  if (n == 0) {
    throw Error(Errc::EmptyMatrix, "statement universe is empty");
  }
  if (faults.empty()) {
    throw Error(Errc::MissingFaults,
                "cost evaluation requires fault ground truth");
  }
  for (StatementId s : faults) {
    if (s == 0 || s > n) {
      throw Error(Errc::UnknownStatement,
                  "faulty statement " + std::to_string(s) +
                      " outside universe");
    }
  }
  const std::vector<double> scores = suspiciousness(counts, formula);

  // Target: the best-ranked faulty statement, i.e. the highest fault score.
  double target = 0.0;
  bool first = true;
  for (StatementId s : faults) {
    const double v = scores[s - 1];
    if (first || v > target) target = v;
    first = false;
  }

  std::int64_t higher = 0, tied = 0;
  for (double v : scores) {
    if (v > target) {
      ++higher;
    } else if (v == target) {
      ++tied;
    }
  }

  double examined = 0.0;
  switch (tie) {
    case TiePolicy::Worst:
      examined = static_cast<double>(higher + tied);
      break;
    case TiePolicy::Best:
      examined = static_cast<double>(higher) + 1.0;
      break;
    case TiePolicy::Average:
      examined = static_cast<double>(higher) +
                 (static_cast<double>(tied) + 1.0) / 2.0;
      break;
  }
  return examined / static_cast<double>(n);
}

namespace {

double cost_of_view(const CoverageRun& run, const std::set<std::string>& flip,
                    const std::set<std::string>& trim, Formula formula,
                    TiePolicy tie) {
  return localization_cost(collect_spectra(run, flip, trim),
                           run.faulty_statements, formula, tie);
}

} // namespace

CostReport apply_strategy(const CoverageRun& run,
                          const std::set<std::string>& ct, Strategy strategy,
                          Variant variant, Formula formula, TiePolicy tie) {
  std::unordered_set<std::string> passing_ids;
  for (const TestRecord& t : run.tests) {
    if (t.verdict == Verdict::Passing) passing_ids.insert(t.trace.test_id);
  }
  for (const std::string& id : ct) {
    if (!passing_ids.count(id)) {
      throw Error(Errc::UnknownTestId,
                  "'" + id + "' is not a passing test of this run");
    }
  }

  CostReport report;
  report.strategy = strategy;
  report.variant = variant;
  report.formula = formula;
  report.tie_policy = tie;
  report.original_cost = cost_of_view(run, {}, {}, formula, tie);

  auto view_for = [&](const std::set<std::string>& subset) {
    return strategy == Strategy::Flip
               ? cost_of_view(run, subset, {}, formula, tie)
               : cost_of_view(run, {}, subset, formula, tie);
  };

  const bool want_one =
      variant == Variant::OneAtATime || variant == Variant::Both;
  const bool want_all =
      variant == Variant::AllAtOnce || variant == Variant::Both;

  if (strategy == Strategy::None) {
    if (want_all) report.all_at_once = report.original_cost;
    return report;
  }

  if (want_one) {
    for (const std::string& id : ct) {
      report.per_change[id] = view_for({id});
    }
    std::vector<double> distinct;
    for (const auto& [id, cost] : report.per_change) distinct.push_back(cost);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    report.one_at_a_time = std::move(distinct);
  }
  if (want_all) {
    report.all_at_once = ct.empty() ? report.original_cost : view_for(ct);
  }
  return report;
}

namespace {

std::string format_cell(const std::vector<double>& values) {
  std::ostringstream out;
  out.precision(6);
  if (values.empty()) return "";
  if (values.size() == 1) {
    out << values.front();
    return out.str();
  }
  out << "\"{";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ", ";
    out << values[i];
  }
  out << "}\"";
  return out.str();
}

} // namespace

nlohmann::ordered_json cost_report_json(const CostReport& report) {
  nlohmann::ordered_json j;
  j["formula"] = formula_name(report.formula);
  j["tie_policy"] = tie_policy_name(report.tie_policy);
  j["strategy"] = strategy_name(report.strategy);
  j["original_cost"] = report.original_cost;
  j["one_at_a_time"] = report.one_at_a_time;
  if (report.all_at_once) {
    j["all_at_once"] = *report.all_at_once;
  } else {
    j["all_at_once"] = nullptr;
  }
  j["per_change"] = nlohmann::ordered_json::object();
  for (const auto& [id, cost] : report.per_change) j["per_change"][id] = cost;
  return j;
}

std::string cost_table_csv(const std::vector<CostTableRow>& rows) {
  std::ostringstream out;
  out << "program";
  for (int k = 1; k <= 3; ++k) out << ",one_at_a_time_combo" << k;
  for (int k = 1; k <= 3; ++k) out << ",all_at_once_combo" << k;
  out << ",original_cost\n";
  for (const CostTableRow& row : rows) {
    out << row.program;
    for (int k = 0; k < 3; ++k) {
      out << ',' << format_cell(row.one_at_a_time[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < 3; ++k) {
      out << ',';
      const auto& cell = row.all_at_once[static_cast<std::size_t>(k)];
      if (cell) out << format_cell({*cell});
    }
    std::ostringstream orig;
    orig.precision(6);
    orig << row.original_cost;
    out << ',' << orig.str() << '\n';
  }
  return out.str();
}

} // namespace ccd
