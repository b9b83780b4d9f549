// ccdetect: detects coincidentally correct test cases in coverage spectra
// with an ensemble of random forests, and quantifies how flipping or
// trimming them changes fault-localization cost.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ccd/detector.hpp"
#include "ccd/digest.hpp"
#include "ccd/error.hpp"
#include "ccd/localization.hpp"
#include "ccd/simulator.hpp"
#include "ccd/spectra.hpp"
#include "ccd/version.hpp"

namespace {

using nlohmann::ordered_json;

struct DetectFlags {
  std::string coverage;
  std::string instrumentation;
  std::string faults; // optional for detect
  int combo = 1;
  int chunk_size = 10;
  int partitions = 3;
  int trees = 100;
  int max_features = 0;
  int max_depth = -1;
  int min_samples_split = 2;
  bool class_weighting = false;
  std::string pca_mode = "variance";
  double pca_fraction = 0.6;
  std::uint64_t seed = 0;
};

struct EvalFlags {
  std::string formula = "ochiai";
  std::string tie = "worst";
  std::string strategy = "both";
  std::string variant = "both";
};

void add_input_options(CLI::App* cmd, DetectFlags& f, bool faults_required) {
  cmd->add_option("--coverage", f.coverage, "Coverage CSV (test_id,verdict,trace)")
      ->required();
  cmd->add_option("--instrumentation", f.instrumentation,
                  "Instrumentation file (statements,<count> header)")
      ->required();
  auto* faults =
      cmd->add_option("--faults", f.faults, "Fault ground truth, one id per line");
  if (faults_required) faults->required();
}

void add_detection_options(CLI::App* cmd, DetectFlags& f) {
  cmd->add_option("--combo", f.combo, "Combo size (1, 2 or 3)")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  cmd->add_option("--chunk-size", f.chunk_size, "Passing tests labeled per round (K)")
      ->capture_default_str();
  cmd->add_option("--partitions", f.partitions, "Training partitions per round (p)")
      ->capture_default_str();
  cmd->add_option("--trees", f.trees, "Trees per forest")->capture_default_str();
  cmd->add_option("--max-features", f.max_features,
                  "Features per split; 0 = ceil(sqrt(d))")
      ->capture_default_str();
  cmd->add_option("--max-depth", f.max_depth, "Tree depth cap; -1 = unlimited")
      ->capture_default_str();
  cmd->add_option("--min-samples-split", f.min_samples_split,
                  "Smallest node eligible for a split")
      ->capture_default_str();
  cmd->add_flag("--class-weighting", f.class_weighting,
                "Weight classes inversely to frequency");
  cmd->add_option("--pca-mode", f.pca_mode, "PCA retention rule")
      ->check(CLI::IsMember({"variance", "dims"}))
      ->capture_default_str();
  cmd->add_option("--pca-fraction", f.pca_fraction,
                  "Variance (or dimension) fraction to retain")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "RNG seed")->capture_default_str();
}

ccd::DetectionParams to_params(const DetectFlags& f) {
  ccd::DetectionParams params;
  params.chunk_size = f.chunk_size;
  params.partitions = f.partitions;
  params.combo_k = f.combo;
  params.pca.mode = f.pca_mode == "dims" ? ccd::PcaMode::DimensionFraction
                                         : ccd::PcaMode::VarianceFraction;
  params.pca.fraction = f.pca_fraction;
  params.forest.n_trees = f.trees;
  params.forest.max_features = f.max_features;
  params.forest.max_depth = f.max_depth;
  params.forest.min_samples_split = f.min_samples_split;
  params.forest.class_weighting = f.class_weighting;
  params.seed = f.seed;
  return params;
}

ccd::Formula parse_formula(const std::string& name) {
  return name == "tarantula" ? ccd::Formula::Tarantula : ccd::Formula::Ochiai;
}

ccd::TiePolicy parse_tie(const std::string& name) {
  if (name == "best") return ccd::TiePolicy::Best;
  if (name == "average") return ccd::TiePolicy::Average;
  return ccd::TiePolicy::Worst;
}

ccd::Variant parse_variant(const std::string& name) {
  if (name == "one") return ccd::Variant::OneAtATime;
  if (name == "all") return ccd::Variant::AllAtOnce;
  return ccd::Variant::Both;
}

ordered_json tool_stamp() {
  return {{"name", std::string(ccd::kToolName)},
          {"version", std::string(ccd::kToolVersion)}};
}

ordered_json input_stamp(const DetectFlags& f) {
  ordered_json inputs;
  inputs["coverage"] = {{"path", f.coverage},
                        {"digest", ccd::digest_hex(ccd::fnv1a64_file(f.coverage))}};
  inputs["instrumentation"] = {
      {"path", f.instrumentation},
      {"digest", ccd::digest_hex(ccd::fnv1a64_file(f.instrumentation))}};
  if (!f.faults.empty()) {
    inputs["faults"] = {{"path", f.faults},
                        {"digest", ccd::digest_hex(ccd::fnv1a64_file(f.faults))}};
  }
  return inputs;
}

ordered_json config_stamp(const DetectFlags& f) {
  return {{"combo", f.combo},
          {"chunk_size", f.chunk_size},
          {"partitions", f.partitions},
          {"trees", f.trees},
          {"max_features", f.max_features},
          {"max_depth", f.max_depth},
          {"min_samples_split", f.min_samples_split},
          {"class_weighting", f.class_weighting},
          {"pca_mode", f.pca_mode},
          {"pca_fraction", f.pca_fraction},
          {"seed", f.seed}};
}

ordered_json run_stamp(const ccd::CoverageRun& run) {
  const ccd::RunSummary s = ccd::summarize(run);
  return {{"program_id", run.program_id},
          {"passing", s.passing},
          {"failing", s.failing},
          {"statements", s.statements},
          {"faults", s.faults},
          {"digest", ccd::digest_hex(ccd::run_digest(run))}};
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ccd::Error(ccd::Errc::IoError, "cannot write " + path);
  out << body;
}

ccd::CoverageRun load_inputs(const DetectFlags& f, bool faults_required) {
  std::optional<std::string> faults;
  if (!f.faults.empty()) {
    faults = f.faults;
  } else if (faults_required) {
    throw ccd::Error(ccd::Errc::MissingFaults, "evaluation requires --faults");
  } else {
    std::cerr << "warning: no --faults given; detection proceeds without "
                 "ground truth\n";
  }
  return ccd::load_run(f.coverage, f.instrumentation, faults);
}

int cmd_detect(const DetectFlags& flags, const std::string& out_path,
               const std::string& features_dump) {
  const ccd::CoverageRun run = load_inputs(flags, false);
  const ccd::DetectionParams params = to_params(flags);
  const ccd::DetectionReport report = ccd::detect(run, params);

  ordered_json doc;
  doc["tool"] = tool_stamp();
  doc["command"] = "detect";
  doc["config"] = config_stamp(flags);
  doc["inputs"] = input_stamp(flags);
  doc["run"] = run_stamp(run);
  doc["report"] = ccd::detection_report_json(report);
  write_text(out_path, doc.dump(2) + "\n");

  if (!features_dump.empty()) {
    write_text(features_dump,
               ccd::features_csv(ccd::build_features(run, flags.combo)));
  }

  std::cout << "detected " << report.ct.size()
            << " coincidentally correct test(s); report: " << out_path << "\n";
  return 0;
}

int cmd_evaluate(DetectFlags flags, const EvalFlags& eval,
                 const std::string& out_dir) {
  const ccd::CoverageRun run = load_inputs(flags, true);
  const ccd::Formula formula = parse_formula(eval.formula);
  const ccd::TiePolicy tie = parse_tie(eval.tie);
  const ccd::Variant variant = parse_variant(eval.variant);

  std::vector<ccd::Strategy> strategies;
  if (eval.strategy == "none") strategies = {ccd::Strategy::None};
  if (eval.strategy == "flip") strategies = {ccd::Strategy::Flip};
  if (eval.strategy == "trim") strategies = {ccd::Strategy::Trim};
  if (eval.strategy == "both") {
    strategies = {ccd::Strategy::Flip, ccd::Strategy::Trim};
  }

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  ordered_json doc;
  doc["tool"] = tool_stamp();
  doc["command"] = "evaluate";
  doc["config"] = config_stamp(flags);
  doc["config"]["formula"] = eval.formula;
  doc["config"]["tie"] = eval.tie;
  doc["config"]["strategy"] = eval.strategy;
  doc["config"]["variant"] = eval.variant;
  doc["inputs"] = input_stamp(flags);
  doc["run"] = run_stamp(run);
  doc["combos"] = ordered_json::array();

  // One table row per strategy; the paper-style tables keep one program per
  // row with combo1..3 columns.
  std::map<ccd::Strategy, ccd::CostTableRow> rows;
  for (ccd::Strategy s : strategies) {
    rows[s].program = run.program_id;
  }

  // A single evaluate covers all three combos to fill the per-combo columns.
  for (int combo = 1; combo <= 3; ++combo) {
    flags.combo = combo;
    const ccd::DetectionParams params = to_params(flags);
    const ccd::DetectionReport report = ccd::detect(run, params);

    ordered_json entry;
    entry["combo"] = combo;
    entry["detection"] = ccd::detection_report_json(report);
    entry["costs"] = ordered_json::object();

    for (ccd::Strategy strategy : strategies) {
      const ccd::CostReport cost = ccd::apply_strategy(
          run, report.ct, strategy, variant, formula, tie);
      entry["costs"][std::string(ccd::strategy_name(strategy))] =
          ccd::cost_report_json(cost);

      ccd::CostTableRow& row = rows[strategy];
      row.original_cost = cost.original_cost;
      const std::size_t slot = static_cast<std::size_t>(combo - 1);
      if (variant != ccd::Variant::AllAtOnce) {
        // An empty change set leaves the suite as-is: show the original.
        row.one_at_a_time[slot] = cost.one_at_a_time.empty()
                                      ? std::vector<double>{cost.original_cost}
                                      : cost.one_at_a_time;
      }
      row.all_at_once[slot] = cost.all_at_once;
    }
    doc["combos"].push_back(std::move(entry));
  }

  write_text((dir / "evaluation_report.json").string(), doc.dump(2) + "\n");
  for (ccd::Strategy strategy : strategies) {
    const std::string name =
        strategy == ccd::Strategy::Flip   ? "cost_flipping.csv"
        : strategy == ccd::Strategy::Trim ? "cost_trimming.csv"
                                          : "cost_original.csv";
    write_text((dir / name).string(), ccd::cost_table_csv({rows[strategy]}));
  }
  std::cout << "evaluation written to " << out_dir << "\n";
  return 0;
}

int cmd_simulate(const ccd::SimParams& params, const std::string& out_dir) {
  const ccd::SimResult result = ccd::simulate(params);
  ccd::write_sim_files(result, out_dir);

  ordered_json manifest;
  manifest["tool"] = tool_stamp();
  manifest["command"] = "simulate";
  manifest["config"] = {{"program", params.program_id},
                        {"statements", params.statement_count},
                        {"passing", params.n_passing},
                        {"failing", params.n_failing},
                        {"cc_rate", params.cc_rate},
                        {"fault_count", params.fault_count},
                        {"trace_min", params.trace_len_min},
                        {"trace_max", params.trace_len_max},
                        {"signature_strength", params.signature_strength},
                        {"seed", params.seed}};
  manifest["ground_truth_cc"] = result.ground_truth_cc;
  const std::filesystem::path dir(out_dir);
  write_text((dir / "sim_manifest.json").string(), manifest.dump(2) + "\n");

  std::cout << "simulated run in " << out_dir << " ("
            << result.ground_truth_cc.size() << " CC tests)\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"coincidentally-correct test detection and cost analysis"};
  app.set_version_flag("--version", std::string(ccd::kToolVersion));
  app.set_config("--config", "", "Read defaults from a config file");
  app.require_subcommand(1);

  DetectFlags detect_flags;
  std::string detect_out = "detection_report.json";
  std::string features_dump;
  CLI::App* detect = app.add_subcommand(
      "detect", "Identify coincidentally correct test cases");
  add_input_options(detect, detect_flags, false);
  add_detection_options(detect, detect_flags);
  detect->add_option("--out", detect_out, "Report path")->capture_default_str();
  detect->add_option("--dump-features", features_dump,
                     "Also write the full combo-count matrix as CSV");

  DetectFlags eval_detect_flags;
  EvalFlags eval_flags;
  std::string eval_out_dir = ".";
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Detect, then compare flip/trim localization costs");
  add_input_options(evaluate, eval_detect_flags, true);
  add_detection_options(evaluate, eval_detect_flags);
  evaluate->add_option("--formula", eval_flags.formula, "Suspiciousness formula")
      ->check(CLI::IsMember({"ochiai", "tarantula"}))
      ->capture_default_str();
  evaluate->add_option("--tie", eval_flags.tie, "Ranking tie policy")
      ->check(CLI::IsMember({"worst", "best", "average"}))
      ->capture_default_str();
  evaluate->add_option("--strategy", eval_flags.strategy, "Suite change strategy")
      ->check(CLI::IsMember({"none", "flip", "trim", "both"}))
      ->capture_default_str();
  evaluate->add_option("--variant", eval_flags.variant, "Change application variant")
      ->check(CLI::IsMember({"one", "all", "both"}))
      ->capture_default_str();
  evaluate->add_option("--out-dir", eval_out_dir, "Output directory")
      ->capture_default_str();

  ccd::SimParams sim_params;
  std::string sim_out_dir;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a synthetic coverage run with known CC tests");
  simulate->add_option("--out-dir", sim_out_dir, "Output directory")->required();
  simulate->add_option("--program", sim_params.program_id)->capture_default_str();
  simulate->add_option("--statements", sim_params.statement_count)
      ->capture_default_str();
  simulate->add_option("--passing", sim_params.n_passing)->capture_default_str();
  simulate->add_option("--failing", sim_params.n_failing)->capture_default_str();
  simulate->add_option("--cc-rate", sim_params.cc_rate)->capture_default_str();
  simulate->add_option("--fault-count", sim_params.fault_count)
      ->capture_default_str();
  simulate->add_option("--trace-min", sim_params.trace_len_min)
      ->capture_default_str();
  simulate->add_option("--trace-max", sim_params.trace_len_max)
      ->capture_default_str();
  simulate->add_option("--signature-strength", sim_params.signature_strength)
      ->capture_default_str();
  simulate->add_option("--seed", sim_params.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (detect->parsed()) {
      return cmd_detect(detect_flags, detect_out, features_dump);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_detect_flags, eval_flags, eval_out_dir);
    }
    if (simulate->parsed()) {
      return cmd_simulate(sim_params, sim_out_dir);
    }
  } catch (const ccd::Error& e) {
    std::cerr << "error: " << e.code_name() << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
