#pragma once

// End-to-end orchestration behind the CLI subcommands: validate a manifest,
// run the memorization/hallucination audit, build and evaluate subgroups,
// select a finetuning set, and aggregate reports. All commands are
// idempotent and deterministic for a fixed seed and any worker count.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "kdaudit/corpus.hpp"
#include "kdaudit/hallucination.hpp"
#include "kdaudit/memorization.hpp"
#include "kdaudit/report.hpp"
#include "kdaudit/selector.hpp"
#include "kdaudit/subgroups.hpp"

namespace kdaudit::audit {

struct CmEvidenceSpec {
  std::string model_id;
  std::string membership_path;
  std::string scores_path;
};

struct RunConfig {
  std::string manifest;
  std::uint64_t seed = 0;
  bool seed_set = false;  // the seed is mandatory; there is no wall-clock default
  int workers = 1;
  std::string out_dir = "out";

  memorization::ExmemConfig exmem;
  hallucination::OschalConfig oschal;
  hallucination::NathalConfig nathal;

  std::vector<subgroups::SubgroupSpec> subgroup_specs;  // empty = all kinds
  subgroups::SubgroupInputs subgroup_inputs;            // cm_evidence filled at run time
  std::vector<CmEvidenceSpec> cm_evidence;
  subgroups::SubgroupEvalConfig subgroup_eval;

  selector::SelectionCriteria selection;
  selector::TargetSource selection_target = selector::TargetSource::corpus_targets;
  std::string selection_mode = "high_quality";  // or "random_baseline"

  void require_seed() const;
};

// Parse a JSON run config; missing sections fall back to defaults. Paths
// inside the config resolve relative to the config file's directory.
RunConfig load_run_config(const std::string& path);

// Structural checks: line alignment, UTF-8 validity, LF termination,
// sidecar parse and NaN density. Returns a CLI exit code and writes one
// diagnostic line per finding.
int cmd_validate(const std::string& manifest_path, std::ostream& diag);

struct AuditOutput {
  report::MetricTable table;
  std::vector<std::string> notices;
};

// Replication, ExMem (both references for the student), OscHal and NatHal
// for every role with translations. Writes report.json / report.tsv,
// per-record dumps, and notices.txt under cfg.out_dir.
AuditOutput run_audit(const RunConfig& cfg);

// Build, cap and evaluate the configured subgroups; writes subgroups.tsv,
// groups.tsv and notices.txt.
void run_subgroups(const RunConfig& cfg);

// Selection per cfg.selection_mode; writes selected.src, selected.tgt and
// selection.json.
void run_select(const RunConfig& cfg);

struct ReportArgs {
  std::vector<std::string> table_paths;
  std::string subject;
  std::string reference;
  std::vector<std::string> metrics;       // delta summaries subject-vs-reference
  std::string mean_role;
  std::vector<std::string> mean_metrics;  // raw-value summaries for mean_role
  std::string out_dir = "out";
  std::vector<std::string> formats{"json", "tsv", "markdown"};
};

// Merge audit tables and emit summary documents (report.json/.tsv/.md/.csv).
void run_report(const ReportArgs& args);

}  // namespace kdaudit::audit
