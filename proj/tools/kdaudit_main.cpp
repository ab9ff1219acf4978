// kdaudit — audit sequence-level distillation corpora for inherited
// memorization and hallucination, build analysis subgroups, and select
// high-quality finetuning data.
//
// Exit codes: 0 success, 1 usage, 2 data validation, 3 runtime failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdaudit/audit.hpp"
#include "kdaudit/error.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run config (JSON)")->required();
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--workers", flags.workers, "override the worker count");
  cmd->add_option("--out", flags.out_dir, "override the output directory");
}

kdaudit::audit::RunConfig load_config(const CommonFlags& flags) {
  auto cfg = kdaudit::audit::load_run_config(flags.config_path);
  if (flags.seed) {
    cfg.seed = *flags.seed;
    cfg.seed_set = true;
  }
  if (flags.workers) {
    if (*flags.workers < 1) throw kdaudit::ValidationError("--workers must be >= 1");
    cfg.workers = *flags.workers;
  }
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  return cfg;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      if (start < s.size()) out.push_back(s.substr(start));
      break;
    }
    if (comma > start) out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqkd corpus auditing toolkit"};
  app.require_subcommand(1);

  std::string manifest_path, validate_config;
  CLI::App* validate = app.add_subcommand("validate", "check a corpus manifest");
  validate->add_option("manifest", manifest_path, "manifest JSON");
  validate->add_option("--config", validate_config, "run config naming the manifest")
      ->excludes(validate->get_option("manifest"));

  CommonFlags audit_flags, subgroup_flags, select_flags;
  CLI::App* audit_cmd =
      app.add_subcommand("audit", "replication, exmem and hallucination metrics");
  add_common(audit_cmd, audit_flags);
  CLI::App* subgroups_cmd = app.add_subcommand("subgroups", "build and evaluate subgroups");
  add_common(subgroups_cmd, subgroup_flags);
  CLI::App* select_cmd = app.add_subcommand("select", "select a finetuning subset");
  add_common(select_cmd, select_flags);

  kdaudit::audit::ReportArgs report_args;
  std::string report_metrics, report_mean_metrics, report_formats;
  CLI::App* report_cmd = app.add_subcommand("report", "aggregate audit tables");
  report_cmd->add_option("--table", report_args.table_paths, "audit report.json inputs")
      ->required();
  report_cmd->add_option("--subject", report_args.subject, "role whose change is measured");
  report_cmd->add_option("--reference", report_args.reference, "role changes are relative to");
  report_cmd->add_option("--metrics", report_metrics, "comma-separated metrics to compare");
  report_cmd->add_option("--mean-role", report_args.mean_role, "role for raw-value summaries");
  report_cmd->add_option("--mean-metrics", report_mean_metrics,
                         "comma-separated metrics to average");
  report_cmd->add_option("--formats", report_formats, "tsv,json,markdown,plot_csv");
  report_cmd->add_option("--out", report_args.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) {
      if (!validate_config.empty())
        manifest_path = kdaudit::audit::load_run_config(validate_config).manifest;
      if (manifest_path.empty()) {
        std::cerr << "error: validate needs a manifest argument or --config\n";
        return 1;
      }
      return kdaudit::audit::cmd_validate(manifest_path, std::cout);
    }
    if (audit_cmd->parsed()) {
      const auto out = kdaudit::audit::run_audit(load_config(audit_flags));
      for (const auto& notice : out.notices) std::cout << "notice: " << notice << '\n';
      return 0;
    }
    if (subgroups_cmd->parsed()) {
      kdaudit::audit::run_subgroups(load_config(subgroup_flags));
      return 0;
    }
    if (select_cmd->parsed()) {
      kdaudit::audit::run_select(load_config(select_flags));
      return 0;
    }
    if (report_cmd->parsed()) {
      report_args.metrics = split_csv(report_metrics);
      report_args.mean_metrics = split_csv(report_mean_metrics);
      if (!report_formats.empty()) report_args.formats = split_csv(report_formats);
      kdaudit::audit::run_report(report_args);
      return 0;
    }
  } catch (const kdaudit::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
