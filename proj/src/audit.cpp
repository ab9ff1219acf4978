#include "kdaudit/audit.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kdaudit/error.hpp"
#include "kdaudit/metrics.hpp"
#include "kdaudit/parallel.hpp"
#include "kdaudit/rng.hpp"
#include "kdaudit/text.hpp"

namespace kdaudit::audit {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::require_seed() const {
  if (!seed_set)
    throw ValidationError("seed is mandatory: set \"seed\" in the config or pass --seed");
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(base_dir) / p).string();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AuditError("cannot write " + path);
  out << contents;
  out.flush();
  if (!out) throw AuditError("I/O failure while writing " + path);
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj[key].get<T>();
}

}  // namespace

namespace {
RunConfig load_run_config_impl(const json& doc, const std::string& base);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse config " + path + ": " + e.what());
  }
  try {
    return load_run_config_impl(doc, fs::path(path).parent_path().string());
  } catch (const json::exception& e) {
    throw ValidationError("malformed config " + path + ": " + e.what());
  }
}

namespace {

RunConfig load_run_config_impl(const json& doc, const std::string& base) {
  RunConfig cfg;
  if (!doc.contains("manifest"))
    throw ValidationError("config requires a \"manifest\" path");
  cfg.manifest = resolve(base, doc["manifest"].get<std::string>());
  if (doc.contains("seed")) {
    cfg.seed = doc["seed"].get<std::uint64_t>();
    cfg.seed_set = true;
  }
  cfg.workers = get_or(doc, "workers", 1);
  if (cfg.workers < 1) throw ValidationError("config: workers must be >= 1");
  if (doc.contains("out")) cfg.out_dir = resolve(base, doc["out"].get<std::string>());

  if (doc.contains("exmem")) {
    const json& e = doc["exmem"];
    cfg.exmem.prefix_fractions =
        get_or(e, "prefix_fractions", cfg.exmem.prefix_fractions);
    cfg.exmem.min_source_words = get_or(e, "min_source_words", cfg.exmem.min_source_words);
    cfg.exmem.max_length_ratio = get_or(e, "max_length_ratio", cfg.exmem.max_length_ratio);
    cfg.exmem.use_lang_check = get_or(e, "use_lang_check", cfg.exmem.use_lang_check);
  }
  if (doc.contains("oschal")) {
    const json& o = doc["oschal"];
    cfg.oschal.min_bigram_count = get_or(o, "min_bigram_count", cfg.oschal.min_bigram_count);
    cfg.oschal.source_ratio = get_or(o, "source_ratio", cfg.oschal.source_ratio);
    cfg.oschal.max_source_tokens = get_or(o, "max_source_tokens", cfg.oschal.max_source_tokens);
  }
  if (doc.contains("nathal")) {
    const json& n = doc["nathal"];
    cfg.nathal.min_repeats = get_or(n, "min_repeats", cfg.nathal.min_repeats);
    cfg.nathal.qe_exclusion_threshold =
        get_or(n, "qe_exclusion_threshold", cfg.nathal.qe_exclusion_threshold);
    cfg.nathal.qe_score_name = get_or(n, "qe_score_name", cfg.nathal.qe_score_name);
  }
  if (doc.contains("subgroups")) {
    for (const json& s : doc["subgroups"]) {
      subgroups::SubgroupSpec spec;
      spec.kind = subgroups::subgroup_kind_from_string(s.at("kind").get<std::string>());
      spec.boundaries = get_or(s, "boundaries", spec.boundaries);
      spec.cap = get_or(s, "cap", spec.cap);
      spec.size = get_or(s, "size", spec.size);
      cfg.subgroup_specs.push_back(std::move(spec));
    }
  }
  if (doc.contains("subgroup_scores")) {
    const json& s = doc["subgroup_scores"];
    cfg.subgroup_inputs.quality_score =
        get_or(s, "quality_score", cfg.subgroup_inputs.quality_score);
    cfg.subgroup_inputs.confidence_score =
        get_or(s, "confidence_score", cfg.subgroup_inputs.confidence_score);
    cfg.subgroup_eval.comet22_prefix =
        get_or(s, "comet22_prefix", cfg.subgroup_eval.comet22_prefix);
    cfg.subgroup_eval.comet_qe22_prefix =
        get_or(s, "comet_qe22_prefix", cfg.subgroup_eval.comet_qe22_prefix);
    cfg.subgroup_eval.msttr_window = get_or(s, "msttr_window", cfg.subgroup_eval.msttr_window);
  }
  if (doc.contains("cm_evidence")) {
    for (const json& m : doc["cm_evidence"]) {
      CmEvidenceSpec spec;
      spec.model_id = m.at("model_id").get<std::string>();
      spec.membership_path = resolve(base, m.at("membership").get<std::string>());
      spec.scores_path = resolve(base, m.at("scores").get<std::string>());
      cfg.cm_evidence.push_back(std::move(spec));
    }
  }
  if (doc.contains("selection")) {
    const json& s = doc["selection"];
    cfg.selection.chrf_min = get_or(s, "chrf_min", cfg.selection.chrf_min);
    cfg.selection.conf_min = get_or(s, "conf_min", cfg.selection.conf_min);
    cfg.selection.min_source_tokens =
        get_or(s, "min_source_tokens", cfg.selection.min_source_tokens);
    cfg.selection.n = get_or(s, "n", cfg.selection.n);
    cfg.selection.logprob_score_name =
        get_or(s, "logprob_score_name", cfg.selection.logprob_score_name);
    if (s.contains("target_source"))
      cfg.selection_target =
          selector::target_source_from_string(s["target_source"].get<std::string>());
    cfg.selection_mode = get_or(s, "mode", cfg.selection_mode);
    if (cfg.selection_mode != "high_quality" && cfg.selection_mode != "random_baseline")
      throw ValidationError("config: selection mode must be high_quality or random_baseline");
  }
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// validate

namespace {

struct StoreInfo {
  std::string label;
  const LineStore* store;
};

}  // namespace

int cmd_validate(const std::string& manifest_path, std::ostream& diag) {
  CorpusSet corpus;
  try {
    corpus = load_corpus_set(manifest_path);
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << '\n';
    return 2;
  }

  diag << "language_pair: " << corpus.language_pair << '\n';
  diag << "records: " << corpus.n_records << '\n';

  std::vector<StoreInfo> stores{{"sources", &corpus.sources},
                                {"targets", &corpus.corpus_targets}};
  for (const auto& [role, store] : corpus.translations)
    stores.push_back({"translations:" + role.label(), &store});
  for (const auto& [role, fractions] : corpus.prefix_translations) {
    for (const auto& [fraction, store] : fractions) {
      std::ostringstream label;
      label << "prefix:" << role.label() << "@" << fraction;
      stores.push_back({label.str(), &store});
    }
  }

  int failures = 0;
  for (const auto& info : stores) {
    const std::string_view bytes = info.store->bytes();
    if (!is_valid_utf8(bytes)) {
      diag << "error: " << info.store->path() << " is not valid UTF-8\n";
      ++failures;
    }
    if (!bytes.empty() && bytes.back() != '\n') {
      diag << "error: " << info.store->path() << " lacks a final LF terminator\n";
      ++failures;
    }
    diag << info.label << ": " << info.store->size() << " lines (" << info.store->path()
         << ")\n";
  }

  for (const auto& [name, store] : corpus.sidecar_scores) {
    const double density = store.size() == 0
                               ? 0.0
                               : static_cast<double>(store.nan_count()) /
                                     static_cast<double>(store.size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", density);
    diag << "sidecar " << name << ": " << store.size() << " values, " << store.nan_count()
         << " nan (density " << buf << ")\n";
  }
  if (corpus.lang_ids)
    diag << "lang_ids: " << corpus.lang_ids->size() << " entries\n";
  else
    diag << "lang_ids: absent (language check will be skipped)\n";

  if (failures > 0) {
    diag << "validation failed with " << failures << " error(s)\n";
    return 2;
  }
  diag << "ok\n";
  return 0;
}

// ---------------------------------------------------------------------------
// audit

namespace {

std::string role_file_tag(const ModelRole& role) {
  std::string label = role.label();
  for (char& c : label)
    if (c == '/' || c == ' ') c = '_';
  return label;
}

// Prefer a role-qualified QE sidecar ("comet-qe-22:student"), fall back to
// the bare name.
std::string resolve_qe_name(const CorpusSet& corpus, const std::string& base,
                            const ModelRole& role) {
  const std::string qualified = base + ":" + role.label();
  if (corpus.has_score(qualified)) return qualified;
  return base;
}

double replication_from(const std::vector<memorization::ExmemResult>& results) {
  std::size_t replicated = 0;
  for (const auto& r : results)
    if (r.replicated) ++replicated;
  return 100.0 * static_cast<double>(replicated) / static_cast<double>(results.size());
}

}  // namespace

AuditOutput run_audit(const RunConfig& cfg) {
  cfg.require_seed();
  cfg.exmem.validate();
  cfg.oschal.validate();
  cfg.nathal.validate();

  const CorpusSet corpus = load_corpus_set(cfg.manifest);
  if (corpus.n_records == 0) throw ValidationError("audit: corpus has no records");
  const std::string& pair = corpus.language_pair;
  fs::create_directories(cfg.out_dir);

  AuditOutput out;
  if (!corpus.lang_ids)
    out.notices.push_back("language check skipped: no lang_ids sidecar");

  const bool teacher_present = corpus.has_role(ModelRole::teacher());

  for (const auto& [role, translations] : corpus.translations) {
    const std::string label = role.label();
    const bool has_prefixes = corpus.prefix_stores(role) != nullptr;

    // Replication and ExMem with respect to the corpus targets.
    std::vector<memorization::ExmemResult> results_tc;
    if (has_prefixes) {
      results_tc = memorization::detect_exmem_all(
          corpus, role, memorization::Reference::corpus_targets, cfg.exmem, cfg.workers);
      out.table.set(pair, label, "replication_tc", replication_from(results_tc));
      out.table.set(pair, label, "exmem_rate_tc", memorization::exmem_rate(results_tc));
      std::size_t exmem_count = 0, replicated = 0;
      for (const auto& r : results_tc) {
        if (r.exmem) ++exmem_count;
        if (r.replicated) ++replicated;
      }
      if (replicated == 0)
        out.notices.push_back("exmem rate degenerate for " + label +
                              " (wrt tc): no replicated records");
      out.table.set(pair, label, "exmem_count_tc", static_cast<double>(exmem_count));
      std::ostringstream dump;
      memorization::write_exmem_tsv(dump, results_tc);
      write_file(cfg.out_dir + "/exmem_" + role_file_tag(role) + "_tc.tsv", dump.str());
    } else {
      out.table.set(pair, label, "replication_tc",
                    memorization::replication_rate(
                        corpus, role, memorization::Reference::corpus_targets));
      out.notices.push_back("exmem skipped for " + label + ": no prefix decodes");
    }

    // The student is additionally audited against its actual training
    // targets, the teacher's translations.
    if (role == ModelRole::student() && teacher_present) {
      out.table.set(pair, label, "replication_tt",
                    memorization::replication_rate(
                        corpus, role, memorization::Reference::teacher_targets));
      if (has_prefixes) {
        std::vector<memorization::ExmemResult> results_tt =
            memorization::detect_exmem_all(corpus, role,
                                           memorization::Reference::teacher_targets,
                                           cfg.exmem, cfg.workers);
        out.table.set(pair, label, "exmem_rate_tt", memorization::exmem_rate(results_tt));
        std::size_t exmem_count = 0;
        for (const auto& r : results_tt)
          if (r.exmem) ++exmem_count;
        out.table.set(pair, label, "exmem_count_tt", static_cast<double>(exmem_count));
        std::ostringstream dump;
        memorization::write_exmem_tsv(dump, results_tt);
        write_file(cfg.out_dir + "/exmem_" + role_file_tag(role) + "_tt.tsv", dump.str());

        std::size_t primary = 0, secondary = 0;
        for (std::size_t i = 0; i < results_tc.size(); ++i) {
          const auto provenance =
              memorization::classify_provenance(results_tc[i], results_tt[i]);
          if (!provenance) continue;
          (*provenance == memorization::ExmemProvenance::primary ? primary : secondary)++;
        }
        out.table.set(pair, label, "exmem_primary_count", static_cast<double>(primary));
        out.table.set(pair, label, "exmem_secondary_count", static_cast<double>(secondary));
      }
    }

    // Hallucination flags.
    std::vector<hallucination::HalFlags> flags(corpus.n_records);
    parallel_chunks(corpus.n_records, cfg.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        flags[i].index = i;
        const auto osc =
            hallucination::detect_oschal(corpus.sources.line(i), translations.line(i),
                                         cfg.oschal);
        flags[i].oschal = osc.flagged;
        flags[i].excluded_oschal = osc.excluded;
      }
    });

    hallucination::NathalConfig nathal_cfg = cfg.nathal;
    nathal_cfg.qe_score_name = resolve_qe_name(corpus, cfg.nathal.qe_score_name, role);
    const auto nathal = hallucination::nathal_scan(corpus, role, nathal_cfg, cfg.workers);
    for (std::size_t i = 0; i < corpus.n_records; ++i) {
      flags[i].nathal = nathal.flagged[i] != 0;
      flags[i].excluded_nathal = nathal.excluded[i] != 0;
    }

    try {
      out.table.set(pair, label, "oschal", hallucination::oschal_rate(flags));
    } catch (const AuditError&) {
      out.notices.push_back("oschal degenerate for " + label + ": all records excluded");
    }
    try {
      out.table.set(pair, label, "nathal", hallucination::nathal_rate(flags));
    } catch (const AuditError&) {
      out.notices.push_back("nathal skipped for " + label + ": all records excluded (QE sidecar '" +
                            nathal_cfg.qe_score_name + "' missing or exhausted)");
    }

    std::ostringstream hal_dump;
    hallucination::write_halflags_tsv(hal_dump, flags);
    write_file(cfg.out_dir + "/halflags_" + role_file_tag(role) + ".tsv", hal_dump.str());
    std::ostringstream group_dump;
    hallucination::write_groups_tsv(group_dump, nathal.groups);
    write_file(cfg.out_dir + "/nathal_groups_" + role_file_tag(role) + ".tsv",
               group_dump.str());
  }

  std::ostringstream report_json;
  report::emit(report_json, out.table, {}, report::Format::json);
  write_file(cfg.out_dir + "/report.json", report_json.str());
  std::ostringstream report_tsv;
  report::emit(report_tsv, out.table, {}, report::Format::tsv);
  write_file(cfg.out_dir + "/report.tsv", report_tsv.str());

  std::string notices;
  for (const auto& n : out.notices) notices += n + "\n";
  write_file(cfg.out_dir + "/notices.txt", notices);
  return out;
}

// ---------------------------------------------------------------------------
// subgroups

namespace {

std::vector<subgroups::SubgroupSpec> default_subgroup_specs() {
  using subgroups::SubgroupKind;
  std::vector<subgroups::SubgroupSpec> specs;
  for (SubgroupKind kind :
       {SubgroupKind::random, SubgroupKind::quality, SubgroupKind::cm,
        SubgroupKind::cm_lowlow, SubgroupKind::cm_highhigh, SubgroupKind::confidence_low,
        SubgroupKind::confidence_high}) {
    subgroups::SubgroupSpec spec;
    spec.kind = kind;
    specs.push_back(spec);
  }
  return specs;
}

std::vector<subgroups::ModelEvidence> load_cm_evidence(const RunConfig& cfg,
                                                       std::size_t n_records) {
  std::vector<subgroups::ModelEvidence> evidence;
  for (const auto& spec : cfg.cm_evidence) {
    subgroups::ModelEvidence m;
    m.model_id = spec.model_id;
    m.membership = load_membership_mask(spec.membership_path);
    if (m.membership.size() != n_records)
      throw ValidationError("membership mask " + spec.membership_path + " has " +
                            std::to_string(m.membership.size()) + " lines for " +
                            std::to_string(n_records) + " records");
    FloatStore scores(spec.scores_path);
    if (scores.size() != n_records)
      throw ValidationError("cm scores " + spec.scores_path + " has " +
                            std::to_string(scores.size()) + " lines for " +
                            std::to_string(n_records) + " records");
    m.scores = scores.values();
    evidence.push_back(std::move(m));
  }
  return evidence;
}

}  // namespace

void run_subgroups(const RunConfig& cfg) {
  cfg.require_seed();
  const CorpusSet corpus = load_corpus_set(cfg.manifest);
  fs::create_directories(cfg.out_dir);

  subgroups::SubgroupInputs inputs = cfg.subgroup_inputs;
  inputs.cm_evidence = load_cm_evidence(cfg, corpus.n_records);

  std::vector<subgroups::SubgroupSpec> specs =
      cfg.subgroup_specs.empty() ? default_subgroup_specs() : cfg.subgroup_specs;

  std::vector<std::string> notices;
  std::vector<subgroups::SubgroupDef> groups;
  for (auto spec : specs) {
    spec.seed = substream_seed(cfg.seed, "subgroups");
    try {
      auto built = subgroups::build_subgroups(corpus, spec, inputs);
      for (auto& g : built) groups.push_back(std::move(g));
    } catch (const std::exception& e) {
      notices.push_back("subgroup kind '" + std::string(subgroups::to_string(spec.kind)) +
                        "' skipped: " + e.what());
    }
  }

  std::vector<ModelRole> roles;
  for (const auto& [role, store] : corpus.translations) roles.push_back(role);

  subgroups::SubgroupEvalConfig eval = cfg.subgroup_eval;
  eval.workers = cfg.workers;
  std::vector<subgroups::SubgroupRow> rows;
  for (const auto& group : groups) {
    if (group.indices.empty()) {
      notices.push_back("subgroup '" + group.name + "' is empty, not evaluated");
      continue;
    }
    auto group_rows = subgroups::evaluate_subgroup(corpus, group, roles, eval);
    rows.insert(rows.end(), group_rows.begin(), group_rows.end());
  }

  std::ostringstream table;
  subgroups::write_subgroup_table_tsv(table, rows);
  write_file(cfg.out_dir + "/subgroups.tsv", table.str());
  std::ostringstream dump;
  subgroups::write_group_dump_tsv(dump, groups);
  write_file(cfg.out_dir + "/groups.tsv", dump.str());
  std::string notice_text;
  for (const auto& n : notices) notice_text += n + "\n";
  write_file(cfg.out_dir + "/notices.txt", notice_text);
}

// ---------------------------------------------------------------------------
// select

void run_select(const RunConfig& cfg) {
  cfg.require_seed();
  const CorpusSet corpus = load_corpus_set(cfg.manifest);
  fs::create_directories(cfg.out_dir);

  selector::SelectionCriteria criteria = cfg.selection;
  criteria.seed = cfg.seed;

  const selector::Selection selection =
      cfg.selection_mode == "high_quality"
          ? selector::select_high_quality(corpus, ModelRole::teacher(), criteria, cfg.workers)
          : selector::select_random_baseline(corpus, criteria);

  selector::emit_finetune_set(corpus, selection, cfg.selection_target, ModelRole::teacher(),
                              cfg.out_dir + "/selected.src", cfg.out_dir + "/selected.tgt");

  json summary;
  summary["n_qualifying"] = selection.n_qualifying;
  summary["n_selected"] = selection.indices.size();
  json criteria_json;
  criteria_json["mode"] = cfg.selection_mode;
  criteria_json["chrf_min"] = criteria.chrf_min;
  criteria_json["conf_min"] = criteria.conf_min;
  criteria_json["min_source_tokens"] = criteria.min_source_tokens;
  criteria_json["n"] = criteria.n;
  criteria_json["logprob_score_name"] = criteria.logprob_score_name;
  criteria_json["target_source"] = std::string(selector::to_string(cfg.selection_target));
  summary["criteria"] = criteria_json;
  summary["seed"] = cfg.seed;
  write_file(cfg.out_dir + "/selection.json", summary.dump(2) + "\n");

  std::string notice_text;
  for (const auto& w : selection.warnings) notice_text += "warning: " + w + "\n";
  write_file(cfg.out_dir + "/notices.txt", notice_text);
}

// ---------------------------------------------------------------------------
// report

void run_report(const ReportArgs& args) {
  if (args.table_paths.empty()) throw ValidationError("report: no input tables given");
  report::MetricTable merged;
  for (const auto& path : args.table_paths) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open table: " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("cannot parse table " + path + ": " + e.what());
    }
    merged.merge(report::MetricTable::from_json(doc));
  }

  std::vector<report::DeltaSummary> summaries;
  if (!args.metrics.empty()) {
    if (args.subject.empty() || args.reference.empty())
      throw ValidationError("report: --subject and --reference are required with --metrics");
    auto deltas = report::compare_models(merged, args.subject, args.reference, args.metrics);
    summaries.insert(summaries.end(), deltas.begin(), deltas.end());
  }
  if (!args.mean_metrics.empty()) {
    if (args.mean_role.empty())
      throw ValidationError("report: --mean-role is required with --mean-metrics");
    auto means = report::summarize_metrics(merged, args.mean_role, args.mean_metrics);
    summaries.insert(summaries.end(), means.begin(), means.end());
  }

  fs::create_directories(args.out_dir);
  for (const auto& fmt_name : args.formats) {
    const report::Format format = report::format_from_string(fmt_name);
    std::ostringstream body;
    report::emit(body, merged, summaries, format);
    const char* ext = fmt_name == "markdown" ? "md" : fmt_name == "plot_csv" ? "csv"
                                                      : fmt_name == "json"   ? "json"
                                                                             : "tsv";
    write_file(args.out_dir + "/report." + ext, body.str());
  }
}

}  // namespace kdaudit::audit
