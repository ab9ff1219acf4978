#include "kdaudit/memorization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kdaudit/error.hpp"
#include "kdaudit/metrics.hpp"
#include "kdaudit/parallel.hpp"
#include "kdaudit/text.hpp"

namespace kdaudit::memorization {

std::string_view reference_label(Reference ref) {
  return ref == Reference::corpus_targets ? "tc" : "tt";
}

void ExmemConfig::validate() const {
  if (prefix_fractions.empty())
    throw ValidationError("exmem config: prefix_fractions must be non-empty");
  for (double f : prefix_fractions) {
    if (!(f > 0.0 && f <= 0.75))
      throw ValidationError("exmem config: prefix fraction " + std::to_string(f) +
                            " outside (0, 0.75]");
  }
  if (min_source_words < 1)
    throw ValidationError("exmem config: min_source_words must be >= 1");
  if (!(max_length_ratio > 1.0))
    throw ValidationError("exmem config: max_length_ratio must exceed 1");
}

std::string_view to_string(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::too_short: return "too_short";
    case ExclusionReason::wrong_language: return "wrong_language";
    case ExclusionReason::length_ratio: return "length_ratio";
    case ExclusionReason::source_equals_target: return "source_equals_target";
    case ExclusionReason::missing_data: return "missing_data";
  }
  return "unknown";
}

std::string truncate_source(std::string_view source, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw AuditError("truncate_source: fraction outside (0, 1]");
  const auto tokens = split_tokens(source);
  if (tokens.empty()) throw AuditError("truncate_source: empty source");
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(tokens.size()))));
  std::string out;
  for (std::size_t i = 0; i < keep; ++i) {
    if (i) out.push_back(' ');
    out.append(tokens[i]);
  }
  return out;
}

namespace {

std::string_view reference_line(const CorpusSet& corpus, std::size_t index, Reference ref) {
  if (ref == Reference::corpus_targets) return corpus.corpus_targets.line(index);
  return corpus.translation_store(ModelRole::teacher()).line(index);
}

}  // namespace

double replication_rate(const CorpusSet& corpus, const ModelRole& role, Reference reference) {
  const LineStore& store = corpus.translation_store(role);
  if (reference == Reference::teacher_targets && !corpus.has_role(ModelRole::teacher()))
    throw ValidationError("replication vs teacher targets requires teacher translations");
  if (corpus.n_records == 0) return 0.0;
  std::size_t replicated = 0;
  for (std::size_t i = 0; i < corpus.n_records; ++i)
    if (metrics::exact_match(store.line(i), reference_line(corpus, i, reference))) ++replicated;
  return 100.0 * static_cast<double>(replicated) / static_cast<double>(corpus.n_records);
}

std::pair<bool, std::optional<ExclusionReason>> exmem_eligibility(
    const CorpusSet& corpus, std::size_t index, std::string_view reference_text,
    const ExmemConfig& cfg) {
  const std::string_view source = corpus.sources.line(index);
  if (count_tokens(source) < static_cast<std::size_t>(cfg.min_source_words))
    return {false, ExclusionReason::too_short};
  if (cfg.use_lang_check && corpus.lang_ids) {
    const auto [src_code, tgt_code] = corpus.pair_codes();
    const auto& codes = corpus.lang_ids->codes(index);
    if (codes.first != src_code || codes.second != tgt_code)
      return {false, ExclusionReason::wrong_language};
  }
  if (metrics::length_ratio(source, reference_text) > cfg.max_length_ratio)
    return {false, ExclusionReason::length_ratio};
  if (metrics::exact_match(source, reference_text))
    return {false, ExclusionReason::source_equals_target};
  return {true, std::nullopt};
}

std::pair<bool, std::optional<ExclusionReason>> exmem_eligibility(const RecordView& record,
                                                                  const ExmemConfig& cfg) {
  return exmem_eligibility(record.corpus(), record.index(), record.target(), cfg);
}

namespace {

struct ResolvedStores {
  const LineStore* translations = nullptr;
  const LineStore* references = nullptr;
  std::vector<std::pair<double, const LineStore*>> prefixes;  // ascending fraction
};

ResolvedStores resolve_stores(const CorpusSet& corpus, const ModelRole& role,
                              Reference reference, const ExmemConfig& cfg) {
  ResolvedStores rs;
  rs.translations = &corpus.translation_store(role);
  rs.references = reference == Reference::corpus_targets
                      ? &corpus.corpus_targets
                      : &corpus.translation_store(ModelRole::teacher());
  const auto* stores = corpus.prefix_stores(role);
  if (!stores)
    throw ValidationError("no prefix decodes for role '" + role.label() + "'");
  std::vector<double> fractions = cfg.prefix_fractions;
  std::sort(fractions.begin(), fractions.end());
  for (double f : fractions) {
    auto it = stores->find(f);
    if (it == stores->end())
      throw ValidationError("missing prefix decodes for role '" + role.label() +
                            "' at fraction " + std::to_string(f));
    rs.prefixes.emplace_back(f, &it->second);
  }
  return rs;
}

ExmemResult detect_one(const CorpusSet& corpus, const ResolvedStores& rs,
                       const ExmemConfig& cfg, std::size_t index) {
  ExmemResult r;
  r.index = index;
  const std::string_view ref_text = rs.references->line(index);
  r.replicated = metrics::exact_match(rs.translations->line(index), ref_text);
  auto [eligible, reason] = exmem_eligibility(corpus, index, ref_text, cfg);
  r.eligible = eligible;
  r.exclusion_reason = reason;
  if (!r.replicated || !r.eligible) return r;
  for (const auto& [fraction, store] : rs.prefixes) {
    if (metrics::exact_match(store->line(index), ref_text)) {
      r.exmem = true;
      r.witness_fraction = fraction;
      break;
    }
  }
  return r;
}

}  // namespace

ExmemResult detect_exmem(const CorpusSet& corpus, std::size_t index, const ModelRole& role,
                         Reference reference, const ExmemConfig& cfg) {
  cfg.validate();
  return detect_one(corpus, resolve_stores(corpus, role, reference, cfg), cfg, index);
}

std::vector<ExmemResult> detect_exmem_all(const CorpusSet& corpus, const ModelRole& role,
                                          Reference reference, const ExmemConfig& cfg,
                                          int workers) {
  cfg.validate();
  const ResolvedStores rs = resolve_stores(corpus, role, reference, cfg);
  return parallel_map<ExmemResult>(corpus.n_records, workers, [&](std::size_t i) {
    return detect_one(corpus, rs, cfg, i);
  });
}

double exmem_rate(std::span<const ExmemResult> results) {
  std::size_t replicated = 0, exmem = 0;
  for (const auto& r : results) {
    if (r.replicated) ++replicated;
    if (r.exmem) ++exmem;
  }
  if (replicated == 0) return 0.0;
  return 100.0 * static_cast<double>(exmem) / static_cast<double>(replicated);
}

std::optional<ExmemProvenance> classify_provenance(const ExmemResult& wrt_corpus,
                                                   const ExmemResult& wrt_teacher) {
  if (wrt_corpus.index != wrt_teacher.index)
    throw AuditError("classify_provenance: results describe different records");
  if (wrt_corpus.exmem) return ExmemProvenance::primary;
  if (wrt_teacher.exmem) return ExmemProvenance::secondary;
  return std::nullopt;
}

void write_exmem_tsv(std::ostream& out, std::span<const ExmemResult> results) {
  out << "index\treplicated\teligible\treason\texmem\twitness_fraction\n";
  char buf[32];
  for (const auto& r : results) {
    out << r.index << '\t' << (r.replicated ? 1 : 0) << '\t' << (r.eligible ? 1 : 0) << '\t';
    out << (r.exclusion_reason ? to_string(*r.exclusion_reason) : std::string_view("-"));
    out << '\t' << (r.exmem ? 1 : 0) << '\t';
    if (r.witness_fraction) {
      std::snprintf(buf, sizeof buf, "%g", *r.witness_fraction);
      out << buf;
    } else {
      out << '-';
    }
    out << '\n';
  }
}

}  // namespace kdaudit::memorization
