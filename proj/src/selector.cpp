#include "kdaudit/selector.hpp"

#include <cmath>
#include <fstream>

#include "kdaudit/error.hpp"
#include "kdaudit/metrics.hpp"
#include "kdaudit/parallel.hpp"
#include "kdaudit/rng.hpp"
#include "kdaudit/text.hpp"

namespace kdaudit::selector {

void SelectionCriteria::validate() const {
  if (n < 1) throw ValidationError("selection criteria: n must be >= 1");
  if (!(chrf_min >= 0.0 && chrf_min <= 100.0))
    throw ValidationError("selection criteria: chrf_min outside [0, 100]");
  if (!(conf_min > 0.0 && conf_min < 1.0))
    throw ValidationError("selection criteria: conf_min outside (0, 1)");
}

namespace {

Selection finalize(std::vector<std::size_t> qualifying, const SelectionCriteria& criteria,
                   std::string_view sampler_name) {
  Selection sel;
  sel.n_qualifying = qualifying.size();
  if (qualifying.empty()) throw AuditError("selection: no qualifying records");
  if (qualifying.size() > criteria.n) {
    Rng rng(substream_seed(criteria.seed, sampler_name));
    const auto positions = sample_indices(qualifying.size(), criteria.n, rng);
    sel.indices.reserve(criteria.n);
    for (std::size_t p : positions) sel.indices.push_back(qualifying[p]);
  } else {
    sel.indices = std::move(qualifying);
    if (sel.indices.size() < criteria.n)
      sel.warnings.push_back("only " + std::to_string(sel.indices.size()) +
                             " qualifying records for requested " + std::to_string(criteria.n));
  }
  return sel;
}

}  // namespace

Selection select_high_quality(const CorpusSet& corpus, const ModelRole& teacher_role,
                              const SelectionCriteria& criteria, int workers) {
  criteria.validate();
  const LineStore& translations = corpus.translation_store(teacher_role);
  const FloatStore& logprobs = corpus.score_store(criteria.logprob_score_name);

  std::vector<std::uint8_t> qualifies(corpus.n_records, 0);
  parallel_chunks(corpus.n_records, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (count_tokens(corpus.sources.line(i)) <=
          static_cast<std::size_t>(criteria.min_source_tokens))
        continue;
      const double lp = logprobs.value(i);
      if (std::isnan(lp) || !(std::exp(lp) > criteria.conf_min)) continue;
      // chrF last: it dominates the cost of qualification.
      if (metrics::chrf(translations.line(i), corpus.corpus_targets.line(i)) > criteria.chrf_min)
        qualifies[i] = 1;
    }
  });
  std::vector<std::size_t> qualifying;
  for (std::size_t i = 0; i < corpus.n_records; ++i)
    if (qualifies[i]) qualifying.push_back(i);
  return finalize(std::move(qualifying), criteria, "select.high_quality");
}

Selection select_random_baseline(const CorpusSet& corpus, const SelectionCriteria& criteria) {
  criteria.validate();
  std::vector<std::size_t> qualifying;
  for (std::size_t i = 0; i < corpus.n_records; ++i) {
    if (count_tokens(corpus.sources.line(i)) >
        static_cast<std::size_t>(criteria.min_source_tokens))
      qualifying.push_back(i);
  }
  return finalize(std::move(qualifying), criteria, "select.random_baseline");
}

TargetSource target_source_from_string(std::string_view s) {
  if (s == "corpus_targets") return TargetSource::corpus_targets;
  if (s == "teacher_translations") return TargetSource::teacher_translations;
  throw ValidationError("unknown finetune target source: \"" + std::string(s) + "\"");
}

std::string_view to_string(TargetSource t) {
  return t == TargetSource::corpus_targets ? "corpus_targets" : "teacher_translations";
}

void emit_finetune_set(const CorpusSet& corpus, const Selection& selection,
                       TargetSource target_source, const ModelRole& teacher_role,
                       const std::string& source_path, const std::string& target_path) {
  if (selection.indices.empty()) throw AuditError("emit_finetune_set: empty selection");
  const LineStore& targets = target_source == TargetSource::corpus_targets
                                 ? corpus.corpus_targets
                                 : corpus.translation_store(teacher_role);
  std::ofstream src(source_path, std::ios::binary);
  std::ofstream tgt(target_path, std::ios::binary);
  if (!src) throw AuditError("cannot write " + source_path);
  if (!tgt) throw AuditError("cannot write " + target_path);
  for (std::size_t i : selection.indices) {
    src << corpus.sources.line(i) << '\n';
    tgt << targets.line(i) << '\n';
  }
  src.flush();
  tgt.flush();
  if (!src || !tgt) throw AuditError("I/O failure while writing finetune set");
}

}  // namespace kdaudit::selector
