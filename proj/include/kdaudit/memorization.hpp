#pragma once

// Replication and extractive-memorization detection. A record replicates
// when the model's full translation exactly matches the reference; it is
// extractively memorized when, in addition, a decode of a truncated source
// prefix already matches. Exclusion rules guard against cases where
// emitting the target early is justified (paraphrases, trivially short
// sources, misaligned pairs).

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdaudit/corpus.hpp"

namespace kdaudit::memorization {

enum class Reference { corpus_targets, teacher_targets };

std::string_view reference_label(Reference ref);  // "tc" / "tt"

struct ExmemConfig {
  std::vector<double> prefix_fractions{0.25, 0.5, 0.75};
  int min_source_words = 4;
  double max_length_ratio = 1.3;
  bool use_lang_check = true;

  void validate() const;  // fractions in (0, 0.75], thresholds sane
};

enum class ExclusionReason {
  too_short,
  wrong_language,
  length_ratio,
  source_equals_target,
  missing_data,
};

std::string_view to_string(ExclusionReason reason);

struct ExmemResult {
  std::size_t index = 0;
  bool replicated = false;
  bool eligible = false;
  std::optional<ExclusionReason> exclusion_reason;
  bool exmem = false;
  std::optional<double> witness_fraction;
};

enum class ExmemProvenance { primary, secondary };

// First max(1, floor(fraction * word_count)) whitespace words, re-joined
// with single spaces. Throws on an empty source or fraction outside (0, 1].
std::string truncate_source(std::string_view source, double fraction);

// 100 * replicated / n_records over the whole corpus.
double replication_rate(const CorpusSet& corpus, const ModelRole& role, Reference reference);

// Exclusion rules evaluated against the given reference text; the first
// matching rule is reported.
std::pair<bool, std::optional<ExclusionReason>> exmem_eligibility(
    const CorpusSet& corpus, std::size_t index, std::string_view reference_text,
    const ExmemConfig& cfg);

// Convenience form per the module contract: eligibility of (source, target).
std::pair<bool, std::optional<ExclusionReason>> exmem_eligibility(const RecordView& record,
                                                                  const ExmemConfig& cfg);

// Full per-record verdict. Requires prefix decodes for every configured
// fraction. The witness is the smallest matching fraction.
ExmemResult detect_exmem(const CorpusSet& corpus, std::size_t index, const ModelRole& role,
                         Reference reference, const ExmemConfig& cfg);

// Whole-corpus detection with partitioned parallel evaluation; output is
// independent of the worker count.
std::vector<ExmemResult> detect_exmem_all(const CorpusSet& corpus, const ModelRole& role,
                                          Reference reference, const ExmemConfig& cfg,
                                          int workers = 1);

// 100 * #exmem / #replicated; 0 when nothing replicated (callers surface
// the degenerate case as a notice).
double exmem_rate(std::span<const ExmemResult> results);

// Primary: ExMem with respect to the corpus targets. Secondary: ExMem only
// with respect to the teacher-generated targets. A record memorized under
// both counts as primary, never both.
std::optional<ExmemProvenance> classify_provenance(const ExmemResult& wrt_corpus,
                                                   const ExmemResult& wrt_teacher);

// index<TAB>replicated<TAB>eligible<TAB>reason<TAB>exmem<TAB>witness_fraction
void write_exmem_tsv(std::ostream& out, std::span<const ExmemResult> results);

}  // namespace kdaudit::memorization
