#pragma once

// Finetuning-set selection: an intrinsic high-quality filter (near-memorized,
// confident, non-trivial length) and a length-only random baseline.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kdaudit/corpus.hpp"

namespace kdaudit::selector {

struct SelectionCriteria {
  double chrf_min = 90.0;      // strict >
  double conf_min = 0.9;       // strict >, on the geometric-mean probability
  int min_source_tokens = 5;   // strict >
  std::size_t n = 500000;
  std::uint64_t seed = 0;
  // Sidecar holding the teacher's per-record mean token log-probability;
  // confidence is exp(value).
  std::string logprob_score_name = "logprob:teacher";

  void validate() const;
};

struct Selection {
  std::vector<std::size_t> indices;  // sorted
  std::size_t n_qualifying = 0;
  std::vector<std::string> warnings;
};

// Records where chrF(teacher translation, corpus target) > chrf_min, the
// teacher's confidence exceeds conf_min, and the source has more than
// min_source_tokens whitespace tokens. When more than n records qualify, a
// seeded uniform subsample of n is taken; when fewer, all are selected with
// a warning. No qualifying records is an error.
Selection select_high_quality(const CorpusSet& corpus, const ModelRole& teacher_role,
                              const SelectionCriteria& criteria, int workers = 1);

// Length requirement only; chrF and confidence are never read.
Selection select_random_baseline(const CorpusSet& corpus, const SelectionCriteria& criteria);

enum class TargetSource { corpus_targets, teacher_translations };

TargetSource target_source_from_string(std::string_view s);
std::string_view to_string(TargetSource t);

// Write the selected records as aligned source/target files, corpus order
// preserved, raw lines re-emitted byte-identically. Throws on an empty
// selection.
void emit_finetune_set(const CorpusSet& corpus, const Selection& selection,
                       TargetSource target_source, const ModelRole& teacher_role,
                       const std::string& source_path, const std::string& target_path);

}  // namespace kdaudit::selector
