#pragma once

// Pure text metrics. All functions are reentrant and allocate only locally;
// call them from any number of threads.

#include <span>
#include <string_view>
#include <vector>

namespace kdaudit::metrics {

struct ChrfParams {
  int max_n = 6;
  double beta = 2.0;
};

// Character n-gram F-beta score in [0, 100].
//
// Whitespace is removed before n-gram extraction and n-grams are taken over
// Unicode scalar values. For each order n = 1..max_n with at least one
// n-gram on either side, F_beta is computed from clipped match counts; the
// score is 100 times the mean over those orders. Orders where both sides
// are too short are skipped, so chrf(a, a) == 100 exactly for any non-empty
// a. Both strings empty returns 100; exactly one empty returns 0.
double chrf(std::string_view hypothesis, std::string_view reference, ChrfParams params = {});

// True iff the strings are byte-identical after trailing-whitespace/CR
// trimming. Case-sensitive, no normalization.
bool exact_match(std::string_view a, std::string_view b);

// max/min ratio of whitespace token counts. Both empty -> 1.0; exactly one
// empty -> +infinity.
double length_ratio(std::string_view source, std::string_view target);

// Mean segmental type-token ratio: the concatenated whitespace token stream
// is split into consecutive non-overlapping windows of exactly `window`
// tokens (final partial window dropped) and the per-window type/token ratio
// is averaged. Fewer than `window` tokens total: TTR of the whole stream.
// Throws on an empty token stream or window == 0.
double msttr(std::span<const std::string_view> texts, std::size_t window = 100);
double msttr(std::span<const std::string> texts, std::size_t window = 100);

// exp(mean of natural-log token probabilities). Throws on an empty sequence
// or any value > 0.
double geometric_mean_prob(std::span<const double> log_probs);

}  // namespace kdaudit::metrics
