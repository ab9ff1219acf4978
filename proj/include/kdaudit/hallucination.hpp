#pragma once

// Hallucination detectors. OscHal is a per-record check for pathologically
// repeated token bigrams; NatHal is a corpus-wide scan for translations
// emitted identically for many distinct sources. Both apply exclusion rules
// before flagging.

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdaudit/corpus.hpp"

namespace kdaudit::hallucination {

struct OschalConfig {
  int min_bigram_count = 10;  // flag requires strictly more occurrences
  double source_ratio = 4.0;
  int max_source_tokens = 50;  // sources with >= this many tokens are excluded

  void validate() const;
};

struct NathalConfig {
  int min_repeats = 5;
  double qe_exclusion_threshold = 0.85;  // scores strictly above are excluded
  std::string qe_score_name = "comet-qe-22";

  void validate() const;
};

struct HalFlags {
  std::size_t index = 0;
  bool oschal = false;
  bool nathal = false;
  bool excluded_oschal = false;
  bool excluded_nathal = false;
};

struct OschalOutcome {
  bool flagged = false;
  bool excluded = false;
};

// Pure function of (source, translation, cfg). The most frequent
// overlapping whitespace-token bigram of the translation must occur more
// than min_bigram_count times and at least source_ratio times its count in
// the source; ties between equally frequent bigrams flag if any of them
// passes the source test.
OschalOutcome detect_oschal(std::string_view source, std::string_view translation,
                            const OschalConfig& cfg);

struct NathalGroup {
  std::string translation;
  std::size_t count = 0;
};

struct NathalStats {
  std::size_t scanned = 0;            // records surviving QE exclusion
  std::size_t distinct_hashes = 0;    // distinct surviving translations (by hash)
  std::size_t candidate_records = 0;  // records in hash groups of min_repeats+
  std::size_t table_bytes = 0;        // owned bytes of the candidate string table
};

struct NathalResult {
  std::vector<std::uint8_t> flagged;
  std::vector<std::uint8_t> excluded;
  std::vector<NathalGroup> groups;  // flagged groups, count desc then text asc
  NathalStats stats;
};

// Two-phase scan: a partitioned 64-bit hash count pass selects candidate
// translations, then a sequential pass groups candidates by full string (so
// hash collisions can never produce false flags). Records whose QE score is
// above the threshold, or missing, are excluded before grouping. Output is
// byte-identical for any worker count or record order.
//
// A missing QE sidecar excludes every record (rates then fail as fully
// degenerate rather than reporting 0).
NathalResult nathal_scan(const CorpusSet& corpus, const ModelRole& role,
                         const NathalConfig& cfg, int workers = 1);

// 100 * flagged / (total - excluded), per metric. Throws when every record
// is excluded for that metric.
double oschal_rate(std::span<const HalFlags> flags);
double nathal_rate(std::span<const HalFlags> flags);
std::pair<double, double> hallucination_rates(std::span<const HalFlags> flags);

// index<TAB>oschal<TAB>nathal<TAB>excl_osc<TAB>excl_nat
void write_halflags_tsv(std::ostream& out, std::span<const HalFlags> flags);
// count<TAB>translation
void write_groups_tsv(std::ostream& out, std::span<const NathalGroup> groups);

}  // namespace kdaudit::hallucination
