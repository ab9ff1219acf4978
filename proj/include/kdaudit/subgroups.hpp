#pragma once

// Data subgroups: a random sample, quality buckets over an ingested QE
// sidecar, counterfactual-memorization buckets built from IN/OUT model
// evidence, and confidence extremes. Groups other than the random sample
// are capped by seeded subsampling, and every group can be evaluated into a
// per-role metric table.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kdaudit/corpus.hpp"
#include "kdaudit/memorization.hpp"

namespace kdaudit::subgroups {

struct CmScore {
  std::size_t index = 0;
  double in_score = 0.0;
  double out_score = 0.0;
  double cm = 0.0;  // in_score - out_score
};

// One leave-out model's contribution: whether each record was in its
// training half, and its per-record geometric-mean target probability
// (NaN = not scored by this model).
struct ModelEvidence {
  std::string model_id;
  std::vector<std::uint8_t> membership;
  std::vector<double> scores;
};

// IN = mean score over models that trained on the record, OUT = mean over
// models that did not; NaN scores do not contribute. Throws when either
// side has no usable evidence. With a single model per side this reduces to
// the coarse two-model estimate.
CmScore compute_cm(std::span<const ModelEvidence> evidence, std::size_t index);

// Per-record CM where evidence exists; nullopt where a side is missing.
std::vector<std::optional<CmScore>> compute_cm_all(std::span<const ModelEvidence> evidence,
                                                   std::size_t n_records);

inline const std::vector<double> kQualityBoundaries{0.2, 0.4, 0.6, 0.8};

// Bucket id for a score in [0, 1]: half-open buckets, top bucket closed.
// NaN returns -1 (unassigned). Throws on scores outside [0, 1].
int bucket_quality(double score, std::span<const double> boundaries);

struct CmBucket {
  int bucket = -1;     // 0: cm < 0.2, 1: [0.2,0.3), 2: [0.3,0.4), 3: cm >= 0.4
  bool low_low = false;   // in <= 0.2 and out <= 0.2
  bool high_high = false; // in >= 0.8 and out >= 0.8
};

// The first CM bucket covers everything below 0.2 (including negative CM,
// so every scored record lands in exactly one bucket); L-L and H-H are
// independent overlays.
CmBucket bucket_cm(const CmScore& score);

// Bottom-k and top-k indices by score, ties broken by ascending index; the
// two sets are disjoint (for all-equal scores the bottom takes the lowest
// indices and the top the highest). NaN scores do not participate. Throws
// when fewer than 2k records are scored.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> confidence_extremes(
    std::span<const double> scores, std::size_t k = 10000);

// Unchanged when within the cap; otherwise a seeded uniform subsample of
// exactly `cap` indices, sorted ascending.
std::vector<std::size_t> cap_group(std::vector<std::size_t> indices, std::size_t cap,
                                   std::uint64_t seed);

enum class SubgroupKind {
  random,
  quality,
  cm,
  cm_lowlow,
  cm_highhigh,
  confidence_low,
  confidence_high,
};

SubgroupKind subgroup_kind_from_string(std::string_view s);
std::string_view to_string(SubgroupKind kind);

struct SubgroupSpec {
  SubgroupKind kind = SubgroupKind::random;
  std::vector<double> boundaries;  // quality buckets; defaults when empty
  std::size_t cap = 10000;
  std::size_t size = 50000;  // random group only
  std::uint64_t seed = 0;

  void validate() const;
};

struct SubgroupDef {
  std::string name;
  std::vector<std::size_t> indices;
};

struct SubgroupInputs {
  std::string quality_score = "comet-qe-22:corpus";
  std::string confidence_score = "logprob:teacher";
  std::vector<ModelEvidence> cm_evidence;
};

// Expand one SubgroupSpec into its groups (quality yields one group per
// bucket, cm one per CM range). Capping seeds derive from the configured
// seed and the group name, so adding a group never reshuffles another.
std::vector<SubgroupDef> build_subgroups(const CorpusSet& corpus, const SubgroupSpec& spec,
                                         const SubgroupInputs& inputs);

struct SubgroupRow {
  std::string group;
  std::string role;  // model role label, or "corpus" for the targets column
  std::size_t n = 0;
  std::optional<double> exact_match_pct;
  std::optional<double> mean_chrf;
  std::optional<double> mean_comet22;
  std::optional<double> mean_comet_qe22;
  std::optional<double> msttr;
};

struct SubgroupEvalConfig {
  memorization::Reference reference = memorization::Reference::corpus_targets;
  std::string comet22_prefix = "comet-22";
  std::string comet_qe22_prefix = "comet-qe-22";
  std::size_t msttr_window = 100;
  int workers = 1;
};

// Per-role rows plus a "corpus" row carrying the targets' quality/diversity
// columns. Missing sidecars leave columns absent, never zero. Throws on an
// empty group.
std::vector<SubgroupRow> evaluate_subgroup(const CorpusSet& corpus, const SubgroupDef& group,
                                           std::span<const ModelRole> roles,
                                           const SubgroupEvalConfig& cfg);

// group, role, n, exact_match, chrf, comet22, comet_qe22, msttr
void write_subgroup_table_tsv(std::ostream& out, std::span<const SubgroupRow> rows);
// group_name<TAB>index
void write_group_dump_tsv(std::ostream& out, std::span<const SubgroupDef> groups);

}  // namespace kdaudit::subgroups
