#pragma once

// Aligned line-based corpora: sources, targets, per-role model translations,
// prefix-decode files and sidecar score files, all loaded from one JSON
// manifest. Line stores are memory-mapped, so loading a corpus costs one
// offset index (8 bytes/line), not the strings themselves. A CorpusSet is
// read-only after load and safe for concurrent readers.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kdaudit {

// Which model produced a translation file. Teacher's entry doubles as the
// student's training targets.
struct ModelRole {
  enum class Tag { teacher, student, baseline, external };

  Tag tag = Tag::external;
  std::string name;  // non-empty iff external

  static ModelRole teacher() { return {Tag::teacher, {}}; }
  static ModelRole student() { return {Tag::student, {}}; }
  static ModelRole baseline() { return {Tag::baseline, {}}; }
  static ModelRole external(std::string n);
  static ModelRole from_label(std::string_view label);

  std::string label() const;

  friend bool operator==(const ModelRole&, const ModelRole&) = default;
  friend auto operator<=>(const ModelRole& a, const ModelRole& b) {
    if (auto c = a.tag <=> b.tag; c != 0) return c;
    return a.name <=> b.name;
  }
};

// Memory-mapped UTF-8 text file indexed by line. line(i) is the raw line
// without its terminator; trimming is the caller's concern.
class LineStore {
public:
  LineStore() = default;
  explicit LineStore(const std::string& path);
  ~LineStore();

  LineStore(LineStore&&) noexcept;
  LineStore& operator=(LineStore&&) noexcept;
  LineStore(const LineStore&) = delete;
  LineStore& operator=(const LineStore&) = delete;

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::string_view line(std::size_t i) const;
  const std::string& path() const { return path_; }
  std::string_view bytes() const { return {data_, length_}; }

private:
  std::string path_;
  const char* data_ = nullptr;
  std::size_t length_ = 0;
  std::vector<std::uint64_t> offsets_;  // n+1 entries when non-empty
};

// Per-line floats; literal "nan" marks a missing value.
class FloatStore {
public:
  FloatStore() = default;
  explicit FloatStore(const std::string& path);

  std::size_t size() const { return values_.size(); }
  double value(std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::size_t nan_count() const { return nan_count_; }
  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::vector<double> values_;
  std::size_t nan_count_ = 0;
};

// Optional per-line `src_code<TAB>tgt_code` sidecar from an external
// language-ID tool.
class LangIdStore {
public:
  LangIdStore() = default;
  explicit LangIdStore(const std::string& path);

  std::size_t size() const { return codes_.size(); }
  const std::pair<std::string, std::string>& codes(std::size_t i) const { return codes_[i]; }
  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::vector<std::pair<std::string, std::string>> codes_;
};

struct CorpusSet {
  std::string language_pair;
  std::size_t n_records = 0;
  LineStore sources;
  LineStore corpus_targets;
  std::map<ModelRole, LineStore> translations;
  std::map<ModelRole, std::map<double, LineStore>> prefix_translations;
  std::map<std::string, FloatStore> sidecar_scores;
  std::optional<LangIdStore> lang_ids;
  std::string provenance;  // manifest's free-form provenance object, serialized

  bool has_role(const ModelRole& role) const { return translations.count(role) > 0; }
  const LineStore& translation_store(const ModelRole& role) const;
  bool has_score(const std::string& name) const { return sidecar_scores.count(name) > 0; }
  const FloatStore& score_store(const std::string& name) const;
  const std::map<double, LineStore>* prefix_stores(const ModelRole& role) const;

  // "en-de" -> ("en", "de"); empty codes when the pair has no '-'.
  std::pair<std::string_view, std::string_view> pair_codes() const;
};

// Accessor for one aligned record. Absent roles and sidecars are errors,
// never defaults.
class RecordView {
public:
  RecordView(const CorpusSet& cs, std::size_t index);

  std::size_t index() const { return index_; }
  const CorpusSet& corpus() const { return *cs_; }
  std::string_view source() const;
  std::string_view target() const;
  std::string_view translation(const ModelRole& role) const;
  std::string_view prefix_translation(const ModelRole& role, double fraction) const;
  double score(const std::string& name) const;

private:
  const CorpusSet* cs_;
  std::size_t index_;
};

// Load and cross-check a corpus from a JSON manifest. File paths in the
// manifest resolve relative to the manifest's directory. Throws
// ValidationError on line-count mismatches (naming both files and counts),
// malformed sidecar floats, duplicate role/fraction keys, or fractions
// outside (0, 1].
CorpusSet load_corpus_set(const std::string& manifest_path);

// Parse an already-loaded manifest document (exposed for tests).
CorpusSet load_corpus_set_json(const nlohmann::json& manifest, const std::string& base_dir);

// n distinct record indices, uniform without replacement, sorted ascending.
// Deterministic function of (n_records, n, seed).
std::vector<std::size_t> sample_random(const CorpusSet& corpus, std::size_t n,
                                       std::uint64_t seed);

// One '0' or '1' per line (for counterfactual-memorization evidence masks).
std::vector<std::uint8_t> load_membership_mask(const std::string& path);

}  // namespace kdaudit
