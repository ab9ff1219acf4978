#include "kdaudit/hallucination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "kdaudit/error.hpp"
#include "kdaudit/parallel.hpp"
#include "kdaudit/text.hpp"

namespace kdaudit::hallucination {

void OschalConfig::validate() const {
  if (min_bigram_count < 1)
    throw ValidationError("oschal config: min_bigram_count must be >= 1");
  if (!(source_ratio >= 1.0))
    throw ValidationError("oschal config: source_ratio must be >= 1");
  if (max_source_tokens < 1)
    throw ValidationError("oschal config: max_source_tokens must be >= 1");
}

void NathalConfig::validate() const {
  if (min_repeats < 2) throw ValidationError("nathal config: min_repeats must be >= 2");
  if (!(qe_exclusion_threshold > 0.0 && qe_exclusion_threshold < 1.0))
    throw ValidationError("nathal config: qe_exclusion_threshold must lie in (0, 1)");
  if (qe_score_name.empty())
    throw ValidationError("nathal config: qe_score_name must be set");
}

namespace {

struct BigramKey {
  std::string_view a, b;
  bool operator==(const BigramKey&) const = default;
};

struct BigramHash {
  std::size_t operator()(const BigramKey& k) const {
    return fnv1a64(k.a) * 0x9e3779b97f4a7c15ULL ^ fnv1a64(k.b);
  }
};

// Transparent hashing lets the flagging pass look up string_views without
// allocating a key per record.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return fnv1a64(s); }
};

}  // namespace

OschalOutcome detect_oschal(std::string_view source, std::string_view translation,
                            const OschalConfig& cfg) {
  OschalOutcome out;
  const auto src_tokens = split_tokens(source);
  if (src_tokens.size() >= static_cast<std::size_t>(cfg.max_source_tokens)) {
    out.excluded = true;
    return out;
  }
  const auto tr_tokens = split_tokens(translation);
  if (tr_tokens.size() < 2) return out;

  std::unordered_map<BigramKey, int, BigramHash> counts;
  counts.reserve(tr_tokens.size());
  int max_count = 0;
  for (std::size_t i = 0; i + 1 < tr_tokens.size(); ++i)
    max_count = std::max(max_count, ++counts[{tr_tokens[i], tr_tokens[i + 1]}]);
  if (max_count <= cfg.min_bigram_count) return out;

  for (const auto& [bigram, count] : counts) {
    if (count != max_count) continue;
    int src_count = 0;
    for (std::size_t i = 0; i + 1 < src_tokens.size(); ++i)
      if (src_tokens[i] == bigram.a && src_tokens[i + 1] == bigram.b) ++src_count;
    if (static_cast<double>(count) >= cfg.source_ratio * static_cast<double>(src_count)) {
      out.flagged = true;
      return out;
    }
  }
  return out;
}

NathalResult nathal_scan(const CorpusSet& corpus, const ModelRole& role,
                         const NathalConfig& cfg, int workers) {
  cfg.validate();
  const LineStore& store = corpus.translation_store(role);
  const std::size_t n = corpus.n_records;

  NathalResult result;
  result.flagged.assign(n, 0);
  result.excluded.assign(n, 0);

  const FloatStore* qe = nullptr;
  if (corpus.has_score(cfg.qe_score_name)) qe = &corpus.score_store(cfg.qe_score_name);

  // Exclusion pass: QE above threshold, or no usable score at all.
  parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double score = qe ? qe->value(i) : std::numeric_limits<double>::quiet_NaN();
      if (std::isnan(score) || score > cfg.qe_exclusion_threshold) result.excluded[i] = 1;
    }
  });

  // Phase 1: per-chunk hash counting of surviving translations, merged in
  // chunk order. Memory here is one u64 counter per distinct translation.
  const std::size_t n_chunks = n == 0 ? 0 : (n + kParallelChunk - 1) / kParallelChunk;
  std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> partials(n_chunks);
  parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
    auto& local = partials[begin / kParallelChunk];
    for (std::size_t i = begin; i < end; ++i) {
      if (result.excluded[i]) continue;
      local[fnv1a64(rtrim(store.line(i)))]++;
    }
  });
  std::unordered_map<std::uint64_t, std::uint32_t> hash_counts;
  for (auto& partial : partials) {
    for (const auto& [h, c] : partial) hash_counts[h] += c;
    partial.clear();
  }
  result.stats.distinct_hashes = hash_counts.size();

  // Phase 2: group candidate records by full string; exact keys make hash
  // collisions harmless (they only inflate the candidate set).
  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> string_counts;
  for (std::size_t i = 0; i < n; ++i) {
    if (result.excluded[i]) continue;
    ++result.stats.scanned;
    const std::string_view key = rtrim(store.line(i));
    auto it = hash_counts.find(fnv1a64(key));
    if (it == hash_counts.end() || it->second < static_cast<std::uint32_t>(cfg.min_repeats))
      continue;
    ++result.stats.candidate_records;
    auto sit = string_counts.find(key);
    if (sit == string_counts.end())
      string_counts.emplace(std::string(key), 1);
    else
      ++sit->second;
  }
  for (const auto& [text, count] : string_counts)
    result.stats.table_bytes += text.size() + sizeof(std::uint32_t);

  // Flagging pass.
  for (std::size_t i = 0; i < n; ++i) {
    if (result.excluded[i]) continue;
    auto it = string_counts.find(rtrim(store.line(i)));
    if (it != string_counts.end() && it->second >= static_cast<std::uint32_t>(cfg.min_repeats))
      result.flagged[i] = 1;
  }

  for (const auto& [text, count] : string_counts) {
    if (count >= static_cast<std::uint32_t>(cfg.min_repeats))
      result.groups.push_back({text, count});
  }
  std::sort(result.groups.begin(), result.groups.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.translation < b.translation;
  });
  return result;
}

namespace {

double rate_or_throw(std::size_t flagged, std::size_t eligible, std::string_view what) {
  if (eligible == 0)
    throw AuditError(std::string(what) + ": every record is excluded");
  return 100.0 * static_cast<double>(flagged) / static_cast<double>(eligible);
}

}  // namespace

double oschal_rate(std::span<const HalFlags> flags) {
  std::size_t flagged = 0, eligible = 0;
  for (const auto& f : flags) {
    if (f.excluded_oschal) continue;
    ++eligible;
    if (f.oschal) ++flagged;
  }
  return rate_or_throw(flagged, eligible, "oschal_rate");
}

double nathal_rate(std::span<const HalFlags> flags) {
  std::size_t flagged = 0, eligible = 0;
  for (const auto& f : flags) {
    if (f.excluded_nathal) continue;
    ++eligible;
    if (f.nathal) ++flagged;
  }
  return rate_or_throw(flagged, eligible, "nathal_rate");
}

std::pair<double, double> hallucination_rates(std::span<const HalFlags> flags) {
  return {oschal_rate(flags), nathal_rate(flags)};
}

void write_halflags_tsv(std::ostream& out, std::span<const HalFlags> flags) {
  out << "index\toschal\tnathal\texcl_osc\texcl_nat\n";
  for (const auto& f : flags) {
    out << f.index << '\t' << (f.oschal ? 1 : 0) << '\t' << (f.nathal ? 1 : 0) << '\t'
        << (f.excluded_oschal ? 1 : 0) << '\t' << (f.excluded_nathal ? 1 : 0) << '\n';
  }
}

void write_groups_tsv(std::ostream& out, std::span<const NathalGroup> groups) {
  out << "count\ttranslation\n";
  for (const auto& g : groups) out << g.count << '\t' << g.translation << '\n';
}

}  // namespace kdaudit::hallucination
