#include "kdaudit/subgroups.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "kdaudit/error.hpp"
#include "kdaudit/metrics.hpp"
#include "kdaudit/parallel.hpp"
#include "kdaudit/rng.hpp"

namespace kdaudit::subgroups {

CmScore compute_cm(std::span<const ModelEvidence> evidence, std::size_t index) {
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (const auto& model : evidence) {
    if (index >= model.membership.size() || index >= model.scores.size())
      throw ValidationError("cm evidence for model '" + model.model_id +
                            "' does not cover record " + std::to_string(index));
    const double score = model.scores[index];
    if (std::isnan(score)) continue;
    if (model.membership[index]) {
      in_sum += score;
      ++in_n;
    } else {
      out_sum += score;
      ++out_n;
    }
  }
  if (in_n == 0 || out_n == 0)
    throw AuditError("record " + std::to_string(index) + " lacks " +
                     (in_n == 0 ? "IN" : "OUT") + " evidence");
  CmScore s;
  s.index = index;
  s.in_score = in_sum / static_cast<double>(in_n);
  s.out_score = out_sum / static_cast<double>(out_n);
  s.cm = s.in_score - s.out_score;
  return s;
}

std::vector<std::optional<CmScore>> compute_cm_all(std::span<const ModelEvidence> evidence,
                                                   std::size_t n_records) {
  std::vector<std::optional<CmScore>> out(n_records);
  for (std::size_t i = 0; i < n_records; ++i) {
    bool has_in = false, has_out = false;
    for (const auto& model : evidence) {
      if (i >= model.scores.size() || std::isnan(model.scores[i])) continue;
      (model.membership[i] ? has_in : has_out) = true;
    }
    if (has_in && has_out) out[i] = compute_cm(evidence, i);
  }
  return out;
}

int bucket_quality(double score, std::span<const double> boundaries) {
  if (std::isnan(score)) return -1;
  if (score < 0.0 || score > 1.0)
    throw ValidationError("quality score " + std::to_string(score) + " outside [0, 1]");
  int bucket = 0;
  for (double b : boundaries) {
    if (score < b) return bucket;
    ++bucket;
  }
  return bucket;  // top bucket closed at 1.0
}

CmBucket bucket_cm(const CmScore& score) {
  CmBucket b;
  if (score.cm < 0.2)
    b.bucket = 0;
  else if (score.cm < 0.3)
    b.bucket = 1;
  else if (score.cm < 0.4)
    b.bucket = 2;
  else
    b.bucket = 3;
  b.low_low = score.in_score <= 0.2 && score.out_score <= 0.2;
  b.high_high = score.in_score >= 0.8 && score.out_score >= 0.8;
  return b;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> confidence_extremes(
    std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> scored;
  scored.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!std::isnan(scores[i])) scored.push_back(i);
  if (scored.size() < 2 * k)
    throw AuditError("confidence_extremes: need at least " + std::to_string(2 * k) +
                     " scored records, have " + std::to_string(scored.size()));
  std::stable_sort(scored.begin(), scored.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::size_t> bottom(scored.begin(), scored.begin() + static_cast<long>(k));
  std::vector<std::size_t> top(scored.end() - static_cast<long>(k), scored.end());
  std::sort(bottom.begin(), bottom.end());
  std::sort(top.begin(), top.end());
  return {std::move(bottom), std::move(top)};
}

std::vector<std::size_t> cap_group(std::vector<std::size_t> indices, std::size_t cap,
                                   std::uint64_t seed) {
  if (indices.size() <= cap) return indices;
  Rng rng(seed);
  const auto positions = sample_indices(indices.size(), cap, rng);
  std::vector<std::size_t> out;
  out.reserve(cap);
  for (std::size_t p : positions) out.push_back(indices[p]);
  std::sort(out.begin(), out.end());
  return out;
}

SubgroupKind subgroup_kind_from_string(std::string_view s) {
  if (s == "random") return SubgroupKind::random;
  if (s == "quality") return SubgroupKind::quality;
  if (s == "cm") return SubgroupKind::cm;
  if (s == "cm_lowlow") return SubgroupKind::cm_lowlow;
  if (s == "cm_highhigh") return SubgroupKind::cm_highhigh;
  if (s == "confidence_low") return SubgroupKind::confidence_low;
  if (s == "confidence_high") return SubgroupKind::confidence_high;
  throw ValidationError("unknown subgroup kind: \"" + std::string(s) + "\"");
}

std::string_view to_string(SubgroupKind kind) {
  switch (kind) {
    case SubgroupKind::random: return "random";
    case SubgroupKind::quality: return "quality";
    case SubgroupKind::cm: return "cm";
    case SubgroupKind::cm_lowlow: return "cm_lowlow";
    case SubgroupKind::cm_highhigh: return "cm_highhigh";
    case SubgroupKind::confidence_low: return "confidence_low";
    case SubgroupKind::confidence_high: return "confidence_high";
  }
  return "unknown";
}

void SubgroupSpec::validate() const {
  if (cap < 1) throw ValidationError("subgroup spec: cap must be >= 1");
  if (std::adjacent_find(boundaries.begin(), boundaries.end(),
                         [](double a, double b) { return a >= b; }) != boundaries.end())
    throw ValidationError("subgroup spec: boundaries must be strictly increasing");
}

namespace {

std::string range_name(std::string_view prefix, double lo, double hi, bool top_closed) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_[%.2f,%.2f%c", std::string(prefix).c_str(), lo, hi,
                top_closed ? ']' : ')');
  return buf;
}

std::vector<SubgroupDef> capped(std::vector<SubgroupDef> groups, const SubgroupSpec& spec) {
  for (auto& g : groups)
    g.indices = cap_group(std::move(g.indices), spec.cap,
                          substream_seed(spec.seed, "subgroup.cap." + g.name));
  return groups;
}

}  // namespace

std::vector<SubgroupDef> build_subgroups(const CorpusSet& corpus, const SubgroupSpec& spec,
                                         const SubgroupInputs& inputs) {
  spec.validate();
  switch (spec.kind) {
    case SubgroupKind::random: {
      // The random group is exempt from the cap; it shrinks only when the
      // corpus itself is smaller than the requested size.
      const std::size_t n = std::min(spec.size, corpus.n_records);
      return {{"random",
               sample_random(corpus, n, substream_seed(spec.seed, "subgroup.random"))}};
    }
    case SubgroupKind::quality: {
      const std::vector<double>& bounds =
          spec.boundaries.empty() ? kQualityBoundaries : spec.boundaries;
      const FloatStore& store = corpus.score_store(inputs.quality_score);
      std::vector<SubgroupDef> groups(bounds.size() + 1);
      for (std::size_t b = 0; b <= bounds.size(); ++b) {
        const double lo = b == 0 ? 0.0 : bounds[b - 1];
        const double hi = b == bounds.size() ? 1.0 : bounds[b];
        groups[b].name = range_name("quality", lo, hi, b == bounds.size());
      }
      for (std::size_t i = 0; i < corpus.n_records; ++i) {
        const int b = bucket_quality(store.value(i), bounds);
        if (b >= 0) groups[static_cast<std::size_t>(b)].indices.push_back(i);
      }
      return capped(std::move(groups), spec);
    }
    case SubgroupKind::cm:
    case SubgroupKind::cm_lowlow:
    case SubgroupKind::cm_highhigh: {
      if (inputs.cm_evidence.empty())
        throw ValidationError("cm subgroups require counterfactual-memorization evidence");
      const auto cm_scores = compute_cm_all(inputs.cm_evidence, corpus.n_records);
      if (spec.kind == SubgroupKind::cm) {
        std::vector<SubgroupDef> groups{{range_name("cm", -1.0, 0.2, false), {}},
                                        {range_name("cm", 0.2, 0.3, false), {}},
                                        {range_name("cm", 0.3, 0.4, false), {}},
                                        {range_name("cm", 0.4, 1.0, true), {}}};
        for (std::size_t i = 0; i < cm_scores.size(); ++i) {
          if (!cm_scores[i]) continue;
          groups[static_cast<std::size_t>(bucket_cm(*cm_scores[i]).bucket)].indices.push_back(i);
        }
        return capped(std::move(groups), spec);
      }
      const bool want_low = spec.kind == SubgroupKind::cm_lowlow;
      SubgroupDef group{want_low ? "cm_low_low" : "cm_high_high", {}};
      for (std::size_t i = 0; i < cm_scores.size(); ++i) {
        if (!cm_scores[i]) continue;
        const CmBucket b = bucket_cm(*cm_scores[i]);
        if ((want_low && b.low_low) || (!want_low && b.high_high)) group.indices.push_back(i);
      }
      std::vector<SubgroupDef> groups{std::move(group)};
      return capped(std::move(groups), spec);
    }
    case SubgroupKind::confidence_low:
    case SubgroupKind::confidence_high: {
      const FloatStore& store = corpus.score_store(inputs.confidence_score);
      auto [bottom, top] = confidence_extremes(store.values(), spec.cap);
      if (spec.kind == SubgroupKind::confidence_low)
        return {{"confidence_bottom", std::move(bottom)}};
      return {{"confidence_top", std::move(top)}};
    }
  }
  throw AuditError("unreachable subgroup kind");
}

namespace {

std::optional<double> mean_sidecar(const CorpusSet& corpus, const std::string& name,
                                   std::span<const std::size_t> indices) {
  if (!corpus.has_score(name)) return std::nullopt;
  const FloatStore& store = corpus.score_store(name);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i : indices) {
    const double v = store.value(i);
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::vector<SubgroupRow> evaluate_subgroup(const CorpusSet& corpus, const SubgroupDef& group,
                                           std::span<const ModelRole> roles,
                                           const SubgroupEvalConfig& cfg) {
  if (group.indices.empty()) throw AuditError("subgroup '" + group.name + "' is empty");
  std::vector<SubgroupRow> rows;

  for (const ModelRole& role : roles) {
    const LineStore& store = corpus.translation_store(role);
    SubgroupRow row;
    row.group = group.name;
    row.role = role.label();
    row.n = group.indices.size();

    std::vector<std::uint8_t> match(group.indices.size());
    std::vector<double> chrf_scores(group.indices.size());
    parallel_chunks(group.indices.size(), cfg.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = group.indices[k];
        const std::string_view ref =
            cfg.reference == memorization::Reference::corpus_targets
                ? corpus.corpus_targets.line(i)
                : corpus.translation_store(ModelRole::teacher()).line(i);
        match[k] = metrics::exact_match(store.line(i), ref) ? 1 : 0;
        chrf_scores[k] = metrics::chrf(store.line(i), ref);
      }
    });
    row.exact_match_pct =
        100.0 * static_cast<double>(std::accumulate(match.begin(), match.end(), std::size_t{0})) /
        static_cast<double>(match.size());
    row.mean_chrf = std::accumulate(chrf_scores.begin(), chrf_scores.end(), 0.0) /
                    static_cast<double>(chrf_scores.size());
    row.mean_comet22 =
        mean_sidecar(corpus, cfg.comet22_prefix + ":" + role.label(), group.indices);
    row.mean_comet_qe22 =
        mean_sidecar(corpus, cfg.comet_qe22_prefix + ":" + role.label(), group.indices);

    std::vector<std::string_view> texts;
    texts.reserve(group.indices.size());
    for (std::size_t i : group.indices) texts.push_back(store.line(i));
    row.msttr = metrics::msttr(std::span<const std::string_view>(texts), cfg.msttr_window);
    rows.push_back(std::move(row));
  }

  // Corpus-targets column: quality and diversity of the references
  // themselves, for comparison against the models.
  SubgroupRow corpus_row;
  corpus_row.group = group.name;
  corpus_row.role = "corpus";
  corpus_row.n = group.indices.size();
  corpus_row.mean_comet22 = mean_sidecar(corpus, cfg.comet22_prefix + ":corpus", group.indices);
  corpus_row.mean_comet_qe22 =
      mean_sidecar(corpus, cfg.comet_qe22_prefix + ":corpus", group.indices);
  std::vector<std::string_view> target_texts;
  target_texts.reserve(group.indices.size());
  for (std::size_t i : group.indices) target_texts.push_back(corpus.corpus_targets.line(i));
  corpus_row.msttr =
      metrics::msttr(std::span<const std::string_view>(target_texts), cfg.msttr_window);
  rows.push_back(std::move(corpus_row));
  return rows;
}

namespace {

void write_cell(std::ostream& out, const std::optional<double>& v) {
  if (!v) {
    out << "na";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v == 0.0 ? 0.0 : *v);
  out << buf;
}

}  // namespace

void write_subgroup_table_tsv(std::ostream& out, std::span<const SubgroupRow> rows) {
  out << "group\trole\tn\texact_match\tchrf\tcomet22\tcomet_qe22\tmsttr\n";
  for (const auto& r : rows) {
    out << r.group << '\t' << r.role << '\t' << r.n << '\t';
    write_cell(out, r.exact_match_pct);
    out << '\t';
    write_cell(out, r.mean_chrf);
    out << '\t';
    write_cell(out, r.mean_comet22);
    out << '\t';
    write_cell(out, r.mean_comet_qe22);
    out << '\t';
    write_cell(out, r.msttr);
    out << '\n';
  }
}

void write_group_dump_tsv(std::ostream& out, std::span<const SubgroupDef> groups) {
  for (const auto& g : groups)
    for (std::size_t i : g.indices) out << g.name << '\t' << i << '\n';
}

}  // namespace kdaudit::subgroups
