#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kdaudit/error.hpp"
#include "kdaudit/selector.hpp"
#include "../support/synth.hpp"

using namespace kdaudit;
using namespace kdaudit::selector;
using testsupport::CorpusFiles;

namespace {

// qualifying records: translation == target (chrF 100), logprob ln(0.95),
// source of 6 tokens. Non-qualifying records break exactly one rule.
CorpusFiles selection_corpus(std::size_t n_qualifying, std::size_t n_other) {
  CorpusFiles c;
  std::vector<double> logprob;
  auto add = [&](const std::string& src, const std::string& tgt, const std::string& tr,
                 double lp) {
    c.sources.push_back(src);
    c.targets.push_back(tgt);
    c.translations["teacher"].push_back(tr);
    logprob.push_back(lp);
  };
  for (std::size_t i = 0; i < n_qualifying; ++i) {
    const std::string tgt = "ziel satz nummer " + std::to_string(i);
    add("one two three four five six", tgt, tgt, std::log(0.95));
  }
  for (std::size_t i = 0; i < n_other; ++i) {
    const std::string tgt = "anderes ziel " + std::to_string(i);
    switch (i % 3) {
      case 0:  // source too short (exactly 5 tokens, strict bound)
        add("one two three four five", tgt, tgt, std::log(0.95));
        break;
      case 1:  // confidence at the bound (strict)
        add("one two three four five six", tgt, tgt, std::log(0.9));
        break;
      default:  // translation far from target
        add("one two three four five six", tgt, "voellig anderer text hier", std::log(0.95));
        break;
    }
  }
  c.scores["logprob:teacher"] = testsupport::format_scores(logprob);
  return c;
}

}  // namespace

TEST_CASE("strict bounds on all three criteria") {
  const auto dir = testsupport::scratch_dir("select_bounds");
  const CorpusSet cs =
      load_corpus_set(testsupport::write_corpus(selection_corpus(3, 9), dir));
  SelectionCriteria criteria;
  criteria.n = 100;
  criteria.seed = 1;
  const Selection sel = select_high_quality(cs, ModelRole::teacher(), criteria);
  CHECK(sel.n_qualifying == 3);
  CHECK(sel.indices == std::vector<std::size_t>{0, 1, 2});
  CHECK_FALSE(sel.warnings.empty());  // fewer qualifying than requested
}

TEST_CASE("subsampling kicks in above n and is seed stable") {
  const auto dir = testsupport::scratch_dir("select_subsample");
  const CorpusSet cs =
      load_corpus_set(testsupport::write_corpus(selection_corpus(60, 30), dir));
  SelectionCriteria criteria;
  criteria.n = 20;
  criteria.seed = 7;
  const Selection a = select_high_quality(cs, ModelRole::teacher(), criteria);
  const Selection b = select_high_quality(cs, ModelRole::teacher(), criteria);
  CHECK(a.indices == b.indices);
  CHECK(a.indices.size() == 20);
  CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
  for (auto i : a.indices) CHECK(i < 60);  // only qualifying records
  CHECK(a.warnings.empty());

  criteria.seed = 8;
  const Selection c = select_high_quality(cs, ModelRole::teacher(), criteria);
  CHECK(a.indices != c.indices);
}

TEST_CASE("no qualifying records is an error, as is a missing sidecar") {
  const auto dir = testsupport::scratch_dir("select_none");
  const CorpusSet cs =
      load_corpus_set(testsupport::write_corpus(selection_corpus(0, 6), dir));
  SelectionCriteria criteria;
  criteria.seed = 1;
  CHECK_THROWS_AS(select_high_quality(cs, ModelRole::teacher(), criteria), AuditError);

  CorpusFiles no_sidecar = selection_corpus(2, 0);
  no_sidecar.scores.clear();
  const auto dir2 = testsupport::scratch_dir("select_nosidecar");
  const CorpusSet cs2 = load_corpus_set(testsupport::write_corpus(no_sidecar, dir2));
  CHECK_THROWS_AS(select_high_quality(cs2, ModelRole::teacher(), criteria), ValidationError);
}

TEST_CASE("random baseline applies the length requirement only") {
  const auto dir = testsupport::scratch_dir("select_baseline");
  const CorpusSet cs =
      load_corpus_set(testsupport::write_corpus(selection_corpus(4, 9), dir));
  SelectionCriteria criteria;
  criteria.n = 1000;
  criteria.seed = 3;
  const Selection sel = select_random_baseline(cs, criteria);
  // Qualifying: the 4 six-token sources plus the 6 non-short others.
  CHECK(sel.n_qualifying == 10);
  CHECK_FALSE(sel.warnings.empty());

  // All five-token sources -> error under the strict bound.
  CorpusFiles short_only;
  for (int i = 0; i < 4; ++i) {
    short_only.sources.push_back("one two three four five");
    short_only.targets.push_back("ziel " + std::to_string(i));
    short_only.translations["teacher"].push_back("x");
  }
  const auto dir2 = testsupport::scratch_dir("select_short");
  const CorpusSet cs2 = load_corpus_set(testsupport::write_corpus(short_only, dir2));
  CHECK_THROWS_AS(select_random_baseline(cs2, criteria), AuditError);
}

TEST_CASE("random baseline ignores chrF and confidence sidecars") {
  CorpusFiles base = selection_corpus(40, 20);
  const auto dir = testsupport::scratch_dir("select_perturb_a");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(base, dir));
  SelectionCriteria criteria;
  criteria.n = 15;
  criteria.seed = 11;
  const Selection before = select_random_baseline(cs, criteria);

  // Perturb confidence scores and translations; the baseline must not move.
  CorpusFiles perturbed = base;
  std::vector<double> junk(base.size(), std::log(0.01));
  perturbed.scores["logprob:teacher"] = testsupport::format_scores(junk);
  for (auto& t : perturbed.translations["teacher"]) t = "kaputt " + t;
  const auto dir2 = testsupport::scratch_dir("select_perturb_b");
  const CorpusSet cs2 = load_corpus_set(testsupport::write_corpus(perturbed, dir2));
  const Selection after = select_random_baseline(cs2, criteria);
  CHECK(before.indices == after.indices);
  CHECK(before.n_qualifying == after.n_qualifying);
}

TEST_CASE("monotonicity: tightening any threshold never grows the qualifying set") {
  const auto dir = testsupport::scratch_dir("select_monotone");
  const CorpusSet cs =
      load_corpus_set(testsupport::write_corpus(selection_corpus(25, 12), dir));
  SelectionCriteria loose;
  loose.n = 10000;
  loose.seed = 5;
  loose.chrf_min = 50.0;
  loose.conf_min = 0.5;
  loose.min_source_tokens = 3;
  const auto base = select_high_quality(cs, ModelRole::teacher(), loose).n_qualifying;
  for (int which = 0; which < 3; ++which) {
    SelectionCriteria tight = loose;
    if (which == 0) tight.chrf_min = 95.0;
    if (which == 1) tight.conf_min = 0.97;
    if (which == 2) tight.min_source_tokens = 7;
    std::size_t tightened = 0;
    try {
      tightened = select_high_quality(cs, ModelRole::teacher(), tight).n_qualifying;
    } catch (const AuditError&) {
      tightened = 0;  // empty qualifying set reports as an error
    }
    CHECK(tightened <= base);
  }
}

TEST_CASE("emit_finetune_set round-trips the selected records") {
  const auto dir = testsupport::scratch_dir("select_emit");
  const CorpusSet cs =
      load_corpus_set(testsupport::write_corpus(selection_corpus(5, 3), dir));
  Selection sel;
  sel.indices = {0, 2, 4};
  sel.n_qualifying = 5;
  const auto out = testsupport::scratch_dir("select_emit_out");
  emit_finetune_set(cs, sel, TargetSource::corpus_targets, ModelRole::teacher(),
                    out + "/sel.src", out + "/sel.tgt");

  const std::string src = testsupport::read_file(out + "/sel.src");
  const std::string tgt = testsupport::read_file(out + "/sel.tgt");
  std::string want_src, want_tgt;
  for (std::size_t i : sel.indices) {
    want_src += std::string(cs.sources.line(i)) + "\n";
    want_tgt += std::string(cs.corpus_targets.line(i)) + "\n";
  }
  CHECK(src == want_src);
  CHECK(tgt == want_tgt);

  // Teacher-translation targets pull from the teacher store instead.
  emit_finetune_set(cs, sel, TargetSource::teacher_translations, ModelRole::teacher(),
                    out + "/sel2.src", out + "/sel2.tgt");
  std::string want_tt;
  for (std::size_t i : sel.indices)
    want_tt += std::string(cs.translation_store(ModelRole::teacher()).line(i)) + "\n";
  CHECK(testsupport::read_file(out + "/sel2.tgt") == want_tt);

  Selection empty;
  CHECK_THROWS_AS(emit_finetune_set(cs, empty, TargetSource::corpus_targets,
                                    ModelRole::teacher(), out + "/e.src", out + "/e.tgt"),
                  AuditError);
}
