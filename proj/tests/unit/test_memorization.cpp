#include <doctest.h>

#include <random>
#include <sstream>

#include "kdaudit/error.hpp"
#include "kdaudit/memorization.hpp"
#include "../support/reference_rules.hpp"
#include "../support/synth.hpp"

using namespace kdaudit;
using namespace kdaudit::memorization;
using testsupport::CorpusFiles;

TEST_CASE("truncate_source") {
  CHECK(truncate_source("a b c d", 0.75) == "a b c");
  CHECK(truncate_source("a b c", 0.75) == "a b");
  CHECK(truncate_source("a", 0.25) == "a");
  CHECK(truncate_source("  a   b  ", 0.5) == "a");
  CHECK_THROWS_AS(truncate_source("", 0.5), AuditError);
  CHECK_THROWS_AS(truncate_source("a b", 0.0), AuditError);
  CHECK_THROWS_AS(truncate_source("a b", 1.5), AuditError);
}

namespace {

// Small corpus with planted verdicts. Teacher serves as both a model role
// and the student's training-target provider.
CorpusFiles exmem_corpus() {
  CorpusFiles c;
  auto add = [&](const std::string& src, const std::string& tgt, const std::string& teacher,
                 const std::string& student, const std::string& s25, const std::string& s50,
                 const std::string& s75, const std::string& lang = "en\tde") {
    c.sources.push_back(src);
    c.targets.push_back(tgt);
    c.translations["teacher"].push_back(teacher);
    c.translations["student"].push_back(student);
    c.prefixes["student"]["0.25"].push_back(s25);
    c.prefixes["student"]["0.5"].push_back(s50);
    c.prefixes["student"]["0.75"].push_back(s75);
    if (!c.lang_ids) c.lang_ids.emplace();
    c.lang_ids->push_back(lang);
  };
  // 0: replicated + prefix match at 0.5 -> exmem, witness 0.5 (figure-style
  //    national-team sentence: the truncated source already decodes to the
  //    full target).
  add("National football team of Atlantis country",
      "Atlantis Fussballnationalmannschaft der Herren Auswahl",
      "Atlantis Fussballnationalmannschaft der Herren Auswahl",
      "Atlantis Fussballnationalmannschaft der Herren Auswahl", "Atlantis Mannschaft",
      "Atlantis Fussballnationalmannschaft der Herren Auswahl",
      "Atlantis Fussballnationalmannschaft der Herren Auswahl");
  // 1: replicated but no prefix decode matches.
  add("Four words source here padded", "Vier Worte Quelle hier gepolstert",
      "Vier Worte Quelle hier gepolstert", "Vier Worte Quelle hier gepolstert", "Vier",
      "Vier Worte", "Vier Worte Quelle");
  // 2: not replicated, prefix happens to match (must stay exmem=false).
  add("Full translation differs from target text", "Ziel Text Eins Zwei Drei Vier",
      "Etwas anderes hier steht jetzt ja", "Etwas anderes hier steht jetzt ja",
      "Ziel Text Eins Zwei Drei Vier", "Ziel Text Eins Zwei Drei Vier",
      "Ziel Text Eins Zwei Drei Vier");
  // 3: replicated, source too short (3 words).
  add("a b c", "a b d", "a b d", "a b d", "a b d", "a b d", "a b d");
  // 4: replicated, length ratio 6/4 = 1.5 > 1.3.
  add("vier kurze worte hier", "eins zwei drei vier fuenf sechs",
      "eins zwei drei vier fuenf sechs", "eins zwei drei vier fuenf sechs",
      "eins zwei drei vier fuenf sechs", "eins zwei drei vier fuenf sechs",
      "eins zwei drei vier fuenf sechs");
  // 5: replicated, source equals target.
  add("same text both sides", "same text both sides", "same text both sides",
      "same text both sides", "same text both sides", "same text both sides",
      "same text both sides");
  // 6: replicated, wrong language code.
  add("quatre mots source ici", "vier quell worte hier", "vier quell worte hier",
      "vier quell worte hier", "vier quell worte hier", "vier quell worte hier",
      "vier quell worte hier", "fr\tde");
  return c;
}

}  // namespace

TEST_CASE("detect_exmem verdicts on the planted corpus") {
  const auto dir = testsupport::scratch_dir("exmem");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(exmem_corpus(), dir));
  const ExmemConfig cfg;

  const auto r0 = detect_exmem(cs, 0, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK(r0.replicated);
  CHECK(r0.eligible);
  CHECK(r0.exmem);
  CHECK(r0.witness_fraction == 0.5);

  const auto r1 = detect_exmem(cs, 1, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK(r1.replicated);
  CHECK_FALSE(r1.exmem);
  CHECK_FALSE(r1.witness_fraction.has_value());

  const auto r2 = detect_exmem(cs, 2, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK_FALSE(r2.replicated);
  CHECK_FALSE(r2.exmem);

  const auto r3 = detect_exmem(cs, 3, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK(r3.replicated);
  CHECK_FALSE(r3.eligible);
  CHECK(r3.exclusion_reason == ExclusionReason::too_short);
  CHECK_FALSE(r3.exmem);

  const auto r4 = detect_exmem(cs, 4, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK(r4.exclusion_reason == ExclusionReason::length_ratio);

  const auto r5 = detect_exmem(cs, 5, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK(r5.exclusion_reason == ExclusionReason::source_equals_target);

  const auto r6 = detect_exmem(cs, 6, ModelRole::student(), Reference::corpus_targets, cfg);
  CHECK(r6.exclusion_reason == ExclusionReason::wrong_language);
}

TEST_CASE("eligibility rule order reports the first match") {
  const auto dir = testsupport::scratch_dir("exmem_order");
  // Source of 2 words that also equals its target: too_short wins.
  CorpusFiles c;
  c.sources = {"a b"};
  c.targets = {"a b"};
  c.translations["student"] = {"a b"};
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(c, dir));
  const auto [eligible, reason] = exmem_eligibility(RecordView(cs, 0), ExmemConfig{});
  CHECK_FALSE(eligible);
  CHECK(reason == ExclusionReason::too_short);
}

TEST_CASE("replication_rate arithmetic") {
  CorpusFiles c;
  for (int i = 0; i < 4; ++i) {
    c.sources.push_back("source number " + std::to_string(i) + " text");
    c.targets.push_back("ziel nummer " + std::to_string(i));
    c.translations["student"].push_back(i == 2 ? "ziel nummer 2" : "etwas anderes");
    c.translations["teacher"].push_back("ziel nummer " + std::to_string(i));
  }
  const auto dir = testsupport::scratch_dir("replication");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(c, dir));
  CHECK(replication_rate(cs, ModelRole::student(), Reference::corpus_targets) ==
        doctest::Approx(25.0));
  CHECK(replication_rate(cs, ModelRole::teacher(), Reference::corpus_targets) ==
        doctest::Approx(100.0));
  CHECK(replication_rate(cs, ModelRole::student(), Reference::teacher_targets) ==
        doctest::Approx(25.0));
  CHECK_THROWS_AS(replication_rate(cs, ModelRole::baseline(), Reference::corpus_targets),
                  ValidationError);
}

TEST_CASE("exmem_rate and provenance") {
  std::vector<ExmemResult> results(100);
  for (std::size_t i = 0; i < 100; ++i) {
    results[i].index = i;
    results[i].replicated = true;
    results[i].eligible = true;
  }
  results[3].exmem = true;
  results[40].exmem = true;
  CHECK(exmem_rate(results) == doctest::Approx(2.0));
  CHECK(exmem_rate({}) == 0.0);

  ExmemResult tc, tt;
  tc.index = tt.index = 5;
  tc.exmem = true;
  tt.exmem = true;
  CHECK(classify_provenance(tc, tt) == ExmemProvenance::primary);
  tc.exmem = false;
  CHECK(classify_provenance(tc, tt) == ExmemProvenance::secondary);
  tt.exmem = false;
  CHECK_FALSE(classify_provenance(tc, tt).has_value());
  tt.index = 6;
  CHECK_THROWS_AS(classify_provenance(tc, tt), AuditError);
}

TEST_CASE("secondary exmem: student inherits a teacher target suffix") {
  // The teacher emitted a target with a stray marketplace suffix; the
  // student reproduces it from a truncated source while the corpus target
  // differs, so the record is exmem wrt the teacher targets only.
  CorpusFiles c;
  c.sources = {"Electrical industry directory for Dominican economy"};
  c.targets = {"Elektrische Industrie in der dominikanischen Wirtschaft"};
  c.translations["teacher"] = {"Elektrische Industrie Verzeichnis - GelbeSeiten.example"};
  c.translations["student"] = {"Elektrische Industrie Verzeichnis - GelbeSeiten.example"};
  for (const char* f : {"0.25", "0.5", "0.75"}) {
    c.prefixes["student"][f] = {"Elektrische Industrie Verzeichnis - GelbeSeiten.example"};
  }
  const auto dir = testsupport::scratch_dir("secondary");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(c, dir));
  const ExmemConfig cfg;
  const auto wrt_tc =
      detect_exmem(cs, 0, ModelRole::student(), Reference::corpus_targets, cfg);
  const auto wrt_tt =
      detect_exmem(cs, 0, ModelRole::student(), Reference::teacher_targets, cfg);
  CHECK_FALSE(wrt_tc.exmem);
  CHECK(wrt_tt.exmem);
  CHECK(classify_provenance(wrt_tc, wrt_tt) == ExmemProvenance::secondary);
}

TEST_CASE("missing prefix store for a configured fraction is an error") {
  CorpusFiles c;
  c.sources = {"one two three four five"};
  c.targets = {"eins zwei drei vier"};
  c.translations["student"] = {"eins zwei drei vier"};
  c.prefixes["student"]["0.25"] = {"eins zwei drei vier"};
  const auto dir = testsupport::scratch_dir("missing_frac");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(c, dir));
  CHECK_THROWS_AS(
      detect_exmem(cs, 0, ModelRole::student(), Reference::corpus_targets, ExmemConfig{}),
      ValidationError);
}

TEST_CASE("shrinking the fraction set never increases the exmem count") {
  const auto dir = testsupport::scratch_dir("exmem_monotone");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(exmem_corpus(), dir));
  auto count_with = [&](std::vector<double> fractions) {
    ExmemConfig cfg;
    cfg.prefix_fractions = std::move(fractions);
    std::size_t count = 0;
    for (const auto& r : detect_exmem_all(cs, ModelRole::student(),
                                          Reference::corpus_targets, cfg))
      if (r.exmem) ++count;
    return count;
  };
  const auto full = count_with({0.25, 0.5, 0.75});
  const auto two = count_with({0.25, 0.5});
  const auto one = count_with({0.25});
  CHECK(two <= full);
  CHECK(one <= two);
}

TEST_CASE("result-shape invariants hold on every record") {
  const auto dir = testsupport::scratch_dir("exmem_shape");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(exmem_corpus(), dir));
  for (const auto& r :
       detect_exmem_all(cs, ModelRole::student(), Reference::corpus_targets, ExmemConfig{})) {
    if (r.exmem) {
      CHECK(r.replicated);
      CHECK(r.eligible);
    }
    CHECK(r.witness_fraction.has_value() == r.exmem);
    CHECK(r.exclusion_reason.has_value() == !r.eligible);
  }
}

TEST_CASE("module agrees with the straight-line reference rules") {
  // Randomized corpus; the oracle recomputes every verdict from strings.
  std::mt19937 gen(4242);
  const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
  CorpusFiles c;
  refrules::ExmemInput oracle_in;
  oracle_in.expected_src_lang = "en";
  oracle_in.expected_tgt_lang = "de";
  oracle_in.prefix_decodes.resize(3);
  oracle_in.prefix_decodes[0].first = 0.25;
  oracle_in.prefix_decodes[1].first = 0.5;
  oracle_in.prefix_decodes[2].first = 0.75;
  c.lang_ids.emplace();
  for (int i = 0; i < 500; ++i) {
    auto sentence = [&](int len) {
      std::string s;
      for (int k = 0; k < len; ++k) {
        if (k) s += ' ';
        s += vocab[gen() % vocab.size()];
      }
      return s;
    };
    const std::string src = sentence(1 + static_cast<int>(gen() % 8));
    std::string tgt = gen() % 4 == 0 ? src : sentence(1 + static_cast<int>(gen() % 8));
    const std::string trans = gen() % 2 ? tgt : sentence(3);
    c.sources.push_back(src);
    c.targets.push_back(tgt);
    c.translations["student"].push_back(trans);
    for (int p = 0; p < 3; ++p) {
      const std::string decode = gen() % 3 == 0 ? tgt : sentence(2);
      c.prefixes["student"][p == 0 ? "0.25" : p == 1 ? "0.5" : "0.75"].push_back(decode);
      oracle_in.prefix_decodes[static_cast<std::size_t>(p)].second.push_back(decode);
    }
    const std::string src_lang = gen() % 10 == 0 ? "fr" : "en";
    c.lang_ids->push_back(src_lang + "\tde");
    oracle_in.sources.push_back(src);
    oracle_in.references.push_back(tgt);
    oracle_in.translations.push_back(trans);
    oracle_in.lang_ids.emplace_back(src_lang, "de");
  }
  const auto dir = testsupport::scratch_dir("exmem_oracle");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(c, dir));
  const auto got = detect_exmem_all(cs, ModelRole::student(), Reference::corpus_targets,
                                    ExmemConfig{}, 4);
  const auto want = refrules::exmem_reference(oracle_in);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].replicated == want[i].replicated);
    CHECK(got[i].eligible == want[i].eligible);
    CHECK(got[i].exmem == want[i].exmem);
  }
}

TEST_CASE("exmem tsv dump") {
  std::vector<ExmemResult> results(2);
  results[0].index = 0;
  results[0].replicated = true;
  results[0].eligible = true;
  results[0].exmem = true;
  results[0].witness_fraction = 0.25;
  results[1].index = 1;
  results[1].exclusion_reason = ExclusionReason::too_short;
  std::ostringstream out;
  write_exmem_tsv(out, results);
  CHECK(out.str() ==
        "index\treplicated\teligible\treason\texmem\twitness_fraction\n"
        "0\t1\t1\t-\t1\t0.25\n"
        "1\t0\t0\ttoo_short\t0\t-\n");
}
