#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "kdaudit/corpus.hpp"
#include "kdaudit/error.hpp"
#include "../support/synth.hpp"

using namespace kdaudit;
using testsupport::CorpusFiles;

namespace {

CorpusFiles three_file_corpus(std::size_t n) {
  CorpusFiles c;
  for (std::size_t i = 0; i < n; ++i) {
    c.sources.push_back("source line " + std::to_string(i));
    c.targets.push_back("target line " + std::to_string(i));
    c.translations["student"].push_back("student line " + std::to_string(i));
  }
  return c;
}

}  // namespace

TEST_CASE("manifest with aligned files loads") {
  const auto dir = testsupport::scratch_dir("corpus_ok");
  const auto manifest = testsupport::write_corpus(three_file_corpus(10), dir);
  const CorpusSet cs = load_corpus_set(manifest);
  CHECK(cs.n_records == 10);
  CHECK(cs.language_pair == "en-de");
  CHECK(cs.sources.line(3) == "source line 3");
  CHECK(cs.has_role(ModelRole::student()));
  CHECK_FALSE(cs.has_role(ModelRole::teacher()));
}

TEST_CASE("line-count mismatch names both counts") {
  auto files = three_file_corpus(10);
  files.targets.pop_back();
  const auto dir = testsupport::scratch_dir("corpus_mismatch");
  const auto manifest = testsupport::write_corpus(files, dir);
  try {
    load_corpus_set(manifest);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("9") != std::string::npos);
    CHECK(msg.find("10") != std::string::npos);
    CHECK(msg.find("targets.txt") != std::string::npos);
  }
}

TEST_CASE("sidecar scores readable per line") {
  CorpusFiles files = three_file_corpus(2);
  files.scores["comet-qe-22"] = {"0.47", "0.62"};
  const auto dir = testsupport::scratch_dir("corpus_sidecar");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(files, dir));
  CHECK(RecordView(cs, 0).score("comet-qe-22") == doctest::Approx(0.47));
  CHECK(RecordView(cs, 1).score("comet-qe-22") == doctest::Approx(0.62));
}

TEST_CASE("nan sidecar values are missing, malformed floats are errors") {
  CorpusFiles files = three_file_corpus(3);
  files.scores["q"] = {"0.5", "nan", "1.25"};
  const auto dir = testsupport::scratch_dir("corpus_nan");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(files, dir));
  CHECK(std::isnan(cs.score_store("q").value(1)));
  CHECK(cs.score_store("q").nan_count() == 1);

  CorpusFiles bad = three_file_corpus(2);
  bad.scores["q"] = {"0.5", "zero point five"};
  const auto dir2 = testsupport::scratch_dir("corpus_badfloat");
  CHECK_THROWS_AS(load_corpus_set(testsupport::write_corpus(bad, dir2)), ValidationError);
}

TEST_CASE("duplicate manifest keys are rejected") {
  const auto dir = testsupport::scratch_dir("corpus_dup");
  testsupport::write_corpus(three_file_corpus(2), dir);
  std::ofstream manifest(dir + "/dup.json");
  manifest << R"({"language_pair":"en-de","sources":"sources.txt","targets":"targets.txt",)"
           << R"("translations":{"student":"trans_student.txt","student":"trans_student.txt"}})";
  manifest.close();
  CHECK_THROWS_AS(load_corpus_set(dir + "/dup.json"), ValidationError);
}

TEST_CASE("duplicate prefix fractions spelled differently are rejected") {
  CorpusFiles files = three_file_corpus(2);
  files.prefixes["student"]["0.5"] = {"a", "b"};
  files.prefixes["student"]["0.50"] = {"a", "b"};
  const auto dir = testsupport::scratch_dir("corpus_dupfrac");
  CHECK_THROWS_AS(load_corpus_set(testsupport::write_corpus(files, dir)), ValidationError);
}

TEST_CASE("prefix fractions outside (0,1] are rejected") {
  CorpusFiles files = three_file_corpus(2);
  files.prefixes["student"]["1.5"] = {"a", "b"};
  const auto dir = testsupport::scratch_dir("corpus_fracrange");
  CHECK_THROWS_AS(load_corpus_set(testsupport::write_corpus(files, dir)), ValidationError);
}

TEST_CASE("absent role or sidecar access is an error, not a default") {
  const auto dir = testsupport::scratch_dir("corpus_absent");
  const CorpusSet cs = load_corpus_set(testsupport::write_corpus(three_file_corpus(2), dir));
  const RecordView record(cs, 0);
  CHECK_THROWS_AS(record.translation(ModelRole::teacher()), ValidationError);
  CHECK_THROWS_AS(record.score("comet-22"), ValidationError);
  CHECK_THROWS_AS(record.prefix_translation(ModelRole::student(), 0.5), ValidationError);
}

TEST_CASE("all stores report identical lengths for generated manifests") {
  std::mt19937 gen(99);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + gen() % 40;
    CorpusFiles files = three_file_corpus(n);
    if (gen() % 2) {
      for (std::size_t i = 0; i < n; ++i)
        files.translations["teacher"].push_back("t" + std::to_string(i));
    }
    if (gen() % 2) {
      std::vector<std::string> lines;
      for (std::size_t i = 0; i < n; ++i) lines.push_back(std::to_string(i % 3) + ".5");
      files.scores["s"] = lines;
    }
    if (gen() % 2) {
      std::vector<std::string> lines(n, "en\tde");
      files.lang_ids = lines;
    }
    const auto dir = testsupport::scratch_dir("corpus_prop" + std::to_string(trial));
    const CorpusSet cs = load_corpus_set(testsupport::write_corpus(files, dir));
    CHECK(cs.sources.size() == cs.n_records);
    CHECK(cs.corpus_targets.size() == cs.n_records);
    for (const auto& [role, store] : cs.translations) CHECK(store.size() == cs.n_records);
    for (const auto& [name, store] : cs.sidecar_scores) CHECK(store.size() == cs.n_records);
    if (cs.lang_ids) CHECK(cs.lang_ids->size() == cs.n_records);
  }
}

TEST_CASE("load then re-emit round-trips byte-identically") {
  CorpusFiles files = three_file_corpus(5);
  files.sources[2] = "unicode Käse €1,25";
  files.sources[4] = "trailing space kept ";
  const auto dir = testsupport::scratch_dir("corpus_roundtrip");
  const auto manifest = testsupport::write_corpus(files, dir);
  const CorpusSet cs = load_corpus_set(manifest);
  std::string reemitted;
  for (std::size_t i = 0; i < cs.n_records; ++i) {
    reemitted += std::string(cs.sources.line(i));
    reemitted += '\n';
  }
  CHECK(reemitted == testsupport::read_file(dir + "/sources.txt"));
}

TEST_CASE("sample_random basics") {
  const auto dir = testsupport::scratch_dir("corpus_sample");
  const CorpusSet small = load_corpus_set(testsupport::write_corpus(three_file_corpus(5), dir));
  const auto all = sample_random(small, 5, 7);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});

  const auto dir2 = testsupport::scratch_dir("corpus_sample100");
  const CorpusSet big = load_corpus_set(testsupport::write_corpus(three_file_corpus(100), dir2));
  const auto a = sample_random(big, 10, 7);
  const auto b = sample_random(big, 10, 7);
  CHECK(a == b);

  const auto c = sample_random(big, 10, 8);
  CHECK(a != c);
  // Both draws must be valid sorted 10-subsets of [0, 100).
  for (const auto& subset : {a, c}) {
    CHECK(subset.size() == 10);
    CHECK(std::is_sorted(subset.begin(), subset.end()));
    CHECK(std::set<std::size_t>(subset.begin(), subset.end()).size() == 10);
    for (auto i : subset) CHECK(i < 100);
  }
  CHECK_THROWS_AS(sample_random(small, 6, 7), AuditError);

  // A function of (n_records, n, seed) only: different content, same draw.
  CorpusFiles other = three_file_corpus(100);
  for (auto& line : other.sources) line = "completely different " + line;
  const auto dir3 = testsupport::scratch_dir("corpus_sample_content");
  const CorpusSet big2 = load_corpus_set(testsupport::write_corpus(other, dir3));
  CHECK(sample_random(big2, 10, 7) == a);
}

TEST_CASE("membership mask loader") {
  const auto dir = testsupport::scratch_dir("mask");
  std::ofstream out(dir + "/mask.txt");
  out << "1\n0\n1\n";
  out.close();
  const auto mask = load_membership_mask(dir + "/mask.txt");
  CHECK(mask == std::vector<std::uint8_t>{1, 0, 1});
  std::ofstream bad(dir + "/bad.txt");
  bad << "1\n2\n";
  bad.close();
  CHECK_THROWS_AS(load_membership_mask(dir + "/bad.txt"), ValidationError);
}
