#include "kdaudit/corpus.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "kdaudit/error.hpp"
#include "kdaudit/rng.hpp"
#include "kdaudit/text.hpp"

namespace kdaudit {

namespace fs = std::filesystem;
using nlohmann::json;

ModelRole ModelRole::external(std::string n) {
  if (n.empty()) throw ValidationError("external model role requires a non-empty name");
  return {Tag::external, std::move(n)};
}

ModelRole ModelRole::from_label(std::string_view label) {
  if (label == "teacher") return teacher();
  if (label == "student") return student();
  if (label == "baseline") return baseline();
  return external(std::string(label));
}

std::string ModelRole::label() const {
  switch (tag) {
    case Tag::teacher: return "teacher";
    case Tag::student: return "student";
    case Tag::baseline: return "baseline";
    case Tag::external: return name;
  }
  return name;
}

// ---------------------------------------------------------------------------
// LineStore

LineStore::LineStore(const std::string& path) : path_(path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw ValidationError("cannot open file: " + path);
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw ValidationError("cannot stat file: " + path);
  }
  length_ = static_cast<std::size_t>(st.st_size);
  if (length_ > 0) {
    void* map = ::mmap(nullptr, length_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (map == MAP_FAILED) {
      ::close(fd);
      throw ValidationError("cannot mmap file: " + path);
    }
    data_ = static_cast<const char*>(map);
  }
  ::close(fd);

  if (length_ == 0) return;
  offsets_.push_back(0);
  const char* p = data_;
  const char* end = data_ + length_;
  while (p < end) {
    const char* nl = static_cast<const char*>(std::memchr(p, '\n', static_cast<std::size_t>(end - p)));
    if (!nl) break;
    offsets_.push_back(static_cast<std::uint64_t>(nl - data_ + 1));
    p = nl + 1;
  }
  // Tolerate a missing final newline; validate reports it separately.
  if (offsets_.back() != length_) offsets_.push_back(length_);
}

LineStore::~LineStore() {
  if (data_) ::munmap(const_cast<char*>(data_), length_);
}

LineStore::LineStore(LineStore&& other) noexcept
    : path_(std::move(other.path_)),
      data_(other.data_),
      length_(other.length_),
      offsets_(std::move(other.offsets_)) {
  other.data_ = nullptr;
  other.length_ = 0;
  other.offsets_.clear();
}

LineStore& LineStore::operator=(LineStore&& other) noexcept {
  if (this != &other) {
    if (data_) ::munmap(const_cast<char*>(data_), length_);
    path_ = std::move(other.path_);
    data_ = other.data_;
    length_ = other.length_;
    offsets_ = std::move(other.offsets_);
    other.data_ = nullptr;
    other.length_ = 0;
    other.offsets_.clear();
  }
  return *this;
}

std::string_view LineStore::line(std::size_t i) const {
  const std::uint64_t begin = offsets_[i];
  std::uint64_t end = offsets_[i + 1];
  if (end > begin && data_[end - 1] == '\n') --end;
  return {data_ + begin, static_cast<std::size_t>(end - begin)};
}

// ---------------------------------------------------------------------------
// FloatStore / LangIdStore

FloatStore::FloatStore(const std::string& path) : path_(path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sidecar file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = rtrim(line);
    if (trimmed == "nan") {
      values_.push_back(std::numeric_limits<double>::quiet_NaN());
      ++nan_count_;
      continue;
    }
    double v = 0.0;
    const char* first = trimmed.data();
    const char* last = trimmed.data() + trimmed.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
      throw ValidationError("malformed float in sidecar " + path + " at line " +
                            std::to_string(line_no) + ": \"" + std::string(trimmed) + "\"");
    if (std::isnan(v)) ++nan_count_;
    values_.push_back(v);
  }
}

LangIdStore::LangIdStore(const std::string& path) : path_(path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open lang-id file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = rtrim(line);
    const std::size_t tab = trimmed.find('\t');
    if (tab == std::string_view::npos)
      throw ValidationError("lang-id line " + std::to_string(line_no) + " in " + path +
                            " lacks a tab separator");
    codes_.emplace_back(std::string(trimmed.substr(0, tab)), std::string(trimmed.substr(tab + 1)));
  }
}

// ---------------------------------------------------------------------------
// CorpusSet

const LineStore& CorpusSet::translation_store(const ModelRole& role) const {
  auto it = translations.find(role);
  if (it == translations.end())
    throw ValidationError("no translations for role '" + role.label() + "'");
  return it->second;
}

const FloatStore& CorpusSet::score_store(const std::string& name) const {
  auto it = sidecar_scores.find(name);
  if (it == sidecar_scores.end())
    throw ValidationError("no sidecar scores named '" + name + "'");
  return it->second;
}

const std::map<double, LineStore>* CorpusSet::prefix_stores(const ModelRole& role) const {
  auto it = prefix_translations.find(role);
  return it == prefix_translations.end() ? nullptr : &it->second;
}

std::pair<std::string_view, std::string_view> CorpusSet::pair_codes() const {
  const std::string_view pair = language_pair;
  const std::size_t dash = pair.find('-');
  if (dash == std::string_view::npos) return {{}, {}};
  return {pair.substr(0, dash), pair.substr(dash + 1)};
}

RecordView::RecordView(const CorpusSet& cs, std::size_t index) : cs_(&cs), index_(index) {
  if (index >= cs.n_records)
    throw AuditError("record index " + std::to_string(index) + " out of range");
}

std::string_view RecordView::source() const { return cs_->sources.line(index_); }
std::string_view RecordView::target() const { return cs_->corpus_targets.line(index_); }

std::string_view RecordView::translation(const ModelRole& role) const {
  return cs_->translation_store(role).line(index_);
}

std::string_view RecordView::prefix_translation(const ModelRole& role, double fraction) const {
  const auto* stores = cs_->prefix_stores(role);
  if (!stores)
    throw ValidationError("no prefix translations for role '" + role.label() + "'");
  auto it = stores->find(fraction);
  if (it == stores->end())
    throw ValidationError("no prefix translations for role '" + role.label() +
                          "' at fraction " + std::to_string(fraction));
  return it->second.line(index_);
}

double RecordView::score(const std::string& name) const {
  return cs_->score_store(name).value(index_);
}

// ---------------------------------------------------------------------------
// Manifest loading

namespace {

// nlohmann keeps the last of duplicate keys silently; reject them instead.
json parse_json_rejecting_duplicates(std::istream& in, const std::string& what) {
  std::vector<std::set<std::string>> key_stack;
  json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        key_stack.emplace_back();
        break;
      case json::parse_event_t::key:
        if (!key_stack.back().insert(parsed.get<std::string>()).second)
          throw ValidationError("duplicate key \"" + parsed.get<std::string>() + "\" in " + what);
        break;
      case json::parse_event_t::object_end:
        key_stack.pop_back();
        break;
      default:
        break;
    }
    return true;
  };
  try {
    return json::parse(in, cb);
  } catch (const json::parse_error& e) {
    throw ValidationError("cannot parse " + what + ": " + e.what());
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(base_dir) / p).string();
}

double parse_fraction_key(const std::string& key) {
  double f = 0.0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), f);
  if (ec != std::errc() || ptr != key.data() + key.size())
    throw ValidationError("malformed prefix fraction key \"" + key + "\" in manifest");
  if (!(f > 0.0 && f <= 1.0))
    throw ValidationError("prefix fraction " + key + " outside (0, 1]");
  return f;
}

void check_count(std::size_t expected, const std::string& expected_from, std::size_t got,
                 const std::string& file) {
  if (got != expected)
    throw ValidationError("line count mismatch: " + file + " has " + std::to_string(got) +
                          " lines but " + expected_from + " has " + std::to_string(expected));
}

}  // namespace

namespace {

CorpusSet load_corpus_set_json_impl(const json& manifest, const std::string& base_dir);

}  // namespace

CorpusSet load_corpus_set_json(const json& manifest, const std::string& base_dir) {
  try {
    return load_corpus_set_json_impl(manifest, base_dir);
  } catch (const json::exception& e) {
    // Shape errors (wrong value types, non-object sections) are bad input,
    // not runtime failures.
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

namespace {

CorpusSet load_corpus_set_json_impl(const json& manifest, const std::string& base_dir) {
  CorpusSet cs;
  if (!manifest.contains("language_pair") || !manifest["language_pair"].is_string() ||
      manifest["language_pair"].get<std::string>().empty())
    throw ValidationError("manifest requires a non-empty \"language_pair\"");
  cs.language_pair = manifest["language_pair"].get<std::string>();

  if (!manifest.contains("sources") || !manifest.contains("targets"))
    throw ValidationError("manifest requires \"sources\" and \"targets\"");
  cs.sources = LineStore(resolve(base_dir, manifest["sources"].get<std::string>()));
  cs.corpus_targets = LineStore(resolve(base_dir, manifest["targets"].get<std::string>()));
  cs.n_records = cs.sources.size();
  check_count(cs.n_records, cs.sources.path(), cs.corpus_targets.size(),
              cs.corpus_targets.path());

  if (manifest.contains("translations")) {
    for (const auto& [label, path] : manifest["translations"].items()) {
      ModelRole role = ModelRole::from_label(label);
      LineStore store(resolve(base_dir, path.get<std::string>()));
      check_count(cs.n_records, cs.sources.path(), store.size(), store.path());
      if (!cs.translations.emplace(std::move(role), std::move(store)).second)
        throw ValidationError("duplicate translation role \"" + label + "\" in manifest");
    }
  }

  if (manifest.contains("prefix_translations")) {
    for (const auto& [label, fractions] : manifest["prefix_translations"].items()) {
      ModelRole role = ModelRole::from_label(label);
      std::map<double, LineStore> stores;
      for (const auto& [frac_key, path] : fractions.items()) {
        const double f = parse_fraction_key(frac_key);
        LineStore store(resolve(base_dir, path.get<std::string>()));
        check_count(cs.n_records, cs.sources.path(), store.size(), store.path());
        if (!stores.emplace(f, std::move(store)).second)
          throw ValidationError("duplicate prefix fraction " + frac_key + " for role \"" +
                                label + "\"");
      }
      if (!cs.prefix_translations.emplace(std::move(role), std::move(stores)).second)
        throw ValidationError("duplicate prefix-translation role \"" + label + "\"");
    }
  }

  if (manifest.contains("scores")) {
    for (const auto& [name, path] : manifest["scores"].items()) {
      FloatStore store(resolve(base_dir, path.get<std::string>()));
      check_count(cs.n_records, cs.sources.path(), store.size(), store.path());
      cs.sidecar_scores.emplace(name, std::move(store));
    }
  }

  if (manifest.contains("lang_ids") && !manifest["lang_ids"].is_null()) {
    LangIdStore store(resolve(base_dir, manifest["lang_ids"].get<std::string>()));
    check_count(cs.n_records, cs.sources.path(), store.size(), store.path());
    cs.lang_ids = std::move(store);
  }

  if (manifest.contains("provenance")) cs.provenance = manifest["provenance"].dump();
  return cs;
}

}  // namespace

CorpusSet load_corpus_set(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest: " + manifest_path);
  const json manifest = parse_json_rejecting_duplicates(in, "manifest " + manifest_path);
  return load_corpus_set_json(manifest, fs::path(manifest_path).parent_path().string());
}

std::vector<std::size_t> sample_random(const CorpusSet& corpus, std::size_t n,
                                       std::uint64_t seed) {
  if (n > corpus.n_records)
    throw AuditError("sample_random: requested " + std::to_string(n) + " of " +
                     std::to_string(corpus.n_records) + " records");
  Rng rng(seed);
  return sample_indices(corpus.n_records, n, rng);
}

std::vector<std::uint8_t> load_membership_mask(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open membership mask: " + path);
  std::vector<std::uint8_t> mask;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = rtrim(line);
    if (t == "0") {
      mask.push_back(0);
    } else if (t == "1") {
      mask.push_back(1);
    } else {
      throw ValidationError("membership mask " + path + " line " + std::to_string(line_no) +
                            " must be '0' or '1'");
    }
  }
  return mask;
}

}  // namespace kdaudit
