#include "kdaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "kdaudit/error.hpp"
#include "kdaudit/text.hpp"

namespace kdaudit::metrics {

namespace {

std::u32string strip_whitespace_chars(std::string_view s) {
  std::u32string decoded = decode_utf8(s);
  std::u32string out;
  out.reserve(decoded.size());
  for (char32_t c : decoded) {
    if (c == U' ' || c == U'\t' || c == U'\r' || c == U'\n' || c == U'\v' || c == U'\f')
      continue;
    out.push_back(c);
  }
  return out;
}

using NgramView = std::basic_string_view<char32_t>;

// n-grams of one order as sorted views into `text`; counting duplicates on
// the sorted list avoids hashing and keeps the metric exact.
std::vector<NgramView> sorted_ngrams(const std::u32string& text, std::size_t n) {
  std::vector<NgramView> grams;
  if (text.size() >= n) {
    grams.reserve(text.size() - n + 1);
    for (std::size_t i = 0; i + n <= text.size(); ++i)
      grams.emplace_back(text.data() + i, n);
    std::sort(grams.begin(), grams.end());
  }
  return grams;
}

// Sum over distinct n-grams of min(count_a, count_b): two-pointer walk over
// the sorted lists.
std::size_t clipped_matches(const std::vector<NgramView>& a, const std::vector<NgramView>& b) {
  std::size_t matches = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      const NgramView g = a[i];
      std::size_t ca = 0, cb = 0;
      while (i < a.size() && a[i] == g) ++i, ++ca;
      while (j < b.size() && b[j] == g) ++j, ++cb;
      matches += std::min(ca, cb);
    }
  }
  return matches;
}

}  // namespace

double chrf(std::string_view hypothesis, std::string_view reference, ChrfParams params) {
  if (params.max_n < 1) throw std::invalid_argument("chrf: max_n must be >= 1");
  if (!(params.beta > 0)) throw std::invalid_argument("chrf: beta must be positive");

  const std::u32string hyp = strip_whitespace_chars(hypothesis);
  const std::u32string ref = strip_whitespace_chars(reference);
  const double beta2 = params.beta * params.beta;

  double f_sum = 0.0;
  int counted_orders = 0;
  for (int n = 1; n <= params.max_n; ++n) {
    const auto hyp_grams = sorted_ngrams(hyp, static_cast<std::size_t>(n));
    const auto ref_grams = sorted_ngrams(ref, static_cast<std::size_t>(n));
    if (hyp_grams.empty() && ref_grams.empty()) continue;
    ++counted_orders;
    if (hyp_grams.empty() || ref_grams.empty()) continue;  // F contribution 0
    const std::size_t match = clipped_matches(hyp_grams, ref_grams);
    if (match == 0) continue;
    const double prec = static_cast<double>(match) / static_cast<double>(hyp_grams.size());
    const double rec = static_cast<double>(match) / static_cast<double>(ref_grams.size());
    f_sum += (1.0 + beta2) * prec * rec / (beta2 * prec + rec);
  }
  if (counted_orders == 0) return 100.0;  // both strings empty
  return 100.0 * f_sum / counted_orders;
}

bool exact_match(std::string_view a, std::string_view b) {
  return rtrim(a) == rtrim(b);
}

double length_ratio(std::string_view source, std::string_view target) {
  const std::size_t ls = count_tokens(source);
  const std::size_t lt = count_tokens(target);
  if (ls == 0 && lt == 0) return 1.0;
  if (ls == 0 || lt == 0) return std::numeric_limits<double>::infinity();
  const auto [lo, hi] = std::minmax(ls, lt);
  return static_cast<double>(hi) / static_cast<double>(lo);
}

namespace {

template <class StringLike>
double msttr_impl(std::span<const StringLike> texts, std::size_t window) {
  if (window == 0) throw std::invalid_argument("msttr: window must be >= 1");
  std::vector<std::string_view> tokens;
  for (const auto& t : texts) {
    for (auto tok : split_tokens(std::string_view(t))) tokens.push_back(tok);
  }
  if (tokens.empty()) throw AuditError("msttr: empty token stream");

  auto ttr = [](std::span<const std::string_view> w) {
    std::unordered_set<std::string_view> types(w.begin(), w.end());
    return static_cast<double>(types.size()) / static_cast<double>(w.size());
  };

  if (tokens.size() < window) return ttr(tokens);
  const std::size_t n_windows = tokens.size() / window;
  double sum = 0.0;
  for (std::size_t w = 0; w < n_windows; ++w)
    sum += ttr(std::span<const std::string_view>(tokens.data() + w * window, window));
  return sum / static_cast<double>(n_windows);
}

}  // namespace

double msttr(std::span<const std::string_view> texts, std::size_t window) {
  return msttr_impl(texts, window);
}

double msttr(std::span<const std::string> texts, std::size_t window) {
  return msttr_impl(texts, window);
}

double geometric_mean_prob(std::span<const double> log_probs) {
  if (log_probs.empty()) throw AuditError("geometric_mean_prob: empty sequence");
  double sum = 0.0;
  for (double lp : log_probs) {
    if (lp > 0.0) throw AuditError("geometric_mean_prob: log-probability above 0");
    sum += lp;
  }
  return std::exp(sum / static_cast<double>(log_probs.size()));
}

}  // namespace kdaudit::metrics
