#pragma once

// Aggregation of per-model metrics into comparison tables: per-pair
// percentual changes, cross-language mean with population standard
// deviation, and deterministic exports (tsv, json, markdown, plot csv).

#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kdaudit::report {

// Rows keyed by (language_pair, role, metric). Metric names must come from
// the table's registry; the default registry covers the audit pipeline's
// outputs plus common ingested quality scores.
class MetricTable {
public:
  MetricTable();

  void register_metric(const std::string& name);
  bool known_metric(const std::string& name) const;
  const std::vector<std::string>& registry_order() const { return registry_order_; }

  void set(const std::string& pair, const std::string& role, const std::string& metric,
           double value);
  double get(const std::string& pair, const std::string& role, const std::string& metric) const;
  bool has(const std::string& pair, const std::string& role, const std::string& metric) const;

  std::vector<std::string> pairs() const;
  std::vector<std::string> roles() const;
  std::vector<std::string> metrics_present() const;  // registry order first

  using Cells = std::map<std::tuple<std::string, std::string, std::string>, double>;
  const Cells& cells() const { return cells_; }

  // Duplicate keys with differing values are errors; identical cells merge.
  void merge(const MetricTable& other);

  nlohmann::json to_json() const;
  static MetricTable from_json(const nlohmann::json& doc);

private:
  Cells cells_;
  std::set<std::string> registry_;
  std::vector<std::string> registry_order_;
};

// 100 * (new - old) / old. Throws when old == 0.
double percent_change(double new_value, double old_value);

struct DeltaSummary {
  std::string metric;
  std::string subject;
  std::string reference;  // empty for raw-value (mean-mode) summaries
  std::vector<std::pair<std::string, double>> per_pair;
  double mean = 0.0;
  double std_dev = 0.0;  // population (divide by N)
};

// Mean and population standard deviation of the given per-pair changes.
DeltaSummary summarize_deltas(const std::string& metric,
                              std::vector<std::pair<std::string, double>> per_pair_changes);

// One DeltaSummary per metric: the per-pair percentual change of subject
// over reference, across every language pair in the table. Missing cells
// throw, naming (pair, role, metric).
std::vector<DeltaSummary> compare_models(const MetricTable& table, const std::string& subject,
                                         const std::string& reference,
                                         std::span<const std::string> metrics);

// Companion mean mode: summarize a role's raw values across pairs.
std::vector<DeltaSummary> summarize_metrics(const MetricTable& table, const std::string& role,
                                            std::span<const std::string> metrics);

enum class Format { tsv, json, markdown, plot_csv };

Format format_from_string(std::string_view s);

// Deterministic bytes for a fixed input: stable key order, metric cells to
// three decimals, percentual summaries to one decimal (json keeps full
// precision for downstream consumption).
void emit(std::ostream& out, const MetricTable& table, std::span<const DeltaSummary> summaries,
          Format format);

}  // namespace kdaudit::report
