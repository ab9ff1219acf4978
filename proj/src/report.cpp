#include "kdaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "kdaudit/error.hpp"

namespace kdaudit::report {

using nlohmann::json;

namespace {

const char* kDefaultRegistry[] = {
    "replication_tc",       "replication_tt",        "exmem_rate_tc",
    "exmem_rate_tt",        "exmem_count_tc",        "exmem_count_tt",
    "exmem_primary_count",  "exmem_secondary_count", "oschal",
    "nathal",               "exact_match",           "chrf",
    "bleu",                 "ter",                   "comet-20",
    "comet-22",             "comet-qe-20",           "comet-qe-22",
    "msttr",
};

std::string fmt(double v, int decimals) {
  char buf[48];
  if (v == 0.0) v = 0.0;  // normalize -0
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

MetricTable::MetricTable() {
  for (const char* name : kDefaultRegistry) register_metric(name);
}

void MetricTable::register_metric(const std::string& name) {
  if (registry_.insert(name).second) registry_order_.push_back(name);
}

bool MetricTable::known_metric(const std::string& name) const {
  return registry_.count(name) > 0;
}

void MetricTable::set(const std::string& pair, const std::string& role,
                      const std::string& metric, double value) {
  if (!known_metric(metric))
    throw ValidationError("metric \"" + metric + "\" is not in the table registry");
  auto [it, inserted] = cells_.emplace(std::make_tuple(pair, role, metric), value);
  if (!inserted)
    throw ValidationError("duplicate cell (" + pair + ", " + role + ", " + metric + ")");
}

double MetricTable::get(const std::string& pair, const std::string& role,
                        const std::string& metric) const {
  auto it = cells_.find(std::make_tuple(pair, role, metric));
  if (it == cells_.end())
    throw ValidationError("missing cell (" + pair + ", " + role + ", " + metric + ")");
  return it->second;
}

bool MetricTable::has(const std::string& pair, const std::string& role,
                      const std::string& metric) const {
  return cells_.count(std::make_tuple(pair, role, metric)) > 0;
}

std::vector<std::string> MetricTable::pairs() const {
  std::set<std::string> seen;
  for (const auto& [key, value] : cells_) seen.insert(std::get<0>(key));
  return {seen.begin(), seen.end()};
}

std::vector<std::string> MetricTable::roles() const {
  std::set<std::string> seen;
  for (const auto& [key, value] : cells_) seen.insert(std::get<1>(key));
  return {seen.begin(), seen.end()};
}

std::vector<std::string> MetricTable::metrics_present() const {
  std::set<std::string> seen;
  for (const auto& [key, value] : cells_) seen.insert(std::get<2>(key));
  std::vector<std::string> out;
  for (const auto& name : registry_order_)
    if (seen.erase(name)) out.push_back(name);
  out.insert(out.end(), seen.begin(), seen.end());
  return out;
}

void MetricTable::merge(const MetricTable& other) {
  for (const auto& name : other.registry_order_) register_metric(name);
  for (const auto& [key, value] : other.cells_) {
    auto it = cells_.find(key);
    if (it == cells_.end()) {
      cells_.emplace(key, value);
    } else if (it->second != value) {
      throw ValidationError("conflicting values for cell (" + std::get<0>(key) + ", " +
                            std::get<1>(key) + ", " + std::get<2>(key) + ")");
    }
  }
}

json MetricTable::to_json() const {
  json doc = json::object();
  for (const auto& [key, value] : cells_)
    doc[std::get<0>(key)][std::get<1>(key)][std::get<2>(key)] = value;
  return doc;
}

MetricTable MetricTable::from_json(const json& doc) {
  MetricTable table;
  for (const auto& [pair, roles] : doc.items()) {
    // Emitted reports carry a summaries section; fixture files may carry
    // underscore-prefixed annotations. Neither is table data.
    if (pair == "summaries" || (!pair.empty() && pair[0] == '_')) continue;
    for (const auto& [role, metrics] : roles.items()) {
      for (const auto& [metric, value] : metrics.items()) {
        table.register_metric(metric);
        table.set(pair, role, metric, value.get<double>());
      }
    }
  }
  return table;
}

double percent_change(double new_value, double old_value) {
  if (old_value == 0.0) throw AuditError("percent_change: reference value is 0");
  return 100.0 * (new_value - old_value) / old_value;
}

DeltaSummary summarize_deltas(const std::string& metric,
                              std::vector<std::pair<std::string, double>> per_pair_changes) {
  if (per_pair_changes.empty()) throw AuditError("summarize_deltas: empty input");
  DeltaSummary s;
  s.metric = metric;
  s.per_pair = std::move(per_pair_changes);
  double sum = 0.0;
  for (const auto& [pair, v] : s.per_pair) sum += v;
  s.mean = sum / static_cast<double>(s.per_pair.size());
  double sq = 0.0;
  for (const auto& [pair, v] : s.per_pair) sq += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(sq / static_cast<double>(s.per_pair.size()));
  return s;
}

std::vector<DeltaSummary> compare_models(const MetricTable& table, const std::string& subject,
                                         const std::string& reference,
                                         std::span<const std::string> metrics) {
  const auto pairs = table.pairs();
  std::vector<DeltaSummary> out;
  for (const auto& metric : metrics) {
    std::vector<std::pair<std::string, double>> changes;
    for (const auto& pair : pairs)
      changes.emplace_back(pair,
                           percent_change(table.get(pair, subject, metric),
                                          table.get(pair, reference, metric)));
    DeltaSummary s = summarize_deltas(metric, std::move(changes));
    s.subject = subject;
    s.reference = reference;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DeltaSummary> summarize_metrics(const MetricTable& table, const std::string& role,
                                            std::span<const std::string> metrics) {
  const auto pairs = table.pairs();
  std::vector<DeltaSummary> out;
  for (const auto& metric : metrics) {
    std::vector<std::pair<std::string, double>> values;
    for (const auto& pair : pairs) values.emplace_back(pair, table.get(pair, role, metric));
    DeltaSummary s = summarize_deltas(metric, std::move(values));
    s.subject = role;
    out.push_back(std::move(s));
  }
  return out;
}

Format format_from_string(std::string_view s) {
  if (s == "tsv") return Format::tsv;
  if (s == "json") return Format::json;
  if (s == "markdown") return Format::markdown;
  if (s == "plot_csv") return Format::plot_csv;
  throw ValidationError("unknown report format: \"" + std::string(s) + "\"");
}

namespace {

void emit_long(std::ostream& out, const MetricTable& table, char sep) {
  out << "pair" << sep << "role" << sep << "metric" << sep << "value\n";
  // Cell order follows the map key order: pair, then role, then metric.
  for (const auto& [key, value] : table.cells()) {
    out << std::get<0>(key) << sep << std::get<1>(key) << sep << std::get<2>(key) << sep
        << fmt(value, 3) << '\n';
  }
}

void emit_summaries_tsv(std::ostream& out, std::span<const DeltaSummary> summaries) {
  if (summaries.empty()) return;
  out << "metric\tsubject\treference\tmean\tstd";
  for (const auto& [pair, v] : summaries.front().per_pair) out << '\t' << pair;
  out << '\n';
  for (const auto& s : summaries) {
    out << s.metric << '\t' << s.subject << '\t' << (s.reference.empty() ? "-" : s.reference)
        << '\t' << fmt(s.mean, 1) << '\t' << fmt(s.std_dev, 1);
    for (const auto& [pair, v] : s.per_pair) out << '\t' << fmt(v, 1);
    out << '\n';
  }
}

void emit_markdown(std::ostream& out, const MetricTable& table,
                   std::span<const DeltaSummary> summaries) {
  const auto metrics = table.metrics_present();
  out << "| pair | role |";
  for (const auto& m : metrics) out << ' ' << m << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& pair : table.pairs()) {
    for (const auto& role : table.roles()) {
      bool any = false;
      for (const auto& m : metrics) any = any || table.has(pair, role, m);
      if (!any) continue;
      out << "| " << pair << " | " << role << " |";
      for (const auto& m : metrics) {
        out << ' ';
        if (table.has(pair, role, m))
          out << fmt(table.get(pair, role, m), 3);
        else
          out << "n/a";
        out << " |";
      }
      out << '\n';
    }
  }
  if (!summaries.empty()) {
    out << "\n| metric | subject | reference | mean | std |\n|---|---|---|---|---|\n";
    for (const auto& s : summaries) {
      out << "| " << s.metric << " | " << s.subject << " | "
          << (s.reference.empty() ? "-" : s.reference) << " | " << fmt(s.mean, 1) << " | "
          << fmt(s.std_dev, 1) << " |\n";
    }
  }
}

json summaries_json(std::span<const DeltaSummary> summaries) {
  json arr = json::array();
  for (const auto& s : summaries) {
    json entry;
    entry["metric"] = s.metric;
    entry["subject"] = s.subject;
    entry["reference"] = s.reference.empty() ? json() : json(s.reference);
    json per_pair = json::object();
    for (const auto& [pair, v] : s.per_pair) per_pair[pair] = v;
    entry["per_pair"] = per_pair;
    entry["mean"] = s.mean;
    entry["std"] = s.std_dev;
    arr.push_back(entry);
  }
  return arr;
}

}  // namespace

void emit(std::ostream& out, const MetricTable& table, std::span<const DeltaSummary> summaries,
          Format format) {
  switch (format) {
    case Format::tsv:
      emit_long(out, table, '\t');
      if (!summaries.empty()) {
        out << '\n';
        emit_summaries_tsv(out, summaries);
      }
      return;
    case Format::plot_csv:
      emit_long(out, table, ',');
      return;
    case Format::markdown:
      emit_markdown(out, table, summaries);
      return;
    case Format::json: {
      json doc = table.to_json();
      if (!summaries.empty()) doc["summaries"] = summaries_json(summaries);
      out << doc.dump(2) << '\n';
      return;
    }
  }
}

}  // namespace kdaudit::report
