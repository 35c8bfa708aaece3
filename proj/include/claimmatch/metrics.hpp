#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <tuple>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "claimmatch/error.hpp"
#include "claimmatch/types.hpp"

namespace claimmatch {

struct MetricsReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
  double f1_weighted = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double fallback_rate = 0.0;
};

inline void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = nlohmann::json{{"tp", m.tp},
                     {"fp", m.fp},
                     {"tn", m.tn},
                     {"fn", m.fn},
                     {"n", m.n},
                     {"accuracy", m.accuracy},
                     {"f1_weighted", m.f1_weighted},
                     {"precision_weighted", m.precision_weighted},
                     {"recall_weighted", m.recall_weighted},
                     {"fallback_rate", m.fallback_rate}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& m) {
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.tn = j.at("tn").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  m.n = j.at("n").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.f1_weighted = j.at("f1_weighted").get<double>();
  m.precision_weighted = j.at("precision_weighted").get<double>();
  m.recall_weighted = j.at("recall_weighted").get<double>();
  m.fallback_rate = j.value("fallback_rate", 0.0);
}

namespace detail {
inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

/// Builds the report from confusion counts (Match is the positive class).
/// Per-class scores use 0 for 0/0; weighted scores average the two classes
/// by gold support.
inline MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn,
                                         std::size_t fallbacks = 0) {
  MetricsReport m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  m.n = tp + fp + tn + fn;
  if (m.n == 0) throw Error(ErrorCode::EmptyCorpus, "no predictions to score");
  const double n = static_cast<double>(m.n);
  const double dtp = static_cast<double>(tp), dfp = static_cast<double>(fp);
  const double dtn = static_cast<double>(tn), dfn = static_cast<double>(fn);

  const double p_pos = detail::safe_div(dtp, dtp + dfp);
  const double r_pos = detail::safe_div(dtp, dtp + dfn);
  const double f_pos = detail::safe_div(2 * p_pos * r_pos, p_pos + r_pos);
  const double p_neg = detail::safe_div(dtn, dtn + dfn);
  const double r_neg = detail::safe_div(dtn, dtn + dfp);
  const double f_neg = detail::safe_div(2 * p_neg * r_neg, p_neg + r_neg);
  const double s_pos = dtp + dfn;
  const double s_neg = dtn + dfp;

  m.accuracy = (dtp + dtn) / n;
  m.precision_weighted = (s_pos * p_pos + s_neg * p_neg) / n;
  m.recall_weighted = (s_pos * r_pos + s_neg * r_neg) / n;
  m.f1_weighted = (s_pos * f_pos + s_neg * f_neg) / n;
  m.fallback_rate = static_cast<double>(fallbacks) / n;
  return m;
}

inline MetricsReport compute_metrics(std::span<const Prediction> preds, std::span<const ClaimPair> gold) {
  std::unordered_map<std::string, Label> gold_labels;
  for (const auto& g : gold)
    if (!gold_labels.emplace(g.pair_id, g.label).second)
      throw Error(ErrorCode::DuplicateId, "gold pair " + g.pair_id);
  if (preds.size() != gold_labels.size())
    throw Error(ErrorCode::IdMismatch, std::to_string(preds.size()) + " predictions for " +
                                           std::to_string(gold_labels.size()) + " gold pairs");

  std::unordered_set<std::string> seen;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, fallbacks = 0;
  for (const auto& p : preds) {
    if (!seen.insert(p.pair_id).second) throw Error(ErrorCode::DuplicateId, "prediction " + p.pair_id);
    auto it = gold_labels.find(p.pair_id);
    if (it == gold_labels.end()) throw Error(ErrorCode::IdMismatch, "prediction " + p.pair_id + " has no gold pair");
    const bool gold_pos = it->second == Label::Match;
    const bool pred_pos = p.label == Label::Match;
    if (gold_pos && pred_pos) ++tp;
    else if (!gold_pos && pred_pos) ++fp;
    else if (!gold_pos) ++tn;
    else ++fn;
    if (p.parse_status == ParseStatus::FallbackNegative) ++fallbacks;
  }
  return metrics_from_counts(tp, fp, tn, fn, fallbacks);
}

/// Percentage with one decimal, e.g. 0.9623 -> "96.2".
inline std::string format_percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

// ---------------------------------------------------------------------------
// Run comparison

struct RunRow {
  std::string config_id;
  std::string model;
  std::string template_label;  // "PD-6" or "NLI-5 & PD-6"
  std::string mode;            // e.g. "single/few"
  std::optional<MetricsReport> report;
  std::string error;           // set when the run failed

  bool failed() const { return !report.has_value(); }
};

inline void to_json(nlohmann::json& j, const RunRow& r) {
  j = nlohmann::json{{"config_id", r.config_id},
                     {"model", r.model},
                     {"template", r.template_label},
                     {"mode", r.mode}};
  if (r.report) j["metrics"] = *r.report;
  else j["error"] = r.error;
}

/// Best F1 first, then accuracy, then config id; failed runs last.
inline std::vector<RunRow> compare_runs(std::vector<RunRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const RunRow& a, const RunRow& b) {
    if (a.failed() != b.failed()) return !a.failed();
    if (!a.failed()) {
      if (a.report->f1_weighted != b.report->f1_weighted) return a.report->f1_weighted > b.report->f1_weighted;
      if (a.report->accuracy != b.report->accuracy) return a.report->accuracy > b.report->accuracy;
    }
    return a.config_id < b.config_id;
  });
  return rows;
}

inline std::string render_table(const std::vector<RunRow>& rows) {
  std::vector<std::vector<std::string>> cells{{"model", "template", "mode", "F1, %", "Acc., %"}};
  for (const auto& r : rows) {
    if (r.report)
      cells.push_back({r.model, r.template_label, r.mode, format_percent(r.report->f1_weighted),
                       format_percent(r.report->accuracy)});
    else
      cells.push_back({r.model, r.template_label, r.mode, "FAILED", r.error});
  }
  std::vector<std::size_t> width(5, 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size()) out << std::string(width[c] - row[c].size() + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

/// Mean and standard error over repeated runs of one configuration.
struct AggregateReport {
  std::size_t runs = 0;
  double mean_f1 = 0.0;
  double stderr_f1 = 0.0;
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;
};

inline void to_json(nlohmann::json& j, const AggregateReport& a) {
  j = nlohmann::json{{"runs", a.runs},
                     {"mean_f1", a.mean_f1},
                     {"stderr_f1", a.stderr_f1},
                     {"mean_accuracy", a.mean_accuracy},
                     {"stderr_accuracy", a.stderr_accuracy}};
}

inline AggregateReport aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyCorpus, "nothing to aggregate");
  auto mean_se = [&](auto field) {
    const double n = static_cast<double>(reports.size());
    double sum = 0.0;
    for (const auto& r : reports) sum += field(r);
    const double mean = sum / n;
    if (reports.size() < 2) return std::make_pair(mean, 0.0);
    double ss = 0.0;
    for (const auto& r : reports) ss += (field(r) - mean) * (field(r) - mean);
    return std::make_pair(mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n));
  };
  AggregateReport a;
  a.runs = reports.size();
  std::tie(a.mean_f1, a.stderr_f1) = mean_se([](const MetricsReport& r) { return r.f1_weighted; });
  std::tie(a.mean_accuracy, a.stderr_accuracy) = mean_se([](const MetricsReport& r) { return r.accuracy; });
  return a;
}

}  // namespace claimmatch
