#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/error.hpp"
#include "hyperdet/hypergraph.hpp"

namespace hyperdet {

struct Confusion {
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Conventions: empty prediction scores precision 1 only when there are no
// true sources either (0 otherwise); with no true sources recall is 1.
inline Confusion confusion_metrics(const std::vector<NodeId>& predicted, const std::vector<NodeId>& truth,
                                   std::size_t n) {
  std::vector<std::uint8_t> p(n, 0), t(n, 0);
  for (NodeId v : predicted) {
    if (v >= n) throw ShapeError("confusion_metrics: predicted id out of range");
    p[v] = 1;
  }
  for (NodeId v : truth) {
    if (v >= n) throw ShapeError("confusion_metrics: source id out of range");
    t[v] = 1;
  }
  std::size_t tp = 0, np = 0, nt = 0, correct = 0;
  for (std::size_t v = 0; v < n; ++v) {
    tp += p[v] & t[v];
    np += p[v];
    nt += t[v];
    correct += p[v] == t[v];
  }
  Confusion c;
  c.acc = n == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(n);
  c.precision = np == 0 ? (nt == 0 ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(np);
  c.recall = nt == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(nt);
  const double s = c.precision + c.recall;
  c.f1 = s == 0.0 ? 0.0 : 2.0 * c.precision * c.recall / s;
  return c;
}

// Mann-Whitney AUC with average ranks for ties. NaN when only one class is
// present; aggregates skip NaN entries.
inline double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: score and label lengths differ");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t r = i; r < j; ++r)
      if (labels[order[r]]) {
        pos_rank_sum += avg;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double u = pos_rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

struct SnapshotMetrics {
  double acc = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  double auc = std::numeric_limits<double>::quiet_NaN();
};

inline SnapshotMetrics score_snapshot(const std::vector<NodeId>& predicted, const std::vector<double>& scores,
                                      const std::vector<NodeId>& truth) {
  const std::size_t n = scores.size();
  const Confusion c = confusion_metrics(predicted, truth, n);
  std::vector<std::uint8_t> labels(n, 0);
  for (NodeId v : truth) labels[v] = 1;
  return {c.acc, c.precision, c.recall, c.f1, auc(scores, labels)};
}

struct Summary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // sample standard deviation
  std::size_t count = 0;                                   // finite entries used
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  std::vector<double> v;
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  s.count = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

inline const char* const kMetricNames[] = {"acc", "precision", "recall", "f1", "auc"};

inline double metric_value(const SnapshotMetrics& m, std::size_t i) {
  switch (i) {
    case 0: return m.acc;
    case 1: return m.precision;
    case 2: return m.recall;
    case 3: return m.f1;
    default: return m.auc;
  }
}

// Per-snapshot rows plus macro aggregates (arithmetic mean over snapshots).
struct MetricsReport {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<SnapshotMetrics> rows;

  Summary summary(std::size_t metric) const {
    std::vector<double> xs;
    for (const auto& r : rows) xs.push_back(metric_value(r, metric));
    return summarize(xs);
  }
  double mean(const std::string& metric) const {
    for (std::size_t i = 0; i < 5; ++i)
      if (metric == kMetricNames[i]) return summary(i).mean;
    throw Error("unknown metric '" + metric + "'");
  }
};

namespace detail {
inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }
inline double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace detail

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json agg = nlohmann::json::object();
  for (std::size_t i = 0; i < 5; ++i) {
    const Summary s = r.summary(i);
    agg[kMetricNames[i]] = {{"mean", detail::finite_or_null(s.mean)},
                            {"std", detail::finite_or_null(s.std)},
                            {"count", s.count}};
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : r.rows) {
    nlohmann::json row;
    for (std::size_t i = 0; i < 5; ++i) row[kMetricNames[i]] = detail::finite_or_null(metric_value(m, i));
    rows.push_back(row);
  }
  return {{"aggregation", "macro mean over snapshots; std is the sample standard deviation; "
                          "undefined AUC (single-class snapshot) is null and skipped"},
          {"meta", r.meta},
          {"aggregate", agg},
          {"snapshots", rows}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.meta = j.value("meta", nlohmann::json::object());
  for (const auto& row : j.at("snapshots")) {
    SnapshotMetrics m;
    m.acc = detail::from_nullable(row.at("acc"));
    m.precision = detail::from_nullable(row.at("precision"));
    m.recall = detail::from_nullable(row.at("recall"));
    m.f1 = detail::from_nullable(row.at("f1"));
    m.auc = detail::from_nullable(row.at("auc"));
    r.rows.push_back(m);
  }
  return r;
}

inline void write_report_csv(std::ostream& out, const MetricsReport& r) {
  out << "snapshot,acc,precision,recall,f1,auc\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out << i;
    for (std::size_t k = 0; k < 5; ++k) {
      const double x = metric_value(r.rows[i], k);
      out << ',';
      if (std::isfinite(x)) out << x;
    }
    out << '\n';
  }
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(path + ": " + ex.what());
  }
}

inline void save_report(const MetricsReport& r, const std::string& stem) {
  write_json_file(report_to_json(r), stem + ".json");
  std::ofstream csv(stem + ".csv");
  if (!csv) throw IoError("cannot write '" + stem + ".csv'");
  write_report_csv(csv, r);
}

// Long-format series for plotting: one row per (arm, metric).
inline void write_series_csv(std::ostream& out, const std::string& axis, const std::vector<std::string>& keys,
                             const std::vector<MetricsReport>& reports) {
  out << axis << ",method,metric,mean,std,count\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::string method = reports[i].meta.value("method", "hyperdet");
    for (std::size_t k = 0; k < 5; ++k) {
      const Summary s = reports[i].summary(k);
      out << keys[i] << ',' << method << ',' << kMetricNames[k] << ',';
      if (std::isfinite(s.mean)) out << s.mean;
      out << ',';
      if (std::isfinite(s.std)) out << s.std;
      out << ',' << s.count << '\n';
    }
  }
}

}  // namespace hyperdet
