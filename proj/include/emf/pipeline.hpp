#pragma once

// Glue between the modules: trace -> feature-vector orchestration
// (onset alignment, windowing, normalization, extraction) and the CSV
// formats shared by the CLI and the evaluation harness.

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emf/evaluation.hpp"
#include "emf/features.hpp"
#include "emf/numio.hpp"
#include "emf/ranking.hpp"
#include "emf/trace.hpp"

namespace emf {

struct PipelineParams {
  RegionLayout layout;
  OnsetParams onset;
  bool align = true;  // window at the detected boot onset instead of t = 0
};

inline FeatureVector trace_to_features(const SpectralTrace& trace, const PipelineParams& params) {
  const double start = params.align ? detect_boot_onset(trace, params.onset) : 0.0;
  const SpectralTrace windowed = window_trace(trace, start, params.layout.window_ms);
  return extract_features(normalize(windowed), params.layout);
}

inline LabeledVector to_labeled(const FeatureVector& fv) {
  return {fv.trace_source, fv.label, fv.values};
}

inline std::vector<LabeledVector> corpus_to_features(const std::vector<SpectralTrace>& traces,
                                                     const PipelineParams& params) {
  std::vector<LabeledVector> out;
  out.reserve(traces.size());
  for (const auto& trace : traces) out.push_back(to_labeled(trace_to_features(trace, params)));
  return out;
}

// ---- features CSV ---------------------------------------------------------
// source_id,label,f0,...,f{n-1}; one row per observation. A missing label
// is written as an empty field.

inline void write_features_csv(std::ostream& out, const std::vector<LabeledVector>& rows) {
  if (rows.empty()) throw std::invalid_argument("write_features_csv: no rows");
  out << "source_id,label";
  for (std::size_t j = 0; j < rows[0].values.size(); ++j) out << ",f" << j;
  out << '\n';
  for (const auto& row : rows) {
    out << row.source_id << ',' << row.label.value_or("");
    for (double v : row.values) out << ',' << fmt_double(v);
    out << '\n';
  }
}

inline std::vector<LabeledVector> read_features_csv(std::istream& in) {
  std::vector<LabeledVector> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv.substr(0, 10) == "source_id,") continue;
    auto fields = split_csv_line(sv);
    if (fields.size() < 3) throw std::runtime_error("features line " + std::to_string(line_no) + ": too few fields");
    LabeledVector row;
    row.source_id = std::string(trim(fields[0]));
    const auto label = trim(fields[1]);
    if (!label.empty()) row.label = std::string(label);
    row.values.reserve(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse_double(trim(fields[i]), v))
        throw std::runtime_error("features line " + std::to_string(line_no) + ": bad value in column " +
                                 std::to_string(i));
      row.values.push_back(v);
    }
    if (!rows.empty() && rows[0].values.size() != row.values.size())
      throw std::runtime_error("features line " + std::to_string(line_no) + ": inconsistent width");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("features file has no rows");
  return rows;
}

// ---- score matrix CSV -------------------------------------------------------
// sample_id,true_label,<class...>; rows in matrix order.

inline void write_score_matrix_csv(std::ostream& out, const ScoreMatrix& m) {
  out << "sample_id,true_label";
  for (const auto& label : m.class_labels) out << ',' << label;
  out << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out << m.rows[r].trace_id << ',' << m.rows[r].true_label;
    for (double v : m.scores[r]) out << ',' << fmt_double(v);
    out << '\n';
  }
}

// ---- summary block ----------------------------------------------------------
// Flat key=value lines: tpr, fpr, threshold, k, seed, and the timing keys
// when a latency measurement ran.

inline void write_summary(std::ostream& out, const EvaluationReport& report) {
  out << "tpr=" << fmt_double(report.tpr) << '\n';
  out << "fpr=" << (report.fpr ? fmt_double(*report.fpr) : "n/a") << '\n';
  if (report.threshold) {
    out << "threshold=" << fmt_double(*report.threshold) << '\n';
  } else {
    out << "threshold=per_class\n";
  }
  out << "k=" << report.fold_count << '\n';
  out << "seed=" << fmt_u64(report.seed) << '\n';
  if (report.timing) {
    out << "mean_ms=" << fmt_double(report.timing->mean_ms) << '\n';
    out << "ci_low_ms=" << fmt_double(report.timing->ci_low_ms) << '\n';
    out << "ci_high_ms=" << fmt_double(report.timing->ci_high_ms) << '\n';
  }
}

// ---- ranking / top-k tables ---------------------------------------------------

inline void write_ranking_csv(std::ostream& out, const RankedFeatures& ranked) {
  out << "rank,feature_index,score\n";
  for (std::size_t r = 0; r < ranked.ordering.size(); ++r) {
    out << r << ',' << ranked.ordering[r] << ',' << fmt_double(ranked.scores[r]) << '\n';
  }
}

inline void write_top_k_csv(std::ostream& out, const std::vector<TopKRow>& table) {
  out << "k,threshold,tpr,fpr\n";
  for (const auto& row : table) {
    out << row.k << ',' << fmt_double(row.threshold) << ',' << fmt_double(row.tpr) << ','
        << (row.fpr ? fmt_double(*row.fpr) : "n/a") << '\n';
  }
}

inline void write_heatmap_csv(std::ostream& out, const std::vector<std::vector<int>>& grid) {
  for (const auto& row : grid) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
}

inline void write_thresholds_csv(std::ostream& out, const std::map<std::string, double>& thresholds) {
  out << "label,threshold\n";
  for (const auto& [label, t] : thresholds) out << label << ',' << fmt_double(t) << '\n';
}

inline std::map<std::string, double> read_thresholds_csv(std::istream& in) {
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.substr(0, 6) == "label,") continue;
    auto fields = split_csv_line(sv);
    double t = 0.0;
    if (fields.size() != 2 || !parse_double(trim(fields[1]), t))
      throw std::runtime_error("thresholds line " + std::to_string(line_no) + " malformed");
    out[std::string(trim(fields[0]))] = t;
  }
  return out;
}

}  // namespace emf
