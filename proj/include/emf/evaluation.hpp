#pragma once

// Experiment harness: per-class k-fold cross-validation, the score matrix
// of every test observation against every class model, TPR/FPR at common
// or per-class thresholds, threshold selection by exhaustive sweep over
// the observed scores, and decision-latency measurement.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emf/ocsvm.hpp"
#include "emf/prng.hpp"

namespace emf {

// A feature row ready for training/evaluation. Unlike FeatureVector this
// carries no layout, so ranked subsets and CSV-loaded rows fit too.
struct LabeledVector {
  std::string source_id;
  std::optional<std::string> label;
  std::vector<double> values;
};

struct TooFewSamples : std::runtime_error {
  TooFewSamples(std::size_t n, std::size_t k)
      : std::runtime_error("cannot split " + std::to_string(n) + " samples into " + std::to_string(k) + " folds") {}
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint, exhaustive folds whose sizes differ by at most one;
// deterministic for a fixed seed.
inline std::vector<Fold> kfold_split(std::size_t sample_count, std::uint32_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be at least 2");
  if (sample_count < k) throw TooFewSamples(sample_count, k);

  std::vector<std::size_t> order(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) order[i] = i;
  SplitMix64 rng(seed);
  for (std::size_t i = sample_count - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < sample_count; ++i) folds[i % k].test.push_back(order[i]);
  for (std::uint32_t f = 0; f < k; ++f) {
    std::sort(folds[f].test.begin(), folds[f].test.end());
    for (std::size_t i = 0; i < sample_count; ++i) {
      if (!std::binary_search(folds[f].test.begin(), folds[f].test.end(), i)) folds[f].train.push_back(i);
    }
  }
  return folds;
}

struct ScoreRow {
  std::string trace_id;
  std::string true_label;
};

struct ScoreMatrix {
  std::vector<std::string> class_labels;       // sorted
  std::vector<ScoreRow> rows;                  // fold-major, then class, then sample
  std::vector<std::vector<double>> scores;     // rows x class_labels
};

struct CvParams {
  std::uint32_t k = 10;
  OcsvmParams svm;
  std::uint64_t seed = 0;
};

// In each fold: one model per class trained on that class's training
// indices only, then every test sample of every class is scored against
// every model. A test sample never meets a model whose training set
// contains it.
inline ScoreMatrix cross_validate(const std::vector<LabeledVector>& corpus, const CvParams& params) {
  if (corpus.empty()) throw std::invalid_argument("cross_validate: empty corpus");

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].label) throw std::invalid_argument("cross_validate: sample " + corpus[i].source_id + " has no label");
    by_label[*corpus[i].label].push_back(i);
  }

  ScoreMatrix m;
  for (const auto& [label, idx] : by_label) m.class_labels.push_back(label);

  std::vector<std::vector<Fold>> folds;  // per class, kfold order
  {
    std::size_t class_idx = 0;
    for (const auto& [label, idx] : by_label) {
      folds.push_back(kfold_split(idx.size(), params.k, derive_seed(params.seed, class_idx)));
      ++class_idx;
    }
  }

  for (std::uint32_t f = 0; f < params.k; ++f) {
    std::vector<OneClassModel> models;
    models.reserve(m.class_labels.size());
    std::size_t class_idx = 0;
    for (const auto& [label, idx] : by_label) {
      std::vector<std::vector<double>> rows;
      rows.reserve(folds[class_idx][f].train.size());
      for (std::size_t local : folds[class_idx][f].train) rows.push_back(corpus[idx[local]].values);
      models.push_back(train(rows, params.svm, label));
      ++class_idx;
    }
    class_idx = 0;
    for (const auto& [label, idx] : by_label) {
      for (std::size_t local : folds[class_idx][f].test) {
        const LabeledVector& sample = corpus[idx[local]];
        std::vector<double> row_scores;
        row_scores.reserve(models.size());
        for (const auto& model : models) row_scores.push_back(score(model, sample.values));
        m.rows.push_back({sample.source_id, label});
        m.scores.push_back(std::move(row_scores));
      }
      ++class_idx;
    }
  }
  return m;
}

struct LatencyStats {
  double mean_ms = 0.0;
  double ci_low_ms = 0.0;
  double ci_high_ms = 0.0;
  bool degenerate = false;
};

struct EvaluationReport {
  double tpr = 0.0;
  std::optional<double> fpr;                    // empty when there are no negatives
  std::optional<double> threshold;              // common threshold, when one was used
  std::map<std::string, double> class_thresholds;
  std::uint32_t fold_count = 0;
  std::uint64_t seed = 0;
  std::optional<LatencyStats> timing;
};

namespace detail {

template <typename ThresholdFn>
EvaluationReport tpr_fpr_impl(const ScoreMatrix& m, ThresholdFn threshold_for) {
  if (m.rows.empty()) throw std::invalid_argument("tpr_fpr: empty score matrix");
  std::size_t pos = 0, pos_hit = 0, neg = 0, neg_hit = 0;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    for (std::size_t c = 0; c < m.class_labels.size(); ++c) {
      const bool positive = m.rows[r].true_label == m.class_labels[c];
      const bool accepted = m.scores[r][c] >= threshold_for(c);
      if (positive) {
        ++pos;
        pos_hit += accepted;
      } else {
        ++neg;
        neg_hit += accepted;
      }
    }
  }
  EvaluationReport rep;
  rep.tpr = pos == 0 ? 0.0 : static_cast<double>(pos_hit) / static_cast<double>(pos);
  if (neg > 0) rep.fpr = static_cast<double>(neg_hit) / static_cast<double>(neg);
  return rep;
}

}  // namespace detail

inline EvaluationReport tpr_fpr(const ScoreMatrix& m, double threshold) {
  EvaluationReport rep = detail::tpr_fpr_impl(m, [&](std::size_t) { return threshold; });
  rep.threshold = threshold;
  return rep;
}

inline EvaluationReport tpr_fpr(const ScoreMatrix& m, const std::map<std::string, double>& per_class) {
  std::vector<double> t(m.class_labels.size());
  for (std::size_t c = 0; c < m.class_labels.size(); ++c) {
    auto it = per_class.find(m.class_labels[c]);
    if (it == per_class.end())
      throw std::invalid_argument("tpr_fpr: no threshold for class " + m.class_labels[c]);
    t[c] = it->second;
  }
  EvaluationReport rep = detail::tpr_fpr_impl(m, [&](std::size_t c) { return t[c]; });
  rep.class_thresholds = per_class;
  return rep;
}

namespace detail {

// distinct observed scores, midpoints between neighbours, and sentinels
// beyond both ends
inline std::vector<double> threshold_candidates(const std::vector<double>& scores) {
  std::vector<double> s = scores;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<double> cand;
  cand.reserve(2 * s.size() + 2);
  cand.push_back(s.front() - 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    cand.push_back(s[i]);
    if (i + 1 < s.size()) cand.push_back(s[i] + (s[i + 1] - s[i]) / 2.0);
  }
  cand.push_back(s.back() + 1.0);
  return cand;
}

}  // namespace detail

// Highest threshold that maximizes TPR subject to FPR <= fpr_cap. The cap
// is always satisfiable: above the top score FPR is 0.
inline std::pair<double, EvaluationReport> best_common_threshold(const ScoreMatrix& m, double fpr_cap) {
  if (m.rows.empty()) throw std::invalid_argument("best_common_threshold: empty score matrix");
  std::vector<double> all;
  all.reserve(m.rows.size() * m.class_labels.size());
  for (const auto& row : m.scores)
    for (double v : row) all.push_back(v);

  double best_t = 0.0, best_tpr = -1.0;
  for (double t : detail::threshold_candidates(all)) {
    EvaluationReport rep = tpr_fpr(m, t);
    const double fpr = rep.fpr.value_or(0.0);
    if (fpr > fpr_cap) continue;
    if (rep.tpr > best_tpr || (rep.tpr == best_tpr && t > best_t)) {
      best_tpr = rep.tpr;
      best_t = t;
    }
  }
  EvaluationReport rep = tpr_fpr(m, best_t);
  return {best_t, rep};
}

namespace detail {

inline ScoreMatrix single_column(const ScoreMatrix& m, const std::string& class_label) {
  auto it = std::find(m.class_labels.begin(), m.class_labels.end(), class_label);
  if (it == m.class_labels.end())
    throw std::invalid_argument("unknown class label " + class_label);
  const std::size_t c = static_cast<std::size_t>(it - m.class_labels.begin());
  ScoreMatrix out;
  out.class_labels = {class_label};
  out.rows = m.rows;
  out.scores.reserve(m.scores.size());
  for (const auto& row : m.scores) out.scores.push_back({row[c]});
  return out;
}

}  // namespace detail

inline double per_class_threshold(const ScoreMatrix& m, const std::string& class_label, double fpr_cap) {
  return best_common_threshold(detail::single_column(m, class_label), fpr_cap).first;
}

inline std::map<std::string, double> per_class_thresholds(const ScoreMatrix& m, double fpr_cap) {
  std::map<std::string, double> out;
  for (const auto& label : m.class_labels) out[label] = per_class_threshold(m, label, fpr_cap);
  return out;
}

// Wall-clock cost of one full decision: score the probe against every
// model and compare with the threshold. Monotonic clock, five warm-up
// decisions discarded, 95% normal-approximation confidence interval.
inline LatencyStats measure_decision_latency(const std::vector<OneClassModel>& models,
                                             const std::vector<std::vector<double>>& probes,
                                             double threshold = 0.0) {
  if (models.empty()) return {0.0, 0.0, 0.0, true};
  if (probes.size() < 30) throw std::invalid_argument("measure_decision_latency: need at least 30 probes");

  volatile int sink = 0;
  for (std::size_t warm = 0; warm < 5; ++warm) {
    for (const auto& model : models)
      sink = sink + (decide(score(model, probes[warm % probes.size()]), threshold) == Verdict::Authorized);
  }

  std::vector<double> ms;
  ms.reserve(probes.size());
  for (const auto& probe : probes) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& model : models)
      sink = sink + (decide(score(model, probe), threshold) == Verdict::Authorized);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  double sum = 0.0;
  for (double v : ms) sum += v;
  const double mean = sum / static_cast<double>(ms.size());
  double sq = 0.0;
  for (double v : ms) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(ms.size() - 1));
  const double half = 1.96 * sd / std::sqrt(static_cast<double>(ms.size()));
  return {mean, mean - half, mean + half, false};
}

}  // namespace emf
