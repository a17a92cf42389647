#pragma once

// Mutual-information feature ranking (MIM and JMI) over equal-frequency
// discretized features, plus the top-k re-evaluation loop that reruns
// cross-validation on growing feature subsets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emf/evaluation.hpp"

namespace emf {

// Equal-frequency binning with quantile cut points; equal values always
// share a bin, constant vectors collapse to bin 0.
inline std::vector<int> discretize(std::span<const double> values, std::uint32_t bins) {
  if (bins < 2) throw std::invalid_argument("discretize: bins must be >= 2");
  const std::size_t n = values.size();
  std::vector<int> out(n, 0);
  if (n == 0) return out;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) return out;  // constant

  std::vector<double> edges;
  edges.reserve(bins - 1);
  for (std::uint32_t b = 1; b < bins; ++b) edges.push_back(sorted[b * n / bins]);
  for (std::size_t i = 0; i < n; ++i) {
    int bin = 0;
    for (double e : edges) bin += values[i] >= e;
    out[i] = bin;
  }
  return out;
}

// Plug-in estimate of I(X;Y) in nats from empirical frequencies.
inline double mutual_information(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size());
  if (x.empty()) throw std::invalid_argument("mutual_information: empty vectors");
  const double n = static_cast<double>(x.size());

  std::map<int, double> px, py;
  std::map<std::pair<int, int>, double> pxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    px[x[i]] += 1.0;
    py[y[i]] += 1.0;
    pxy[{x[i], y[i]}] += 1.0;
  }
  double info = 0.0;
  for (const auto& [key, cnt] : pxy) {
    const double pj = cnt / n;
    info += pj * std::log(pj / ((px[key.first] / n) * (py[key.second] / n)));
  }
  return info < 0.0 ? 0.0 : info;  // clamp tiny negative rounding residue
}

enum class RankMethod { MIM, JMI };

inline const char* to_string(RankMethod m) { return m == RankMethod::MIM ? "mim" : "jmi"; }

struct RankedFeatures {
  std::vector<std::size_t> ordering;  // permutation of all feature indices
  std::vector<double> scores;         // relevance aligned with ordering
  RankMethod method = RankMethod::MIM;
  std::uint32_t bins = 8;
};

// JMI joint symbols come from the cartesian product of per-feature bins,
// capped at 64 cells to keep the contingency tables dense at desk-scale
// sample counts.
inline constexpr std::uint32_t kJointCellCap = 64;

// MIM: sort by I(f_i; label) descending. JMI: greedily add
// argmax sum_{s in selected} I((f_i,f_s); label) for k rounds, then append
// the rest in MIM order. Ties always break toward the lower index.
inline RankedFeatures rank_features(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                    RankMethod method, std::uint32_t bins, std::size_t k) {
  if (rows.empty()) throw std::invalid_argument("rank_features: empty feature matrix");
  if (labels.size() != rows.size()) throw DimensionMismatch(labels.size(), rows.size());
  const std::size_t n = rows.size(), d = rows[0].size();
  if (k > d) throw std::invalid_argument("rank_features: k exceeds feature count");
  if (k == 0) k = d;

  std::vector<std::vector<int>> disc(d);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = rows[i][j];
    disc[j] = discretize(col, bins);
  }

  std::vector<double> relevance(d);
  for (std::size_t j = 0; j < d; ++j) relevance[j] = mutual_information(disc[j], labels);

  std::vector<std::size_t> mim_order(d);
  std::iota(mim_order.begin(), mim_order.end(), 0);
  std::stable_sort(mim_order.begin(), mim_order.end(), [&](std::size_t a, std::size_t b) {
    if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
    return a < b;
  });

  RankedFeatures out;
  out.method = method;
  out.bins = bins;

  if (method == RankMethod::MIM) {
    out.ordering = mim_order;
    for (std::size_t j : mim_order) out.scores.push_back(relevance[j]);
    return out;
  }

  // JMI
  std::uint32_t joint_bins = bins;
  while (joint_bins > 2 && joint_bins * joint_bins > kJointCellCap) --joint_bins;
  std::vector<std::vector<int>> jdisc(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (joint_bins == bins) {
      jdisc[j] = disc[j];
    } else {
      for (std::size_t i = 0; i < n; ++i) col[i] = rows[i][j];
      jdisc[j] = discretize(col, joint_bins);
    }
  }
  auto pair_symbols = [&](std::size_t a, std::size_t b) {
    std::vector<int> sym(n);
    for (std::size_t i = 0; i < n; ++i) sym[i] = jdisc[a][i] * static_cast<int>(joint_bins) + jdisc[b][i];
    return sym;
  };

  std::vector<bool> selected(d, false);
  const std::size_t first = mim_order[0];
  selected[first] = true;
  out.ordering.push_back(first);
  out.scores.push_back(relevance[first]);

  while (out.ordering.size() < k) {
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best = d;
    for (std::size_t cand = 0; cand < d; ++cand) {
      if (selected[cand]) continue;
      double gain = 0.0;
      for (std::size_t s : out.ordering) gain += mutual_information(pair_symbols(cand, s), labels);
      if (gain > best_gain) {
        best_gain = gain;
        best = cand;
      }
    }
    selected[best] = true;
    out.ordering.push_back(best);
    out.scores.push_back(best_gain);
  }
  for (std::size_t j : mim_order) {
    if (!selected[j]) {
      out.ordering.push_back(j);
      out.scores.push_back(relevance[j]);
    }
  }
  return out;
}

struct TopKRow {
  std::size_t k = 0;
  double threshold = 0.0;
  double tpr = 0.0;
  std::optional<double> fpr;
};

// Slices each sample down to the top-k ranked features (kept in ascending
// original index order so k = d reproduces the unranked pipeline exactly)
// and reruns cross-validation plus common-threshold selection.
inline std::vector<LabeledVector> slice_top_k(const std::vector<LabeledVector>& corpus, const RankedFeatures& ranked,
                                              std::size_t k) {
  if (k == 0 || k > ranked.ordering.size()) throw std::invalid_argument("slice_top_k: bad subset size");
  std::vector<std::size_t> keep(ranked.ordering.begin(), ranked.ordering.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(keep.begin(), keep.end());
  std::vector<LabeledVector> out;
  out.reserve(corpus.size());
  for (const auto& sample : corpus) {
    LabeledVector lv{sample.source_id, sample.label, {}};
    lv.values.reserve(k);
    for (std::size_t j : keep) lv.values.push_back(sample.values.at(j));
    out.push_back(std::move(lv));
  }
  return out;
}

inline std::vector<TopKRow> evaluate_top_k(const std::vector<LabeledVector>& corpus, const RankedFeatures& ranked,
                                           const std::vector<std::size_t>& k_values, const CvParams& cv,
                                           double fpr_cap) {
  std::vector<TopKRow> table;
  table.reserve(k_values.size());
  for (std::size_t k : k_values) {
    const auto sliced = slice_top_k(corpus, ranked, k);
    const ScoreMatrix m = cross_validate(sliced, cv);
    auto [threshold, report] = best_common_threshold(m, fpr_cap);
    table.push_back({k, threshold, report.tpr, report.fpr});
  }
  return table;
}

}  // namespace emf
