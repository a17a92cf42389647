#pragma once

// Test-only reference implementations, written independently of the
// library code paths they check:
//   - naive_five_stats / naive_region_features: literal term-by-term
//     transcription of the statistic formulas and an interval-membership
//     region partition
//   - reference_ocsvm: dense projected-gradient (FISTA) solver for the
//     one-class dual, with exact projection onto the box-simplex
//   - sweep_best_threshold: brute-force threshold selection by direct
//     counting
// Keep these boring and obviously correct.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "emf/evaluation.hpp"
#include "emf/features.hpp"
#include "emf/trace.hpp"

namespace oracle {

struct NaiveStats {
  double mean, std_dev, variance, skewness, kurtosis;
};

inline NaiveStats naive_five_stats(const std::vector<double>& x) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);

  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum_sq += std::pow(x[i] - mean, 2.0);

  NaiveStats st{mean, 0.0, 0.0, 0.0, 0.0};
  if (n >= 2) {
    st.variance = sum_sq / static_cast<double>(n - 1);
    st.std_dev = std::sqrt(st.variance);
  }
  if (sum_sq > 0.0 && n >= 2) {
    double sum_cube = 0.0, sum_quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_cube += std::pow(x[i] - mean, 3.0);
      sum_quad += std::pow(x[i] - mean, 4.0);
    }
    const double num_skew = sum_cube / static_cast<double>(n);
    const double den_skew = std::pow(sum_sq / static_cast<double>(n - 1), 1.5);
    st.skewness = num_skew / den_skew;
    const double den_kurt = (1.0 / static_cast<double>(n)) * std::pow(sum_sq, 2.0);
    st.kurtosis = sum_quad / den_kurt;
  }
  return st;
}

// Region features by explicit interval membership against the grid
// returned by build_region_grid. The last frequency cell of a row closes
// at the stop frequency.
inline std::vector<double> naive_region_features(const emf::NormalizedTrace& norm, const emf::RegionLayout& layout) {
  const auto grid = emf::build_region_grid(layout);
  std::vector<double> features;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& region = grid[g];
    const bool closes_at_stop = region.f_hi_hz == layout.band_stop_hz;
    std::vector<double> members;
    for (const auto& s : norm.trace.samples) {
      const bool t_in = s.timestamp_ms >= region.t_lo_ms && s.timestamp_ms < region.t_hi_ms;
      const bool f_in = s.frequency_hz >= region.f_lo_hz &&
                        (s.frequency_hz < region.f_hi_hz || (closes_at_stop && s.frequency_hz == region.f_hi_hz));
      if (t_in && f_in) members.push_back(s.power_dbm);
    }
    NaiveStats st{0, 0, 0, 0, 0};
    if (!members.empty()) st = naive_five_stats(members);
    features.push_back(st.mean);
    features.push_back(st.std_dev);
    features.push_back(st.variance);
    features.push_back(st.skewness);
    features.push_back(st.kurtosis);
  }
  return features;
}

// ---- dense projected-gradient reference solver ----------------------------

// Exact Euclidean projection onto {0 <= a_i <= c, sum a = 1} by bisection
// on the shift multiplier.
inline std::vector<double> project_box_simplex(const std::vector<double>& v, double c) {
  double lo = -1.0, hi = 1.0;
  for (double x : v) {
    lo = std::min(lo, x - c - 1.0);
    hi = std::max(hi, x + 1.0);
  }
  auto mass = [&](double shift) {
    double total = 0.0;
    for (double x : v) total += std::clamp(x - shift, 0.0, c);
    return total;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (mass(mid) > 1.0) lo = mid;
    else hi = mid;
  }
  const double shift = (lo + hi) / 2.0;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] - shift, 0.0, c);
  // exact renormalization of the clip residue onto the free coordinates
  double total = 0.0;
  for (double x : out) total += x;
  double free_count = 0.0;
  for (double x : out) free_count += (x > 0.0 && x < c) ? 1.0 : 0.0;
  if (free_count > 0.0) {
    const double adjust = (1.0 - total) / free_count;
    for (double& x : out)
      if (x > 0.0 && x < c) x = std::clamp(x + adjust, 0.0, c);
  }
  return out;
}

struct RefSolution {
  std::vector<double> alpha;
  double objective = 0.0;
  double rho = 0.0;
  std::vector<double> scores;  // per training point, sum_j a_j K_ij - rho
};

// FISTA on f(a) = 1/2 a'Ka over the box-simplex, run to a fixed-point
// residual. K is row-major n x n.
inline RefSolution reference_ocsvm(const std::vector<double>& K, std::size_t n, double nu,
                                   std::size_t max_iter = 200000, double residual_tol = 2e-9) {
  const double c = 1.0 / (nu * static_cast<double>(n));

  double lipschitz = 0.0;  // max row sum bounds the top eigenvalue
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(K[i * n + j]);
    lipschitz = std::max(lipschitz, row);
  }
  const double step = 1.0 / lipschitz;

  std::vector<double> a(n, 1.0 / static_cast<double>(n));
  a = project_box_simplex(a, c);
  std::vector<double> y = a, grad(n), trial(n);
  double t_momentum = 1.0;
  double prev_obj = std::numeric_limits<double>::infinity();

  auto objective = [&](const std::vector<double>& x) {
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += K[i * n + j] * x[j];
      obj += x[i] * row;
    }
    return obj / 2.0;
  };

  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double g = 0.0;
      for (std::size_t j = 0; j < n; ++j) g += K[i * n + j] * y[j];
      grad[i] = g;
    }
    for (std::size_t i = 0; i < n; ++i) trial[i] = y[i] - step * grad[i];
    std::vector<double> next = project_box_simplex(trial, c);

    const double next_obj = objective(next);
    if (next_obj > prev_obj) {  // monotone restart
      y = a;
      t_momentum = 1.0;
      continue;
    }
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(next[i] - a[i]));
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum)) / 2.0;
    for (std::size_t i = 0; i < n; ++i) y[i] = next[i] + ((t_momentum - 1.0) / t_next) * (next[i] - a[i]);
    a = std::move(next);
    t_momentum = t_next;
    prev_obj = next_obj;
    if (residual < residual_tol && it > 10) break;
  }

  RefSolution sol;
  sol.alpha = a;
  sol.objective = objective(a);

  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    double gi = 0.0;
    for (std::size_t j = 0; j < n; ++j) gi += K[i * n + j] * a[j];
    g[i] = gi;
  }
  double rho_sum = 0.0;
  std::size_t rho_cnt = 0;
  const double fringe = 1e-8 * c;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] > fringe && a[i] < c - fringe) {
      rho_sum += g[i];
      ++rho_cnt;
    }
  }
  if (rho_cnt == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] > fringe) {
        rho_sum += g[i];
        ++rho_cnt;
      }
    }
  }
  sol.rho = rho_sum / static_cast<double>(rho_cnt);
  sol.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.scores[i] = g[i] - sol.rho;
  return sol;
}

// ---- brute-force threshold sweep -------------------------------------------

struct SweepResult {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

inline SweepResult sweep_best_threshold(const emf::ScoreMatrix& m, double fpr_cap) {
  std::vector<double> values;
  for (const auto& row : m.scores)
    for (double v : row) values.push_back(v);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<double> candidates;
  candidates.push_back(values.front() - 1.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    candidates.push_back(values[i]);
    if (i + 1 < values.size()) candidates.push_back((values[i] + values[i + 1]) / 2.0);
  }
  candidates.push_back(values.back() + 1.0);

  SweepResult best;
  double best_tpr = -1.0;
  for (double t : candidates) {
    std::size_t pos = 0, pos_acc = 0, neg = 0, neg_acc = 0;
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      for (std::size_t col = 0; col < m.class_labels.size(); ++col) {
        const bool positive = m.rows[r].true_label == m.class_labels[col];
        const bool accept = m.scores[r][col] >= t;
        pos += positive;
        neg += !positive;
        pos_acc += positive && accept;
        neg_acc += !positive && accept;
      }
    }
    const double tpr = pos ? double(pos_acc) / double(pos) : 0.0;
    const double fpr = neg ? double(neg_acc) / double(neg) : 0.0;
    if (fpr > fpr_cap) continue;
    if (tpr > best_tpr || (tpr == best_tpr && t > best.threshold)) {
      best_tpr = tpr;
      best = {t, tpr, fpr};
    }
  }
  return best;
}

}  // namespace oracle
