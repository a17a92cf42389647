#pragma once

// nu-one-class SVM with an RBF kernel, trained by sequential minimal
// optimization on the dual
//
//   minimize 1/2 a' K a   s.t.  0 <= a_i <= 1/(nu*N),  sum a = 1
//
// The decision value ("similarity score") of a sample x is
//   sum_i a_i k(sv_i, z(x)) - rho
// where z standardizes x with the per-feature statistics fitted on the
// training set. A device is authorized when the score clears the
// threshold (0 by default).

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emf {

struct DimensionMismatch : std::runtime_error {
  DimensionMismatch(std::size_t a, std::size_t b)
      : std::runtime_error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

struct NonFiniteInput : std::runtime_error {
  NonFiniteInput() : std::runtime_error("training matrix contains non-finite values") {}
};

struct NotConverged : std::runtime_error {
  NotConverged(std::size_t iters, double violation)
      : std::runtime_error("SMO did not converge after " + std::to_string(iters) +
                           " pair updates (KKT violation " + std::to_string(violation) + ")") {}
};

inline double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size());
  if (!(gamma > 0.0)) throw std::invalid_argument("rbf_kernel: gamma must be positive");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

// Per-feature z-scoring fitted on the training matrix. Stds are floored:
// a feature that was constant in training contributes nothing between
// training points, and any test value deviating from that constant maps
// far out (kernel similarity 0, never NaN).
struct Standardizer {
  static constexpr double kStdFloor = 1e-12;

  std::vector<double> mean;
  std::vector<double> std_dev;  // >= kStdFloor

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("Standardizer: empty training matrix");
    const std::size_t n = rows.size(), d = rows[0].size();
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.std_dev.assign(d, 0.0);
    for (const auto& r : rows) {
      if (r.size() != d) throw DimensionMismatch(r.size(), d);
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (std::size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(n);
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = r[j] - s.mean[j];
        s.std_dev[j] += dv * dv;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      s.std_dev[j] = std::sqrt(s.std_dev[j] / static_cast<double>(n));
      if (s.std_dev[j] < kStdFloor) s.std_dev[j] = kStdFloor;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != mean.size()) throw DimensionMismatch(x.size(), mean.size());
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / std_dev[j];
    return z;
  }
};

struct OcsvmParams {
  double nu = 0.1;
  double gamma = 0.0;  // <= 0: 1 / (d * mean per-feature variance of the standardized matrix)
  double tol = 1e-4;
  std::size_t max_iter = 0;  // 0: 100000 * N pair updates
};

struct OneClassModel {
  std::vector<std::vector<double>> support_vectors;  // standardized rows with alpha > 0
  std::vector<double> alphas;
  double rho = 0.0;
  double gamma = 0.0;
  double nu = 0.0;
  Standardizer standardizer;
  std::string class_label;

  std::size_t dimension() const { return standardizer.mean.size(); }
};

inline double score(const OneClassModel& model, std::span<const double> x) {
  const std::vector<double> z = model.standardizer.apply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    s += model.alphas[i] * rbf_kernel(model.support_vectors[i], z, model.gamma);
  }
  return s - model.rho;
}

enum class Verdict { Authorized, Rejected };

inline Verdict decide(double score_value, double threshold = 0.0) {
  return score_value >= threshold ? Verdict::Authorized : Verdict::Rejected;
}

inline const char* to_string(Verdict v) { return v == Verdict::Authorized ? "Authorized" : "Rejected"; }

// train() plus the full dual solution, for KKT certificates and solver
// cross-checks.
struct TrainResult {
  OneClassModel model;
  std::vector<double> alpha;     // all N coefficients, input row order
  std::vector<double> gradient;  // (K alpha)_i at convergence
  std::size_t iterations = 0;
  double kkt_violation = 0.0;
  double box_c = 0.0;  // 1/(nu*N)
};

inline TrainResult train_detailed(const std::vector<std::vector<double>>& rows, const OcsvmParams& params,
                                  std::string class_label = {}) {
  const std::size_t n = rows.size();
  if (n < 2) throw std::invalid_argument("train: need at least 2 training rows");
  if (!(params.nu > 0.0) || params.nu > 1.0) throw std::invalid_argument("train: nu must lie in (0, 1]");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionMismatch(r.size(), d);
    for (double v : r)
      if (!std::isfinite(v)) throw NonFiniteInput();
  }

  TrainResult res;
  res.model.standardizer = Standardizer::fit(rows);
  std::vector<std::vector<double>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = res.model.standardizer.apply(rows[i]);

  double gamma = params.gamma;
  if (!(gamma > 0.0)) {
    double var_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += z[i][j];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dv = z[i][j] - m;
        v += dv * dv;
      }
      var_sum += v / static_cast<double>(n);
    }
    const double mean_var = var_sum / static_cast<double>(d);
    gamma = mean_var > 0.0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0;
  }

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    K[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = rbf_kernel(z[i], z[j], gamma);
      K[i * n + j] = k;
      K[j * n + i] = k;
    }
  }

  const double c = 1.0 / (params.nu * static_cast<double>(n));
  res.box_c = c;
  std::vector<double>& alpha = res.alpha;
  alpha.assign(n, 0.0);
  auto full = static_cast<std::size_t>(params.nu * static_cast<double>(n));
  if (full > n) full = n;
  for (std::size_t i = 0; i < full; ++i) alpha[i] = c;
  if (full < n) {
    double rem = 1.0 - c * static_cast<double>(full);
    if (rem < 0.0) rem = 0.0;
    if (rem > c) rem = c;
    alpha[full] = rem;
  }

  std::vector<double>& g = res.gradient;
  g.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) g[j] += alpha[i] * K[i * n + j];
  }

  const std::size_t max_iter = params.max_iter > 0 ? params.max_iter : 100000 * n;
  double violation = std::numeric_limits<double>::infinity();
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // maximal KKT violating pair: lowest gradient among coefficients that
    // can grow, highest among those that can shrink
    std::size_t up = n, low = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] < c && (up == n || g[i] < g[up])) up = i;
      if (alpha[i] > 0.0 && (low == n || g[i] > g[low])) low = i;
    }
    violation = (up == n || low == n) ? 0.0 : g[low] - g[up];
    if (violation < params.tol) break;

    const double eta = K[up * n + up] + K[low * n + low] - 2.0 * K[up * n + low];
    const double room_up = c - alpha[up];
    const double room_low = alpha[low];
    double t = eta > 1e-12 ? violation / eta : std::numeric_limits<double>::infinity();
    if (t >= room_up && room_up <= room_low) {
      t = room_up;
      alpha[up] = c;
      alpha[low] -= t;
    } else if (t >= room_low) {
      t = room_low;
      alpha[up] += t;
      alpha[low] = 0.0;
    } else {
      alpha[up] += t;
      alpha[low] -= t;
    }
    if (alpha[up] > c) alpha[up] = c;
    if (alpha[low] < 0.0) alpha[low] = 0.0;
    for (std::size_t i = 0; i < n; ++i) g[i] += t * (K[i * n + up] - K[i * n + low]);
  }
  res.iterations = iter;
  res.kkt_violation = violation;
  if (violation >= params.tol) throw NotConverged(iter, violation);

  // rho so the score vanishes on the margin: mean gradient over free
  // support vectors, falling back to all (bound) support vectors
  double rho_sum = 0.0;
  std::size_t rho_cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] > 0.0 && alpha[i] < c) {
      rho_sum += g[i];
      ++rho_cnt;
    }
  }
  if (rho_cnt == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] > 0.0) {
        rho_sum += g[i];
        ++rho_cnt;
      }
    }
  }
  res.model.rho = rho_sum / static_cast<double>(rho_cnt);
  res.model.gamma = gamma;
  res.model.nu = params.nu;
  res.model.class_label = std::move(class_label);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] > 0.0) {
      res.model.support_vectors.push_back(z[i]);
      res.model.alphas.push_back(alpha[i]);
    }
  }
  return res;
}

inline OneClassModel train(const std::vector<std::vector<double>>& rows, const OcsvmParams& params,
                           std::string class_label = {}) {
  return train_detailed(rows, params, std::move(class_label)).model;
}

}  // namespace emf
