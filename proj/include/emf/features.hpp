#pragma once

// Feature extraction: min-max normalization of a windowed trace, the
// three-level time/frequency region grid, and the five per-region
// statistics (mean, standard deviation, variance, skewness, kurtosis).
//
// The skewness and kurtosis conventions are deliberate and must not be
// "corrected": skewness divides the 1/N third moment by the 1/(N-1)
// second moment raised to 3/2, and kurtosis is
//   sum(d^4) / ((1/N) * sum(d^2)^2)
// i.e. the plain fourth-over-squared-second moment ratio.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emf/trace.hpp"

namespace emf {

struct FiveStats {
  double mean = 0.0;
  double std_dev = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
};

// mean, std, variance, skewness, kurtosis — in this order everywhere a
// FiveStats is flattened into a feature vector.
inline constexpr std::size_t kStatsPerRegion = 5;

inline FiveStats compute_statistics(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) throw std::invalid_argument("compute_statistics: empty sample set");

  // exact constant inputs take the zero-dispersion path even when the
  // rounded mean would leave sub-ulp residues
  double lo = xs[0], hi = xs[0];
  for (double x : xs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (lo == hi) return {lo, 0.0, 0.0, 0.0, 0.0};

  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(n);

  double s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    const double d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }

  FiveStats out;
  out.mean = mean;
  if (n >= 2) {
    out.variance = s2 / static_cast<double>(n - 1);
    out.std_dev = std::sqrt(out.variance);
  }
  if (s2 > 0.0 && n >= 2) {
    out.skewness = (s3 / static_cast<double>(n)) / std::pow(s2 / static_cast<double>(n - 1), 1.5);
    out.kurtosis = s4 / ((s2 * s2) / static_cast<double>(n));
  }
  // zero dispersion (constant or singleton samples): skewness/kurtosis stay 0
  return out;
}

struct RegionLayout {
  double window_ms = 1080.0;
  double band_start_hz = 0.0;
  double band_stop_hz = 0.0;
  std::uint32_t time_splits = 4;   // T
  std::uint32_t freq_splits = 15;  // F

  friend bool operator==(const RegionLayout&, const RegionLayout&) = default;

  std::size_t region_count() const {
    return 1 + static_cast<std::size_t>(time_splits) + static_cast<std::size_t>(time_splits) * freq_splits;
  }
  std::size_t feature_count() const { return kStatsPerRegion * region_count(); }

  void validate() const {
    if (time_splits < 1 || freq_splits < 1) throw std::invalid_argument("RegionLayout: splits must be >= 1");
    if (!(window_ms > 0.0)) throw std::invalid_argument("RegionLayout: window duration must be positive");
    if (!(band_start_hz < band_stop_hz)) throw std::invalid_argument("RegionLayout: band start must be below stop");
  }

  static RegionLayout standard(const InstrumentFormat& inst, double window_ms = 1080.0,
                               std::uint32_t time_splits = 4, std::uint32_t freq_splits = 15) {
    return RegionLayout{window_ms, inst.start_hz, inst.stop_hz, time_splits, freq_splits};
  }
};

// One rectangle of the spectrogram. Half-open on both axes except the last
// frequency cell of each row, which closes at the stop frequency.
struct Region {
  double t_lo_ms, t_hi_ms;
  double f_lo_hz, f_hi_hz;
};

using RegionGrid = std::vector<Region>;

// Grid order: whole window, then the T time regions, then the T*F cells
// row-major (time region outer, frequency cell inner).
inline RegionGrid build_region_grid(const RegionLayout& layout) {
  layout.validate();
  const double w = layout.window_ms;
  const double f0 = layout.band_start_hz;
  const double span = layout.band_stop_hz - layout.band_start_hz;
  const auto T = layout.time_splits;
  const auto F = layout.freq_splits;

  RegionGrid grid;
  grid.reserve(layout.region_count());
  grid.push_back({0.0, w, f0, layout.band_stop_hz});
  for (std::uint32_t r = 0; r < T; ++r) {
    grid.push_back({w * r / T, w * (r + 1) / T, f0, layout.band_stop_hz});
  }
  for (std::uint32_t r = 0; r < T; ++r) {
    for (std::uint32_t c = 0; c < F; ++c) {
      grid.push_back({w * r / T, w * (r + 1) / T, f0 + span * c / F, f0 + span * (c + 1) / F});
    }
  }
  return grid;
}

// A trace whose powers have been min-max scaled into [0,1]. Wrapping the
// trace keeps raw and normalized data from being mixed up downstream.
struct NormalizedTrace {
  SpectralTrace trace;
};

// x_hat = (x - min) / (max - min), with the observation's own extrema.
// A constant trace maps to all zeros.
inline NormalizedTrace normalize(const SpectralTrace& trace) {
  if (trace.samples.empty()) throw EmptyTrace();
  double lo = trace.samples[0].power_dbm, hi = lo;
  for (const auto& s : trace.samples) {
    lo = std::min(lo, s.power_dbm);
    hi = std::max(hi, s.power_dbm);
  }
  NormalizedTrace out{trace};
  const double range = hi - lo;
  for (auto& s : out.trace.samples) {
    s.power_dbm = range == 0.0 ? 0.0 : (s.power_dbm - lo) / range;
  }
  return out;
}

struct FeatureVector {
  std::vector<double> values;
  RegionLayout layout;
  std::string trace_source;
  std::optional<std::string> label;
  std::vector<std::uint32_t> empty_regions;  // grid-order indices of regions with no samples
};

struct LayoutBandMismatch : std::runtime_error {
  explicit LayoutBandMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

// Five statistics per region, concatenated in grid order. Regions with no
// samples contribute zeros and are recorded in empty_regions.
inline FeatureVector extract_features(const NormalizedTrace& norm, const RegionLayout& layout) {
  layout.validate();
  const SpectralTrace& trace = norm.trace;
  if (trace.samples.empty()) throw EmptyTrace();
  if (trace.format.start_hz != layout.band_start_hz || trace.format.stop_hz != layout.band_stop_hz)
    throw LayoutBandMismatch("instrument band [" + fmt_double(trace.format.start_hz) + ", " +
                             fmt_double(trace.format.stop_hz) + "] does not match layout band [" +
                             fmt_double(layout.band_start_hz) + ", " + fmt_double(layout.band_stop_hz) + "]");

  const double w = layout.window_ms;
  const double f0 = layout.band_start_hz;
  const double span = layout.band_stop_hz - layout.band_start_hz;
  const auto T = layout.time_splits;
  const auto F = layout.freq_splits;

  std::vector<std::vector<double>> buckets(layout.region_count());
  buckets[0].reserve(trace.samples.size());
  for (const auto& s : trace.samples) {
    if (!(s.timestamp_ms < w))
      throw LayoutBandMismatch("sample at " + fmt_double(s.timestamp_ms) + " ms outside the " + fmt_double(w) +
                               " ms window; window the trace first");
    if (!trace.format.in_band(s.frequency_hz) || s.frequency_hz < f0 || s.frequency_hz > layout.band_stop_hz)
      throw LayoutBandMismatch("sample at " + fmt_double(s.frequency_hz) + " Hz outside the layout band");
    auto t_idx = static_cast<std::size_t>(s.timestamp_ms * T / w);
    if (t_idx >= T) t_idx = T - 1;
    auto f_idx = static_cast<std::size_t>((s.frequency_hz - f0) * F / span);
    if (f_idx >= F) f_idx = F - 1;  // stop frequency lands in the closed last cell
    buckets[0].push_back(s.power_dbm);
    buckets[1 + t_idx].push_back(s.power_dbm);
    buckets[1 + T + t_idx * F + f_idx].push_back(s.power_dbm);
  }

  FeatureVector fv;
  fv.layout = layout;
  fv.trace_source = trace.source_id;
  fv.label = trace.label;
  fv.values.reserve(layout.feature_count());
  for (std::size_t r = 0; r < buckets.size(); ++r) {
    FiveStats st;
    if (buckets[r].empty()) {
      fv.empty_regions.push_back(static_cast<std::uint32_t>(r));
    } else {
      st = compute_statistics(buckets[r]);
    }
    fv.values.push_back(st.mean);
    fv.values.push_back(st.std_dev);
    fv.values.push_back(st.variance);
    fv.values.push_back(st.skewness);
    fv.values.push_back(st.kurtosis);
  }
  return fv;
}

// Color band of a normalized power value: 0 blue [0,0.25), 1 cyan
// [0.25,0.5), 2 yellow [0.5,0.75), 3 red [0.75,1].
inline int color_band(double v) {
  if (v < 0.25) return 0;
  if (v < 0.5) return 1;
  if (v < 0.75) return 2;
  return 3;
}

// Spectrogram rendering aid: mean normalized power per (time, frequency)
// bin, mapped to the four color bands. Empty bins are -1. Rows are time
// bins ascending, columns frequency bins ascending.
inline std::vector<std::vector<int>> heatmap_grid(const NormalizedTrace& norm, std::uint32_t time_bins,
                                                  std::uint32_t freq_bins) {
  if (time_bins < 1 || freq_bins < 1) throw std::invalid_argument("heatmap_grid: bins must be >= 1");
  const SpectralTrace& trace = norm.trace;
  if (trace.samples.empty()) throw EmptyTrace();
  const double t_end = trace.samples.back().timestamp_ms;
  const double f0 = trace.format.start_hz;
  const double span = trace.format.stop_hz - trace.format.start_hz;

  std::vector<std::vector<double>> sums(time_bins, std::vector<double>(freq_bins, 0.0));
  std::vector<std::vector<std::size_t>> counts(time_bins, std::vector<std::size_t>(freq_bins, 0));
  for (const auto& s : trace.samples) {
    auto ti = t_end == 0.0 ? 0 : static_cast<std::size_t>(s.timestamp_ms * time_bins / t_end);
    if (ti >= time_bins) ti = time_bins - 1;
    auto fi = static_cast<std::size_t>((s.frequency_hz - f0) * freq_bins / span);
    if (fi >= freq_bins) fi = freq_bins - 1;
    sums[ti][fi] += s.power_dbm;
    counts[ti][fi] += 1;
  }
  std::vector<std::vector<int>> grid(time_bins, std::vector<int>(freq_bins, -1));
  for (std::uint32_t ti = 0; ti < time_bins; ++ti)
    for (std::uint32_t fi = 0; fi < freq_bins; ++fi)
      if (counts[ti][fi] > 0) grid[ti][fi] = color_band(sums[ti][fi] / static_cast<double>(counts[ti][fi]));
  return grid;
}

}  // namespace emf
