#include <catch2/catch_amalgamated.hpp>

#include "emf/features.hpp"
#include "emf/prng.hpp"
#include "support/oracles.hpp"

using namespace emf;

namespace {

SpectralTrace random_trace(std::uint64_t seed, std::size_t n, double window_ms, double start_hz, double stop_hz) {
  SplitMix64 rng(seed);
  SpectralTrace t;
  t.format = {"test", start_hz, stop_hz, 1000.0, {}, {}};
  for (std::size_t i = 0; i < n; ++i)
    t.samples.push_back({rng.uniform(0.0, window_ms * 0.999), rng.uniform(start_hz, stop_hz), rng.uniform(-90.0, -20.0)});
  std::stable_sort(t.samples.begin(), t.samples.end(), detail::sample_key_less);
  return t;
}

// quantize to multiples of 2^-8 so affine maps with dyadic coefficients
// stay exact in floating point
double snap(double v) { return std::round(v * 256.0) / 256.0; }

}  // namespace

TEST_CASE("normalize maps extrema to 0 and 1") {
  SpectralTrace t;
  t.format = {"test", 0.0, 10e6, 1000.0, {}, {}};
  for (double p : {2.0, 4.0, 6.0}) t.samples.push_back({p, 1000.0, p});
  auto norm = normalize(t);
  CHECK(norm.trace.samples[0].power_dbm == 0.0);
  CHECK(norm.trace.samples[1].power_dbm == 0.5);
  CHECK(norm.trace.samples[2].power_dbm == 1.0);
}

TEST_CASE("normalizing a constant trace yields all zeros") {
  SpectralTrace t;
  t.format = {"test", 0.0, 10e6, 1000.0, {}, {}};
  for (int i = 0; i < 5; ++i) t.samples.push_back({double(i), 1000.0, -40.0});
  for (const auto& s : normalize(t).trace.samples) CHECK(s.power_dbm == 0.0);
}

TEST_CASE("min-max normalization absorbs dyadic affine maps exactly") {
  auto t = random_trace(11, 400, 1080.0, 0.0, 10e6);
  for (auto& s : t.samples) s.power_dbm = snap(s.power_dbm);
  const auto base = normalize(t);

  for (auto [a, b] : {std::pair{2.0, 0.25}, {1.5, -12.5}, {0.0078125, 100.25}}) {
    auto mapped = t;
    for (auto& s : mapped.samples) s.power_dbm = a * s.power_dbm + b;
    const auto norm = normalize(mapped);
    for (std::size_t i = 0; i < norm.trace.samples.size(); ++i)
      CHECK(norm.trace.samples[i].power_dbm == base.trace.samples[i].power_dbm);
  }
}

TEST_CASE("region grid splits a 1.08 s window into 0.27 s time regions") {
  RegionLayout layout{1080.0, 0.0, 10e6, 4, 15};
  auto grid = build_region_grid(layout);
  REQUIRE(grid.size() == 1 + 4 + 60);
  for (std::uint32_t r = 0; r < 4; ++r) {
    CHECK(grid[1 + r].t_lo_ms == 270.0 * r);
    CHECK(grid[1 + r].t_hi_ms == 270.0 * (r + 1));
  }
  // 10 MHz / 15 cells
  CHECK(grid[5].f_hi_hz - grid[5].f_lo_hz == Catch::Approx(10e6 / 15.0));
}

TEST_CASE("degenerate 1x1 layout has three identical regions") {
  RegionLayout layout{1000.0, 0.0, 1e6, 1, 1};
  auto grid = build_region_grid(layout);
  REQUIRE(grid.size() == 3);
  for (const auto& region : grid) {
    CHECK(region.t_lo_ms == 0.0);
    CHECK(region.t_hi_ms == 1000.0);
    CHECK(region.f_lo_hz == 0.0);
    CHECK(region.f_hi_hz == 1e6);
  }
}

TEST_CASE("five statistics on a symmetric triple") {
  const double xs[] = {0.0, 0.5, 1.0};
  auto st = compute_statistics(xs);
  CHECK(st.mean == 0.5);
  CHECK(st.variance == 0.25);
  CHECK(st.std_dev == 0.5);
  CHECK(st.skewness == 0.0);
}

TEST_CASE("constant samples have zero dispersion statistics") {
  const std::vector<double> xs(20, 0.7);
  auto st = compute_statistics(xs);
  CHECK(st.variance == 0.0);
  CHECK(st.skewness == 0.0);
  CHECK(st.kurtosis == 0.0);

  const double one[] = {0.3};
  auto single = compute_statistics(one);
  CHECK(single.mean == 0.3);
  CHECK(single.variance == 0.0);
  CHECK(single.kurtosis == 0.0);
}

TEST_CASE("statistics match a naive term-by-term recomputation") {
  SplitMix64 rng(123);
  std::vector<double> xs(1000);
  for (auto& x : xs) x = rng.next_double();
  auto st = compute_statistics(xs);
  auto ref = oracle::naive_five_stats(xs);
  CHECK(std::abs(st.mean - ref.mean) <= 1e-10);
  CHECK(std::abs(st.std_dev - ref.std_dev) <= 1e-10);
  CHECK(std::abs(st.variance - ref.variance) <= 1e-10);
  CHECK(std::abs(st.skewness - ref.skewness) <= 1e-10);
  CHECK(std::abs(st.kurtosis - ref.kurtosis) <= 1e-10);
}

TEST_CASE("default layout yields 325 features and global stats lead") {
  auto t = random_trace(7, 3000, 1080.0, 0.0, 10e6);
  RegionLayout layout{1080.0, 0.0, 10e6, 4, 15};
  auto norm = normalize(t);
  auto fv = extract_features(norm, layout);
  REQUIRE(fv.values.size() == 325);

  std::vector<double> all;
  for (const auto& s : norm.trace.samples) all.push_back(s.power_dbm);
  auto global = compute_statistics(all);
  CHECK(fv.values[0] == global.mean);
  CHECK(fv.values[1] == global.std_dev);
  CHECK(fv.values[2] == global.variance);
  CHECK(fv.values[3] == global.skewness);
  CHECK(fv.values[4] == global.kurtosis);
}

TEST_CASE("1x1 layout repeats the whole-window stats across levels") {
  auto t = random_trace(8, 500, 1000.0, 0.0, 1e6);
  RegionLayout layout{1000.0, 0.0, 1e6, 1, 1};
  auto fv = extract_features(normalize(t), layout);
  REQUIRE(fv.values.size() == 15);
  for (int j = 0; j < 5; ++j) {
    CHECK(fv.values[j] == fv.values[5 + j]);
    CHECK(fv.values[j] == fv.values[10 + j]);
  }
}

TEST_CASE("feature extraction matches the interval-membership oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto t = random_trace(seed, 800, 1080.0, 0.0, 10e6);
    RegionLayout layout{1080.0, 0.0, 10e6, 4, 15};
    auto norm = normalize(t);
    auto fv = extract_features(norm, layout);
    auto ref = oracle::naive_region_features(norm, layout);
    REQUIRE(fv.values.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(std::abs(fv.values[i] - ref[i]) <= 1e-10);
    }
  }
}

TEST_CASE("empty regions produce zero stats and are flagged") {
  SpectralTrace t;
  t.format = {"test", 0.0, 10e6, 1000.0, {}, {}};
  // all samples in the first time region and first frequency cell
  for (int i = 0; i < 10; ++i) t.samples.push_back({double(i), 1000.0 + i, -50.0 - i});
  RegionLayout layout{1080.0, 0.0, 10e6, 2, 2};
  auto fv = extract_features(normalize(t), layout);
  REQUIRE(fv.values.size() == 5 * (1 + 2 + 4));
  // regions: 0 whole, 1..2 time, 3..6 cells (r-major)
  CHECK(fv.empty_regions == std::vector<std::uint32_t>{2, 4, 5, 6});
  for (std::uint32_t r : fv.empty_regions)
    for (int j = 0; j < 5; ++j) CHECK(fv.values[5 * r + j] == 0.0);
}

TEST_CASE("feature count formula holds over randomized layouts") {
  SplitMix64 rng(31);
  for (int round = 0; round < 25; ++round) {
    const auto T = static_cast<std::uint32_t>(1 + rng.below(8));
    const auto F = static_cast<std::uint32_t>(1 + rng.below(32));
    RegionLayout layout{500.0 + rng.uniform(0.0, 2000.0), 0.0, 1e6 + rng.uniform(0.0, 100e6), T, F};
    CHECK(layout.feature_count() == 5 * (1 + T + std::size_t{T} * F));
    CHECK(build_region_grid(layout).size() == layout.region_count());

    SpectralTrace t = random_trace(rng.next_u64(), 200, layout.window_ms, layout.band_start_hz, layout.band_stop_hz);
    auto fv = extract_features(normalize(t), layout);
    CHECK(fv.values.size() == layout.feature_count());
  }
}

TEST_CASE("every sample lands in exactly one region per level") {
  SplitMix64 rng(67);
  for (int round = 0; round < 10; ++round) {
    const auto T = static_cast<std::uint32_t>(1 + rng.below(6));
    const auto F = static_cast<std::uint32_t>(1 + rng.below(12));
    RegionLayout layout{1080.0, 0.0, 10e6, T, F};
    auto t = random_trace(rng.next_u64(), 500, layout.window_ms, 0.0, 10e6);
    // hit both closed edges explicitly
    t.samples.push_back({0.0, 10e6, -40.0});
    t.samples.push_back({0.0, 0.0, -41.0});
    std::stable_sort(t.samples.begin(), t.samples.end(), detail::sample_key_less);
    auto norm = normalize(t);
    auto grid = build_region_grid(layout);

    for (const auto& s : norm.trace.samples) {
      int time_hits = 0, cell_hits = 0;
      for (std::size_t g = 1; g < grid.size(); ++g) {
        const auto& region = grid[g];
        const bool closes = region.f_hi_hz == layout.band_stop_hz;
        const bool t_in = s.timestamp_ms >= region.t_lo_ms && s.timestamp_ms < region.t_hi_ms;
        const bool f_in = s.frequency_hz >= region.f_lo_hz &&
                          (s.frequency_hz < region.f_hi_hz || (closes && s.frequency_hz == region.f_hi_hz));
        if (g <= T) {
          time_hits += t_in;
        } else {
          cell_hits += t_in && f_in;
        }
      }
      CHECK(time_hits == 1);
      CHECK(cell_hits == 1);
    }
  }
}

TEST_CASE("skewness negates on complemented values") {
  SplitMix64 rng(41);
  std::vector<double> xs(400), comp(400);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = snap(rng.next_double());
    comp[i] = 1.0 - xs[i];  // exact for dyadic values
  }
  auto a = compute_statistics(xs);
  auto b = compute_statistics(comp);
  CHECK(b.skewness == Catch::Approx(-a.skewness).margin(1e-12));
}

TEST_CASE("kurtosis is invariant under affine maps") {
  SplitMix64 rng(43);
  std::vector<double> xs(300);
  for (auto& x : xs) x = rng.gaussian();
  const double base = compute_statistics(xs).kurtosis;
  for (double a : {-3.0, 0.5, 7.25}) {
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = a * xs[i] + 1.75;
    CHECK(compute_statistics(ys).kurtosis == Catch::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("extraction rejects a band mismatch") {
  auto t = random_trace(3, 100, 1000.0, 0.0, 10e6);
  RegionLayout layout{1000.0, 0.0, 20e6, 2, 3};  // wrong band
  CHECK_THROWS_AS(extract_features(normalize(t), layout), LayoutBandMismatch);

  RegionLayout short_window{500.0, 0.0, 10e6, 2, 3};  // samples past the window
  CHECK_THROWS_AS(extract_features(normalize(t), short_window), LayoutBandMismatch);
}

TEST_CASE("heatmap bins normalized power into the four color bands") {
  CHECK(color_band(0.0) == 0);
  CHECK(color_band(0.24) == 0);
  CHECK(color_band(0.25) == 1);
  CHECK(color_band(0.5) == 2);
  CHECK(color_band(0.75) == 3);
  CHECK(color_band(1.0) == 3);

  SpectralTrace t;
  t.format = {"test", 0.0, 4000.0, 1000.0, {}, {}};
  t.samples.push_back({0.0, 500.0, -80.0});    // min -> 0
  t.samples.push_back({0.0, 3500.0, -20.0});   // max -> 1
  t.samples.push_back({100.0, 500.0, -50.0});  // mid -> 0.5
  auto grid = heatmap_grid(normalize(t), 2, 2);
  REQUIRE(grid.size() == 2);
  CHECK(grid[0][0] == 0);
  CHECK(grid[0][1] == 3);
  CHECK(grid[1][0] == 2);
  CHECK(grid[1][1] == -1);  // empty bin
}
