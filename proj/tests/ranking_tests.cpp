#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "emf/prng.hpp"
#include "emf/ranking.hpp"

using namespace emf;

namespace {

double entropy(std::span<const int> x) {
  std::map<int, double> counts;
  for (int v : x) counts[v] += 1.0;
  double h = 0.0;
  for (const auto& [sym, cnt] : counts) {
    const double p = cnt / static_cast<double>(x.size());
    h -= p * std::log(p);
  }
  return h;
}

// brute-force I(X;Y) via an explicit contingency table
double mi_table(std::span<const int> x, std::span<const int> y) {
  std::map<int, double> px, py;
  std::map<std::pair<int, int>, double> pxy;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    px[x[i]] += 1.0 / n;
    py[y[i]] += 1.0 / n;
    pxy[{x[i], y[i]}] += 1.0 / n;
  }
  double total = 0.0;
  for (const auto& [key, p] : pxy) total += p * std::log(p / (px[key.first] * py[key.second]));
  return total;
}

}  // namespace

TEST_CASE("discretize splits at the median") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  CHECK(discretize(xs, 2) == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("constant vectors land in bin zero") {
  const std::vector<double> xs(9, 3.3);
  CHECK(discretize(xs, 4) == std::vector<int>(9, 0));
}

TEST_CASE("equal-frequency bins are balanced on distinct values") {
  SplitMix64 rng(5);
  for (int round = 0; round < 10; ++round) {
    std::vector<double> xs(40 + rng.below(60));
    for (auto& x : xs) x = rng.next_double();
    auto bins = discretize(xs, 4);
    std::map<int, std::size_t> occupancy;
    for (int b : bins) occupancy[b] += 1;
    REQUIRE(occupancy.size() == 4);
    std::size_t lo = xs.size(), hi = 0;
    for (const auto& [bin, count] : occupancy) {
      lo = std::min(lo, count);
      hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("mutual information of a fair binary copy is ln 2") {
  std::vector<int> x;
  for (int i = 0; i < 100; ++i) x.push_back(i % 2);
  CHECK(mutual_information(x, x) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("independent constant carries no information") {
  std::vector<int> x(50, 1), y;
  for (int i = 0; i < 50; ++i) y.push_back(i % 3);
  CHECK(mutual_information(x, y) == 0.0);
}

TEST_CASE("mutual information matches the contingency-table oracle") {
  SplitMix64 rng(9);
  for (int round = 0; round < 30; ++round) {
    std::vector<int> x, y;
    const std::size_t n = 30 + rng.below(100);
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(static_cast<int>(rng.below(3)));
      y.push_back(static_cast<int>(rng.below(3)));
    }
    CHECK(mutual_information(x, y) == Catch::Approx(mi_table(x, y)).margin(1e-12));
    CHECK(mutual_information(x, y) == Catch::Approx(mutual_information(y, x)).margin(1e-12));
    CHECK(mutual_information(x, x) == Catch::Approx(entropy(x)).margin(1e-12));
    CHECK(mutual_information(x, y) <= std::min(entropy(x), entropy(y)) + 1e-12);
    CHECK(mutual_information(x, y) >= 0.0);
  }
}

TEST_CASE("a perfect predictor ranks first under both methods") {
  SplitMix64 rng(21);
  const std::size_t n = 60;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(3)));

  std::vector<std::vector<double>> rows(n, std::vector<double>(5));
  for (std::size_t i = 0; i < n; ++i) {
    rows[i][0] = static_cast<double>(labels[i]);  // the label itself
    for (std::size_t j = 1; j < 5; ++j) rows[i][j] = rng.gaussian();
  }
  for (auto method : {RankMethod::MIM, RankMethod::JMI}) {
    auto ranked = rank_features(rows, labels, method, 4, 3);
    CHECK(ranked.ordering[0] == 0);
    CHECK(ranked.ordering.size() == 5);
    std::vector<std::size_t> sorted = ranked.ordering;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
}

TEST_CASE("identical label copies tie-break by index") {
  SplitMix64 rng(22);
  const std::size_t n = 50;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(2)));
  std::vector<std::vector<double>> rows(n, std::vector<double>(4));
  for (std::size_t i = 0; i < n; ++i) {
    rows[i][0] = rng.gaussian() * 0.01;  // noise
    rows[i][1] = static_cast<double>(labels[i]);
    rows[i][2] = static_cast<double>(labels[i]);
    rows[i][3] = rng.gaussian() * 0.01;
  }
  auto ranked = rank_features(rows, labels, RankMethod::MIM, 4, 4);
  CHECK(ranked.ordering[0] == 1);
  CHECK(ranked.ordering[1] == 2);
  CHECK(ranked.scores[0] == ranked.scores[1]);
  // MIM scores are non-increasing along the ordering
  for (std::size_t i = 1; i < ranked.scores.size(); ++i) CHECK(ranked.scores[i] <= ranked.scores[i - 1]);
}

TEST_CASE("JMI selection matches a hand-rolled greedy oracle") {
  SplitMix64 rng(23);
  const std::size_t n = 80, d = 6;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(2)));
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    rows[i][0] = labels[i] + 0.3 * rng.gaussian();
    rows[i][1] = rng.gaussian();
    rows[i][2] = labels[i] - 0.5 * rng.gaussian();
    rows[i][3] = rows[i][0] + 0.01 * rng.gaussian();  // redundant with 0
    rows[i][4] = rng.gaussian();
    rows[i][5] = 0.7 * labels[i] + 0.4 * rng.gaussian();
  }
  const std::uint32_t bins = 4;
  auto ranked = rank_features(rows, labels, RankMethod::JMI, bins, d);

  // oracle: same criterion recomputed from scratch via mi_table
  std::vector<std::vector<int>> disc(d);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = rows[i][j];
    disc[j] = discretize(col, bins);
  }
  std::vector<double> rel(d);
  for (std::size_t j = 0; j < d; ++j) rel[j] = mi_table(disc[j], labels);
  std::vector<std::size_t> picked;
  std::vector<bool> used(d, false);
  std::size_t first = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (rel[j] > rel[first]) first = j;
  picked.push_back(first);
  used[first] = true;
  while (picked.size() < d) {
    double best_gain = -1e300;
    std::size_t best = d;
    for (std::size_t cand = 0; cand < d; ++cand) {
      if (used[cand]) continue;
      double gain = 0.0;
      for (std::size_t s : picked) {
        std::vector<int> joint(n);
        for (std::size_t i = 0; i < n; ++i) joint[i] = disc[cand][i] * static_cast<int>(bins) + disc[s][i];
        gain += mi_table(joint, labels);
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = cand;
      }
    }
    picked.push_back(best);
    used[best] = true;
  }
  CHECK(ranked.ordering == picked);
}

TEST_CASE("ranking is deterministic") {
  SplitMix64 rng(29);
  const std::size_t n = 40, d = 8;
  std::vector<int> labels;
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    labels.push_back(static_cast<int>(rng.below(3)));
    for (auto& v : rows[i]) v = rng.gaussian();
  }
  for (auto method : {RankMethod::MIM, RankMethod::JMI}) {
    auto a = rank_features(rows, labels, method, 8, 4);
    auto b = rank_features(rows, labels, method, 8, 4);
    CHECK(a.ordering == b.ordering);
    CHECK(a.scores == b.scores);
  }
}

TEST_CASE("slicing all features in ranked order is the identity") {
  std::vector<LabeledVector> corpus;
  SplitMix64 rng(31);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 8; ++i) {
      LabeledVector lv;
      lv.label = "c" + std::to_string(c);
      lv.source_id = *lv.label + std::to_string(i);
      for (int j = 0; j < 6; ++j) lv.values.push_back(rng.gaussian() + 4.0 * c);
      corpus.push_back(std::move(lv));
    }
  }
  RankedFeatures ranked;
  ranked.ordering = {3, 1, 5, 0, 2, 4};  // any permutation
  ranked.scores.assign(6, 0.0);
  auto sliced = slice_top_k(corpus, ranked, 6);
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(sliced[i].values == corpus[i].values);

  auto top2 = slice_top_k(corpus, ranked, 2);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    REQUIRE(top2[i].values.size() == 2);
    CHECK(top2[i].values[0] == corpus[i].values[1]);  // indices {3,1} sorted -> 1,3
    CHECK(top2[i].values[1] == corpus[i].values[3]);
  }
}

TEST_CASE("evaluating at k = d reproduces the full pipeline") {
  SplitMix64 rng(33);
  std::vector<LabeledVector> corpus;
  std::vector<int> labels;
  std::vector<std::vector<double>> X;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 8; ++i) {
      LabeledVector lv;
      lv.label = "c" + std::to_string(c);
      lv.source_id = *lv.label + "/" + std::to_string(i);
      for (int j = 0; j < 5; ++j) lv.values.push_back(rng.gaussian() + 5.0 * c * (j == c));
      labels.push_back(c);
      X.push_back(lv.values);
      corpus.push_back(std::move(lv));
    }
  }
  CvParams cv;
  cv.k = 4;
  cv.seed = 3;
  auto ranked = rank_features(X, labels, RankMethod::MIM, 4, 5);
  auto table = evaluate_top_k(corpus, ranked, {5}, cv, 0.05);
  REQUIRE(table.size() == 1);

  auto m = cross_validate(corpus, cv);
  auto [t, rep] = best_common_threshold(m, 0.05);
  CHECK(table[0].threshold == t);
  CHECK(table[0].tpr == rep.tpr);
  CHECK(*table[0].fpr == *rep.fpr);
}
