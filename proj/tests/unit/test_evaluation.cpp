#include <boost/math/distributions/fisher_f.hpp>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "diabrisk/error.hpp"
#include "diabrisk/evaluation.hpp"
#include "diabrisk/rng.hpp"
#include "diabrisk/stats.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace diabrisk;

using testing::pair_count_auc;

TEST_CASE("rank AUC equals the pair-count oracle with ties") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 300);
    std::vector<int> y(n);
    std::vector<double> s(n);
    const std::size_t levels = 1 + uniform_index(rng, 12);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = uniform01(rng) < 0.3 ? 1 : 0;
      s[i] = static_cast<double>(uniform_index(rng, levels)) / 4.0;
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(roc_auc(y, s) == pair_count_auc(y, s));
  }
  std::vector<int> all_pos{1, 1};
  std::vector<double> sc{0.2, 0.3};
  CHECK(std::isnan(roc_auc(all_pos, sc)));
}

TEST_CASE("confusion metrics at the threshold") {
  std::vector<int> y{1, 1, 1, 0, 0, 0, 0};
  std::vector<double> s{0.9, 0.5, 0.2, 0.7, 0.1, 0.49, 0.0};
  auto m = compute_metrics(y, s);
  // tp=2 fn=1 fp=1 tn=3
  CHECK(m.accuracy == doctest::Approx(5.0 / 7));
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(m.f1 == doctest::Approx(2.0 / 3));
  CHECK_FALSE(m.recall_undefined);

  std::vector<int> neg{0, 0};
  std::vector<double> low{0.1, 0.2};
  auto u = compute_metrics(neg, low);
  CHECK(u.recall_undefined);
  CHECK(std::isnan(u.recall));
  CHECK(u.precision == 0.0);
}

TEST_CASE("stratified k-fold partitions with proportional classes") {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 50 + uniform_index(rng, 400);
    std::vector<int> y(n);
    for (auto& v : y) v = uniform01(rng) < 0.2 ? 1 : 0;
    const int k = 2 + static_cast<int>(uniform_index(rng, 9));
    const auto pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (pos < static_cast<std::size_t>(k) || n - pos < static_cast<std::size_t>(k)) continue;
    auto folds = stratified_kfold(y, k, rng());
    REQUIRE(folds.size() == static_cast<std::size_t>(k));
    std::vector<int> seen(n, 0);
    for (const auto& f : folds) {
      CHECK(std::is_sorted(f.begin(), f.end()));
      std::size_t fp = 0;
      for (auto i : f) {
        ++seen[i];
        fp += y[i];
      }
      const double exact = double(pos) / k;
      CHECK(std::abs(double(fp) - exact) < 1.0);
      CHECK(std::abs(double(f.size() - fp) - double(n - pos) / k) < 1.0);
    }
    for (int c : seen) CHECK(c == 1);
  }
  std::vector<int> y{1, 0, 0, 0};
  CHECK_THROWS_AS(stratified_kfold(y, 2, 1), ValidationError);
}

TEST_CASE("stratified holdout") {
  std::vector<int> y(1000, 0);
  for (int i = 0; i < 150; ++i) y[static_cast<std::size_t>(i * 6)] = 1;
  auto split = stratified_holdout(y, 0.2, 3);
  CHECK(split.test.size() == 200);
  CHECK(split.train.size() == 800);
  std::size_t tp = 0;
  for (auto i : split.test) tp += y[i];
  CHECK(tp == 30);
  std::set<std::size_t> all(split.train.begin(), split.train.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(all.size() == 1000);
}

TEST_CASE("cross-validation scores untouched folds") {
  auto ds = testing::synthetic_prepared(1500, 8);
  ModelConfig cfg{"Logistic Regression", ModelFamily::logistic, {}};
  for (auto kind : {SamplingKind::original, SamplingKind::smote, SamplingKind::undersample}) {
    auto r = cross_validate(cfg, ds, {kind, 5, 0}, 5, 42);
    REQUIRE(r.folds.size() == 5);
    REQUIRE(r.recall.size() == 5);
    for (std::size_t f = 0; f < 5; ++f) CHECK(r.recall[f] == r.folds[f].recall);
    auto again = cross_validate(cfg, ds, {kind, 5, 0}, 5, 42);
    CHECK(again.recall == r.recall);
  }
  auto orig = cross_validate(cfg, ds, {SamplingKind::original, 5, 0}, 5, 42);
  auto under = cross_validate(cfg, ds, {SamplingKind::undersample, 5, 0}, 5, 42);
  CHECK(under.mean_recall() > orig.mean_recall());
}

TEST_CASE("grid expansion order and recall-first selection") {
  ParamGrid grid{{"max_depth", {2, 4}}, {"min_samples_leaf", {1, 5, 9}}};
  auto pts = expand_grid(grid, {{"max_bins", 64}});
  REQUIRE(pts.size() == 6);
  CHECK(pts[0].at("max_depth") == 2);
  CHECK(pts[0].at("min_samples_leaf") == 1);
  CHECK(pts[1].at("min_samples_leaf") == 5);
  CHECK(pts[3].at("max_depth") == 4);
  CHECK(pts[5].at("max_bins") == 64);

  auto ds = testing::synthetic_prepared(1200, 9);
  auto res = grid_search({"Decision Tree", ModelFamily::tree, {}}, grid, ds, {SamplingKind::undersample, 5, 0}, 3, 5);
  REQUIRE(res.points.size() == 6);
  double best_recall = -1;
  for (const auto& p : res.points) {
    REQUIRE(p.result);
    best_recall = std::max(best_recall, p.result->mean_recall());
  }
  CHECK(res.best.mean_recall() == best_recall);
  for (const auto& p : res.points)
    if (p.result->mean_recall() == best_recall) CHECK(p.result->mean_f1() <= res.best.mean_f1());

  // A lattice point that cannot train is recorded and skipped.
  auto bad = grid_search({"KNN", ModelFamily::knn, {}}, {{"k", {0, 3}}}, ds, {SamplingKind::original, 5, 0}, 3, 5);
  CHECK_FALSE(bad.points[0].error.empty());
  CHECK(bad.best_params.at("k") == 3);
  CHECK_THROWS_AS(grid_search({"KNN", ModelFamily::knn, {}}, {{"k", {0}}}, ds, {}, 3, 5), ValidationError);
}

TEST_CASE("one-way ANOVA matches hand sums of squares") {
  std::vector<std::vector<double>> g{{1, 2, 3}, {2, 4, 6}, {5, 5, 8}};
  auto a = anova_oneway(g);
  // grand mean 4; group means 2, 4, 6
  CHECK(a.ss_between == doctest::Approx(24.0));
  CHECK(a.ss_within == doctest::Approx(2 + 8 + 6));
  CHECK(a.df_between == 2);
  CHECK(a.df_within == 6);
  CHECK(a.f_stat == doctest::Approx((24.0 / 2) / (16.0 / 6)));
  boost::math::fisher_f dist(2, 6);
  CHECK(a.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(dist, a.f_stat))));

  auto deg = anova_oneway({{1, 1}, {2, 2}});
  CHECK(deg.degenerate);
  CHECK(deg.p_value == 0.0);
}

TEST_CASE("Tukey with two groups equals the pooled t-test") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + uniform_index(rng, 10);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = standard_normal(rng);
    for (auto& v : b) v = standard_normal(rng) + 0.8 * uniform01(rng);
    auto rows = tukey_hsd({{"B", b}, {"A", a}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].group1 == "A");
    CHECK(rows[0].group2 == "B");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double ss = 0;
    for (double v : a) ss += (v - ma) * (v - ma);
    for (double v : b) ss += (v - mb) * (v - mb);
    const double df = 2.0 * n - 2;
    const double t = (mb - ma) / std::sqrt(ss / df * 2.0 / n);
    CHECK(rows[0].meandiff == doctest::Approx(mb - ma));
    CHECK(std::abs(rows[0].p_adj - stats::student_t_two_sided_p(t, df)) < 1e-6);
    CHECK(rows[0].lower < rows[0].meandiff);
    CHECK(rows[0].reject == (rows[0].p_adj < 0.05));
  }
  CHECK_THROWS_AS(tukey_hsd({{"A", {1, 1}}, {"B", {2, 2}}}), NumericError);
  CHECK_THROWS_AS(tukey_hsd({{"A", {}}, {"B", {2, 2}}}), ValidationError);
}

TEST_CASE("Tukey-Kramer with unequal group sizes matches scipy") {
  const std::vector<double> a{0.71, 0.74, 0.69, 0.75, 0.72}, b{0.78, 0.80, 0.77, 0.81},
      c{0.70, 0.73, 0.72, 0.69, 0.74, 0.71};
  auto rows = tukey_hsd({{"a", a}, {"b", b}, {"c", c}});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].p_adj == doctest::Approx(9.04594890e-04).epsilon(1e-5));
  CHECK(rows[1].p_adj == doctest::Approx(8.41039713e-01).epsilon(1e-5));
  CHECK(rows[2].p_adj == doctest::Approx(2.80954101e-04).epsilon(1e-5));
  CHECK(rows[0].lower == doctest::Approx(0.03135934).epsilon(1e-5));
  CHECK(rows[0].upper == doctest::Approx(0.10464066).epsilon(1e-5));
  CHECK(rows[2].lower == doctest::Approx(-0.11025749).epsilon(1e-5));
}

TEST_CASE("comparison report sorts by F1 and attaches tests") {
  auto ds = testing::synthetic_prepared(1200, 10);
  std::vector<CvResult> res;
  for (auto [name, fam, params] : std::vector<std::tuple<std::string, ModelFamily, ParamMap>>{
           {"Logistic Regression", ModelFamily::logistic, {}},
           {"Decision Tree", ModelFamily::tree, {{"max_depth", 3}}},
           {"KNN", ModelFamily::knn, {{"k", 5}}}})
    res.push_back(cross_validate({name, fam, params}, ds, {SamplingKind::undersample, 5, 0}, 5, 1));
  auto rep = comparison_report(res);
  REQUIRE(rep.rows.size() == 3);
  for (std::size_t i = 1; i < 3; ++i) CHECK(rep.rows[i - 1].metrics.f1 >= rep.rows[i].metrics.f1);
  REQUIRE(rep.anova);
  CHECK(rep.tukey.size() == 3);

  auto other = cross_validate({"KNN", ModelFamily::knn, {}}, ds, {SamplingKind::undersample, 5, 0}, 5, 2);
  res.push_back(other);
  CHECK_THROWS_AS(comparison_report(res), ValidationError);
  CHECK(default_model_name(ModelFamily::gbdt, {{"depthwise", 1}}) == "GBDT (depth-wise)");
}
