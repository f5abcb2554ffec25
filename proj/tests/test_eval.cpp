#include <doctest.h>

#include "plaque/eval.hpp"
#include "plaque/seed.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace plaque;

namespace {

// Pairwise Mann-Whitney count: 2 per won pair, 1 per tie, over 2 * P * N.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  long long num = 0, pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg)++;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) num += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
  return static_cast<double>(num) / static_cast<double>(2 * pos * neg);
}

}  // namespace

TEST_CASE("revascularization propagates only to the worst segment") {
  const std::vector<double> d1{0.3, 0.7, 0.5};
  CHECK(propagate_revascularization(true, d1) == std::vector<int>{0, 1, 0});
  CHECK(propagate_revascularization(false, d1) == std::vector<int>{0, 0, 0});
  const std::vector<double> tie{0.5, 0.5};
  CHECK(propagate_revascularization(true, tie) == std::vector<int>{1, 0});
  CHECK_THROWS(propagate_revascularization(true, std::vector<double>{}));
}

TEST_CASE("stenosis label uses a strict 50% threshold") {
  CHECK(stenosis_binary_label(0.51) == 1);
  CHECK(stenosis_binary_label(0.50) == 0);
  CHECK(stenosis_binary_label(0.0) == 0);
  CHECK_THROWS(stenosis_binary_label(1.2));
  CHECK_THROWS(stenosis_binary_label(-0.1));
}

TEST_CASE("prevalence reproduces the cohort fractions") {
  std::vector<int> rev(345, 0), sten(345, 0);
  std::fill_n(rev.begin(), 93, 1);
  std::fill_n(sten.begin(), 85, 1);
  CHECK(prevalence(rev) == 93.0 / 345.0);
  CHECK(std::round(prevalence(rev) * 10000) / 100 == 26.96);  // 26.9565...
  CHECK(std::abs(prevalence(rev) - 0.2696) < 5e-5);
  CHECK(std::abs(prevalence(sten) - 0.2464) < 5e-5);
  CHECK(prevalence(std::vector<int>{0, 0, 0}) == 0.0);
  CHECK_THROWS(prevalence(std::vector<int>{}));
}

TEST_CASE("roc_auc hand example and symmetries") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.3}, std::vector<int>{0, 1, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{0, 1, 1}) == 0.5);
  const std::vector<double> s{0.1, 0.9, 0.4, 0.4, 0.7};
  const std::vector<int> y{0, 1, 0, 1, 0};
  std::vector<double> neg(s.size());
  std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
  CHECK(roc_auc(neg, y) == doctest::Approx(1.0 - roc_auc(s, y)));
  CHECK_THROWS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}));
}

TEST_CASE("roc_auc equals brute-force pair counting and is monotone-invariant") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 19);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 6)) / 5.0;  // many ties
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(roc_auc(s, y) == brute_auc(s, y));
    std::vector<double> t(n);
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3 * v) - 7; });
    CHECK(roc_auc(t, y) == roc_auc(s, y));
  }
}

TEST_CASE("classification metrics hand values") {
  const auto m = classification_metrics({3, 1, 4, 2});
  CHECK(m.acc == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(m.sens == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m.spec == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.ppv == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.npv == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.mcc == doctest::Approx(10.0 / std::sqrt(600.0)).epsilon(1e-12));
  CHECK(m.degenerate == 0);

  const auto perfect = classification_metrics({5, 0, 7, 0});
  CHECK(perfect.acc == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.mcc == 1.0);

  const auto none = classification_metrics({0, 0, 5, 3});
  CHECK(none.ppv == 0.0);
  CHECK(none.is_degenerate(Metric::Ppv));
  CHECK(none.is_degenerate(Metric::Mcc));
  CHECK_FALSE(none.is_degenerate(Metric::Npv));
  CHECK_THROWS(classification_metrics({0, 0, 0, 0}));
}

TEST_CASE("MCC is symmetric under swapping the classes") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    ConfusionCounts c{static_cast<long long>(uniform_index(rng, 20)), static_cast<long long>(uniform_index(rng, 20)),
                      static_cast<long long>(uniform_index(rng, 20)), static_cast<long long>(uniform_index(rng, 20))};
    if (c.total() == 0) continue;
    ConfusionCounts swapped{c.tn, c.fn, c.tp, c.fp};
    CHECK(classification_metrics(c).mcc == doctest::Approx(classification_metrics(swapped).mcc));
  }
}

TEST_CASE("threshold_scores counts strictly above the threshold") {
  const std::vector<double> ones(5, 1.0);
  const std::vector<int> pos(5, 1);
  CHECK(threshold_scores(ones, pos).tp == 5);
  const auto none = threshold_scores(ones, pos, 1.0);
  CHECK(none.tp == 0);
  CHECK(none.fn == 5);

  Rng rng(3);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    s[i] = uniform01(rng);
    y[i] = uniform01(rng) < 0.4;
  }
  const auto c = threshold_scores(s, y, 0.5);
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  for (int i = 0; i < 40; ++i) {
    if (s[i] > 0.5 && y[i]) ++tp;
    if (s[i] > 0.5 && !y[i]) ++fp;
    if (s[i] <= 0.5 && !y[i]) ++tn;
    if (s[i] <= 0.5 && y[i]) ++fn;
  }
  CHECK(c.tp == tp);
  CHECK(c.fp == fp);
  CHECK(c.tn == tn);
  CHECK(c.fn == fn);
}

TEST_CASE("stratified k-fold: ten patients, five positive") {
  std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> flags{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const auto folds = stratified_patient_kfold(ids, flags, 10, 42);
  REQUIRE(folds.size() == 10);
  int with_pos = 0;
  for (const auto& f : folds) {
    REQUIRE(f.test.size() == 1);
    with_pos += flags[f.test[0]];
  }
  CHECK(with_pos == 5);
  CHECK_THROWS(stratified_patient_kfold(std::vector<int>{1, 2}, std::vector<int>{0, 1}, 10, 1));
}

TEST_CASE("stratified k-fold partition properties") {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 2 + static_cast<int>(uniform_index(rng, 9));
    const int n = k + static_cast<int>(uniform_index(rng, 40));
    std::vector<int> ids(n), flags(n);
    for (int i = 0; i < n; ++i) {
      ids[i] = 100 + 3 * i;
      flags[i] = uniform01(rng) < 0.4;
    }
    const auto folds = stratified_patient_kfold(ids, flags, k, static_cast<std::uint64_t>(trial));
    std::multiset<int> all;
    int pmin = 1 << 30, pmax = 0;
    for (const auto& f : folds) {
      all.insert(f.test.begin(), f.test.end());
      int pos = 0;
      for (int id : f.test) pos += flags[(id - 100) / 3];
      pmin = std::min(pmin, pos);
      pmax = std::max(pmax, pos);
      // Train, val and test are disjoint and cover every patient.
      std::set<int> tr(f.train.begin(), f.train.end()), va(f.val.begin(), f.val.end()),
          te(f.test.begin(), f.test.end());
      CHECK(tr.size() + va.size() + te.size() == static_cast<std::size_t>(n));
      for (int id : te) CHECK((tr.count(id) == 0 && va.count(id) == 0));
      for (int id : va) CHECK(tr.count(id) == 0);
      CHECK(!va.empty());
    }
    CHECK(all == std::multiset<int>(ids.begin(), ids.end()));
    CHECK(pmax - pmin <= 1);
    const auto again = stratified_patient_kfold(ids, flags, k, static_cast<std::uint64_t>(trial));
    for (int f = 0; f < k; ++f) {
      CHECK(again[f].test == folds[f].test);
      CHECK(again[f].val == folds[f].val);
    }
  }
}

TEST_CASE("validation takes about 20% of each fold's training patients") {
  std::vector<int> ids(40), flags(40);
  for (int i = 0; i < 40; ++i) {
    ids[i] = i;
    flags[i] = i % 3 == 0;
  }
  for (const auto& f : stratified_patient_kfold(ids, flags, 10, 42)) {
    const double n_train = static_cast<double>(f.train.size() + f.val.size());
    CHECK(std::abs(static_cast<double>(f.val.size()) - 0.2 * n_train) <= 0.5 + 1e-9);
  }
}
