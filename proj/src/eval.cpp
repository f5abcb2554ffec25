#include "plaque/eval.hpp"

#include "plaque/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace plaque {

std::vector<int> propagate_revascularization(bool branch_positive,
                                             std::span<const double> degrees) {
  if (degrees.empty()) throw std::invalid_argument("branch without segments");
  std::vector<int> labels(degrees.size(), 0);
  if (!branch_positive) return labels;
  std::size_t best = 0;
  for (std::size_t i = 1; i < degrees.size(); ++i)
    if (degrees[i] > degrees[best]) best = i;
  labels[best] = 1;
  return labels;
}

int stenosis_binary_label(double degree) {
  if (!(degree >= 0.0 && degree <= 1.0))
    throw std::invalid_argument("stenosis degree outside [0, 1]");
  return degree > 0.5 ? 1 : 0;
}

double prevalence(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("prevalence of empty label set");
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

namespace {

template <class T>
void shuffle_with(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

std::vector<FoldSplit> stratified_patient_kfold(std::span<const int> patient_ids,
                                                std::span<const int> positive_flags,
                                                int k, std::uint64_t seed,
                                                double val_fraction) {
  if (patient_ids.size() != positive_flags.size())
    throw std::invalid_argument("patient ids and flags differ in length");
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
  if (patient_ids.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("fewer patients than folds");
  if (std::set<int>(patient_ids.begin(), patient_ids.end()).size() != patient_ids.size())
    throw std::invalid_argument("duplicate patient ids");

  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < patient_ids.size(); ++i)
    (positive_flags[i] ? pos : neg).push_back(patient_ids[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  Rng rng = make_rng(seed, "kfold");
  shuffle_with(pos, rng);
  shuffle_with(neg, rng);

  std::vector<FoldSplit> folds(k);
  std::vector<std::vector<int>> fold_pos(k), fold_neg(k);
  std::size_t slot = 0;
  for (int p : pos) fold_pos[slot++ % k].push_back(p);
  for (int p : neg) fold_neg[slot++ % k].push_back(p);

  for (int f = 0; f < k; ++f) {
    auto& split = folds[f];
    split.test = fold_pos[f];
    split.test.insert(split.test.end(), fold_neg[f].begin(), fold_neg[f].end());
    std::sort(split.test.begin(), split.test.end());

    std::vector<int> tr_pos, tr_neg;
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      tr_pos.insert(tr_pos.end(), fold_pos[g].begin(), fold_pos[g].end());
      tr_neg.insert(tr_neg.end(), fold_neg[g].begin(), fold_neg[g].end());
    }
    std::sort(tr_pos.begin(), tr_pos.end());
    std::sort(tr_neg.begin(), tr_neg.end());
    Rng vrng = make_rng(seed, "validation", static_cast<std::uint64_t>(f));
    shuffle_with(tr_pos, vrng);
    shuffle_with(tr_neg, vrng);

    const std::size_t n_train = tr_pos.size() + tr_neg.size();
    auto n_val = static_cast<std::size_t>(std::lround(val_fraction * n_train));
    n_val = std::clamp<std::size_t>(n_val, val_fraction > 0 ? 1 : 0, n_train - 1);
    auto n_val_pos = static_cast<std::size_t>(
        std::lround(static_cast<double>(n_val) * tr_pos.size() / n_train));
    n_val_pos = std::min(n_val_pos, tr_pos.size());
    if (n_val - n_val_pos > tr_neg.size()) n_val_pos = n_val - tr_neg.size();
    const std::size_t n_val_neg = n_val - n_val_pos;

    split.val.assign(tr_pos.begin(), tr_pos.begin() + n_val_pos);
    split.val.insert(split.val.end(), tr_neg.begin(), tr_neg.begin() + n_val_neg);
    split.train.assign(tr_pos.begin() + n_val_pos, tr_pos.end());
    split.train.insert(split.train.end(), tr_neg.begin() + n_val_neg, tr_neg.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.train.begin(), split.train.end());
  }
  return folds;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  long long n_pos = 0, n_neg = 0;
  for (int y : labels) (y ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("AUC needs both classes");

  // Twice the Mann-Whitney U statistic, in integers.
  long long u2 = 0;
  long long neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    long long p = 0, n = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? p : n)++;
      ++j;
    }
    u2 += 2 * p * neg_below + p * n;
    neg_below += n;
    i = j;
  }
  return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

ConfusionCounts threshold_scores(std::span<const double> scores, std::span<const int> labels,
                                 double threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (labels[i]) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw std::invalid_argument("negative confusion counts");
  if (c.total() == 0) throw std::invalid_argument("all-zero confusion counts");
  ClassificationMetrics m;
  auto ratio = [&](double num, double den, Metric which) {
    if (den == 0) {
      m.degenerate |= 1u << static_cast<int>(which);
      return 0.0;
    }
    return num / den;
  };
  const double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
  m.acc = ratio(tp + tn, tp + fp + tn + fn, Metric::Acc);
  m.sens = ratio(tp, tp + fn, Metric::Sens);
  m.spec = ratio(tn, tn + fp, Metric::Spec);
  m.ppv = ratio(tp, tp + fp, Metric::Ppv);
  m.npv = ratio(tn, tn + fn, Metric::Npv);
  m.f1 = ratio(2 * m.ppv * m.sens, m.ppv + m.sens, Metric::F1);
  m.mcc = ratio(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)),
                Metric::Mcc);
  return m;
}

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                              double threshold) {
  MetricsReport r;
  r.threshold = threshold;
  r.n = scores.size();
  r.counts = threshold_scores(scores, labels, threshold);
  r.metrics = classification_metrics(r.counts);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (has_pos && has_neg) {
    r.auc = roc_auc(scores, labels);
    r.auc_defined = true;
  }
  return r;
}

std::vector<double> metric_row(const MetricsReport& r) {
  const auto& m = r.metrics;
  return {r.auc, m.acc, m.f1, m.ppv, m.npv, m.sens, m.spec, m.mcc};
}

}  // namespace plaque
