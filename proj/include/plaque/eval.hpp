#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace plaque {

// Branch decision propagated to segments: positive only at the segment with
// the highest stenosis degree (ties resolve to the lowest segment index).
std::vector<int> propagate_revascularization(bool branch_positive,
                                             std::span<const double> degrees);

// Strictly above 50% is high-grade. Throws for degrees outside [0, 1].
int stenosis_binary_label(double degree);

double prevalence(std::span<const int> labels);

struct FoldSplit {
  std::vector<int> test;   // patient ids
  std::vector<int> val;
  std::vector<int> train;
};

// Patient-wise stratified k-fold. Positive and negative patients are shuffled
// separately and dealt round-robin over folds (negatives continue where the
// positives stopped), so per-fold positive counts differ by at most one.
// Within each fold's training portion, round(val_fraction * n) patients are
// set aside for validation, again stratified by the patient flag.
std::vector<FoldSplit> stratified_patient_kfold(std::span<const int> patient_ids,
                                                std::span<const int> positive_flags,
                                                int k, std::uint64_t seed,
                                                double val_fraction = 0.2);

// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie). Exact integer
// pair counting, one final division.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

// score > threshold predicts positive.
ConfusionCounts threshold_scores(std::span<const double> scores,
                                 std::span<const int> labels, double threshold = 0.5);

// Ratio metrics. A 0/0 ratio is reported as 0 and flagged in `degenerate`
// using the bit positions of the Metric enum.
enum class Metric : int { Acc, Sens, Spec, Ppv, Npv, F1, Mcc };

struct ClassificationMetrics {
  double acc = 0, sens = 0, spec = 0, ppv = 0, npv = 0, f1 = 0, mcc = 0;
  std::uint32_t degenerate = 0;
  bool is_degenerate(Metric m) const {
    return (degenerate >> static_cast<int>(m)) & 1u;
  }
};

ClassificationMetrics classification_metrics(const ConfusionCounts& counts);

struct MetricsReport {
  double auc = 0.5;
  bool auc_defined = false;
  ClassificationMetrics metrics;
  ConfusionCounts counts;
  double threshold = 0.5;
  std::size_t n = 0;
};

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                              double threshold = 0.5);

// The eight reported columns, in table order.
inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"AUC", "Acc", "F1",   "PPV",
                                                "NPV", "Sens", "Spec", "MCC"};
  return cols;
}
std::vector<double> metric_row(const MetricsReport& report);

}  // namespace plaque
