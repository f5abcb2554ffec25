#pragma once

#include "plaque/dataset.hpp"
#include "plaque/eval.hpp"
#include "plaque/pipeline.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace plaque {

// A patient appears in a fold's test set and in its train or validation set.
struct LeakageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ExperimentConfig {
  PhantomSpec phantom;
  std::string dataset;  // empty: <out>/dataset
  std::vector<ApproachConfig> approaches;
  Target target = Target::Stenosis50;
  int folds = 10;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;
  std::string out = "results";

  std::filesystem::path dataset_path() const;
  void validate() const;  // ConfigError
};

// Missing "approaches" means all four variants with default settings.
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig read_experiment_config(const std::filesystem::path& path);  // ConfigError

void assert_no_leakage(const FoldSplit& split);  // throws LeakageError

struct ScoreRow {
  int patient_id = 0;
  int segment_id = 0;
  int target = 0;
  double score = 0.0;
  int fold = 0;
};

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);  // DataError

struct FoldRecord {
  int fold = 0;
  std::uint64_t seed = 0;
  std::size_t test_lesions = 0;
  MetricsReport metrics;
  int best_epoch = -1;  // networks only
  std::vector<nn::EpochRecord> log;
};

struct ApproachRun {
  ApproachConfig config;
  std::vector<ScoreRow> scores;  // fold order, then patient order
  std::vector<FoldRecord> folds;
  MetricsReport pooled;
  double prepare_seconds = 0.0;
  double train_seconds = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  DatasetManifest manifest;
  std::vector<int> patient_flags;  // has >= 1 positive segment
  std::vector<FoldSplit> splits;
  std::vector<ApproachRun> runs;
};

// Patient-level stratified folds over the manifest's patients.
std::vector<FoldSplit> experiment_folds(const std::vector<int>& patient_ids, const std::vector<int>& flags,
                                        const ExperimentConfig& cfg);

// Seed of one approach in one fold; depends only on the master seed, the
// variant, the fold and the approach's own seed salt.
std::uint64_t fold_seed(std::uint64_t master, const ApproachConfig& a, int fold);

// Cross-validates every configured approach on the dataset at
// cfg.dataset_path(). Folds run in parallel over `jobs` threads; results do
// not depend on `jobs`.
ExperimentResult run_crossval(const ExperimentConfig& cfg, int jobs = 1);

// Writes report.txt, report.csv, folds.csv, experiment.json,
// <approach>_scores.csv and <approach>/fold_XX_training.csv under `out`.
void write_experiment(const std::filesystem::path& out, const ExperimentResult& r);

// Comparison table (one row per score file, the eight metric columns).
struct ReportRow {
  std::string approach;
  MetricsReport pooled;
};
std::vector<ReportRow> report_from_score_files(const std::vector<std::filesystem::path>& files);
std::string format_report_table(const std::vector<ReportRow>& rows);
std::string format_report_csv(const std::vector<ReportRow>& rows);

}  // namespace plaque
