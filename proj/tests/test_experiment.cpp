#include <doctest.h>

#include "plaque/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

using namespace plaque;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("plaque_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Small but complete experiment: 8 patients, 3 folds, the sequence variant
// with a tiny network.
ExperimentConfig tiny_experiment(const fs::path& root) {
  ExperimentConfig c;
  c.phantom.patients = 8;
  c.folds = 3;
  c.target = Target::Revascularization;
  c.dataset = (root / "dataset").string();
  c.out = (root / "out").string();
  ApproachConfig a;
  a.variant = Variant::RadiomicsGru;
  a.geometry.slice_size = 13;
  a.geometry.slice_spacing = 0.5;
  a.geometry.cube_length = 8;
  a.geometry.cube_stride = 4;
  a.geometry.radii = 8;
  a.geometry.r_max = 3.0;
  a.architecture.mlp_widths = {4, 4, 4};
  a.architecture.gru_hidden = 3;
  a.train.epochs = 3;
  a.train.batch_size = 8;
  c.approaches = {a};
  return c;
}

}  // namespace

TEST_CASE("experiment config JSON") {
  const ExperimentConfig d = nlohmann::json::object().get<ExperimentConfig>();
  CHECK(d.approaches.size() == 4);
  CHECK(d.folds == 10);
  CHECK(d.seed == 42);
  CHECK(d.target == Target::Stenosis50);

  ExperimentConfig c = tiny_experiment("/tmp/x");
  const nlohmann::json j = c;
  CHECK(nlohmann::json(j.get<ExperimentConfig>()) == j);

  nlohmann::json bad = j;
  bad["fold"] = 3;
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), ConfigError);
  bad = j;
  bad["target"] = "ffr";
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), ConfigError);

  c.folds = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_experiment("/tmp/x");
  c.approaches.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config files resolve relative dataset paths and report errors as config errors") {
  const fs::path root = scratch("config");
  std::ofstream(root / "exp.json") << R"({"dataset": "data", "folds": 5})";
  const ExperimentConfig c = read_experiment_config(root / "exp.json");
  CHECK(c.dataset_path() == root / "data");
  CHECK(c.folds == 5);
  std::ofstream(root / "broken.json") << "{ not json";
  CHECK_THROWS_AS(read_experiment_config(root / "broken.json"), ConfigError);
  CHECK_THROWS_AS(read_experiment_config(root / "missing.json"), ConfigError);
  fs::remove_all(root);
}

TEST_CASE("leakage assertion") {
  FoldSplit ok{{1, 2}, {3}, {4, 5}};
  CHECK_NOTHROW(assert_no_leakage(ok));
  FoldSplit leak{{1, 2}, {3}, {4, 2}};
  CHECK_THROWS_AS(assert_no_leakage(leak), LeakageError);
  FoldSplit val_leak{{1}, {1}, {4}};
  CHECK_THROWS_AS(assert_no_leakage(val_leak), LeakageError);
  FoldSplit tv{{1}, {3}, {3, 4}};
  CHECK_THROWS_AS(assert_no_leakage(tv), LeakageError);
}

TEST_CASE("more folds than patients is a clean configuration error") {
  ExperimentConfig c;
  c.folds = 10;
  CHECK_THROWS_AS(experiment_folds({0, 1, 2, 3}, {0, 1, 0, 1}, c), ConfigError);
}

TEST_CASE("score files round trip and reject malformed rows") {
  const fs::path root = scratch("scores");
  const std::vector<ScoreRow> rows{{0, 1, 1, 0.1 + 0.2, 0}, {3, 0, 0, 1.0 / 3.0, 2}};
  write_scores_csv(root / "a_scores.csv", rows);
  const auto back = read_scores_csv(root / "a_scores.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].score == rows[0].score);
  CHECK(back[1].score == rows[1].score);
  CHECK(back[1].fold == 2);

  std::ofstream(root / "bad.csv") << "patient_id,segment_id,target,score,fold\n1,2,3,0.5,0\n";
  CHECK_THROWS_AS(read_scores_csv(root / "bad.csv"), DataError);
  std::ofstream(root / "junk.csv") << "patient_id,segment_id,target,score,fold\n1,2,1,abc,0\n";
  CHECK_THROWS_AS(read_scores_csv(root / "junk.csv"), DataError);
  std::ofstream(root / "header.csv") << "id,score\n";
  CHECK_THROWS_AS(read_scores_csv(root / "header.csv"), DataError);
  CHECK_THROWS_AS(read_scores_csv(root / "none.csv"), DataError);
  fs::remove_all(root);
}

TEST_CASE("report row from a hand-built score file matches hand metrics") {
  const fs::path root = scratch("report");
  // TP=3, FP=1, TN=4, FN=2 at threshold 0.5.
  std::vector<ScoreRow> rows;
  for (double s : {0.9, 0.8, 0.7, 0.2, 0.1}) rows.push_back({static_cast<int>(rows.size()), 0, 1, s, 0});
  for (double s : {0.6, 0.4, 0.3, 0.2, 0.05}) rows.push_back({static_cast<int>(rows.size()), 0, 0, s, 0});
  write_scores_csv(root / "hand_scores.csv", rows);
  const auto report = report_from_score_files({root / "hand_scores.csv"});
  REQUIRE(report.size() == 1);
  CHECK(report[0].approach == "hand");
  const auto& m = report[0].pooled.metrics;
  CHECK(m.acc == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(m.sens == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m.spec == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.ppv == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.npv == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.mcc == doctest::Approx(10.0 / std::sqrt(600.0)).epsilon(1e-12));
  // 17 winning pairs and one tie (0.2 vs 0.2) out of 25.
  CHECK(report[0].pooled.auc == doctest::Approx(17.5 / 25.0).epsilon(1e-12));

  const std::string table = format_report_table(report);
  CHECK(table.find("hand") != std::string::npos);
  CHECK(table.find("0.700") != std::string::npos);
  const std::string csv = format_report_csv(report);
  CHECK(csv.rfind("approach,AUC,Acc,F1,PPV,NPV,Sens,Spec,MCC,n,threshold\n", 0) == 0);
  CHECK_THROWS_AS(report_from_score_files({}), DataError);
  fs::remove_all(root);
}

TEST_CASE("cross-validation is deterministic, leak-free and independent of the job count") {
  const fs::path root = scratch("crossval");
  ExperimentConfig c = tiny_experiment(root);
  write_dataset(c.dataset, c.phantom, 2);

  const ExperimentResult a = run_crossval(c, 1);
  const ExperimentResult b = run_crossval(c, 3);
  REQUIRE(a.runs.size() == 1);
  const auto& run = a.runs[0];
  std::size_t lesions = 0;
  for (int id : a.manifest.patient_ids) lesions += load_patient(c.dataset, id).lesions.size();
  CHECK(run.scores.size() == lesions);
  CHECK(run.folds.size() == 3);
  for (const auto& split : a.splits) CHECK_NOTHROW(assert_no_leakage(split));
  for (const auto& r : run.scores) {
    CHECK(r.score > 0.0);
    CHECK(r.score < 1.0);
  }
  REQUIRE(b.runs[0].scores.size() == run.scores.size());
  for (std::size_t i = 0; i < run.scores.size(); ++i) {
    CHECK(b.runs[0].scores[i].score == run.scores[i].score);
    CHECK(b.runs[0].scores[i].patient_id == run.scores[i].patient_id);
  }

  write_experiment(c.out, a);
  for (const char* f : {"report.txt", "report.csv", "folds.csv", "experiment.json", "radiomics_gru_scores.csv",
                        "radiomics_gru/fold_00_training.csv"})
    CHECK(fs::exists(fs::path(c.out) / f));
  const fs::path again = root / "again";
  write_experiment(again, b);
  CHECK(slurp(fs::path(c.out) / "radiomics_gru_scores.csv") == slurp(again / "radiomics_gru_scores.csv"));
  CHECK(slurp(fs::path(c.out) / "folds.csv") == slurp(again / "folds.csv"));

  // Pooled row equals recomputation from the written score file.
  const auto rows = report_from_score_files({fs::path(c.out) / "radiomics_gru_scores.csv"});
  CHECK(rows[0].pooled.auc == run.pooled.auc);
  CHECK(rows[0].pooled.metrics.mcc == run.pooled.metrics.mcc);

  ExperimentConfig missing = c;
  missing.dataset = (root / "nowhere").string();
  CHECK_THROWS_AS(run_crossval(missing, 1), DataError);
  fs::remove_all(root);
}
