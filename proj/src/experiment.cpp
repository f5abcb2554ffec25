#include "plaque/experiment.hpp"

#include "plaque/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace plaque {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ApproachConfig> default_approaches() {
  std::vector<ApproachConfig> out;
  for (Variant v : all_variants()) {
    ApproachConfig a;
    a.variant = v;
    out.push_back(a);
  }
  return out;
}

}  // namespace

// ---- config ---------------------------------------------------------------

fs::path ExperimentConfig::dataset_path() const {
  return dataset.empty() ? fs::path(out) / "dataset" : fs::path(dataset);
}

void ExperimentConfig::validate() const {
  try {
    phantom.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("phantom: ") + e.what());
  }
  if (approaches.empty()) throw ConfigError("experiment: no approaches");
  for (const auto& a : approaches) a.validate();
  if (folds < 2) throw ConfigError("experiment: folds must be >= 2");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("experiment: val_fraction must lie in (0, 1)");
  if (out.empty()) throw ConfigError("experiment: empty output directory");
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"phantom", c.phantom}, {"dataset", c.dataset},           {"approaches", c.approaches},
           {"target", to_string(c.target)}, {"folds", c.folds}, {"val_fraction", c.val_fraction},
           {"seed", c.seed},       {"out", c.out}};
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j, {"phantom", "dataset", "approaches", "target", "folds", "val_fraction", "seed", "out"}, "experiment");
  if (j.contains("phantom")) c.phantom = j.at("phantom").get<PhantomSpec>();
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  c.approaches = j.contains("approaches") ? j.at("approaches").get<std::vector<ApproachConfig>>() : default_approaches();
  if (j.contains("target")) c.target = target_from_string(j.at("target").get<std::string>());
  if (j.contains("folds")) c.folds = j.at("folds").get<int>();
  if (j.contains("val_fraction")) c.val_fraction = j.at("val_fraction").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
}

ExperimentConfig read_experiment_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  try {
    ExperimentConfig c = json::parse(is).get<ExperimentConfig>();
    const fs::path base = path.parent_path();
    if (!c.dataset.empty() && fs::path(c.dataset).is_relative()) c.dataset = (base / c.dataset).string();
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---- folds ----------------------------------------------------------------

void assert_no_leakage(const FoldSplit& split) {
  std::set<int> seen;
  for (const auto* part : {&split.train, &split.val}) seen.insert(part->begin(), part->end());
  for (int id : split.test)
    if (seen.count(id)) throw LeakageError("patient " + std::to_string(id) + " is in both test and training data");
  std::set<int> val(split.val.begin(), split.val.end());
  for (int id : split.train)
    if (val.count(id)) throw LeakageError("patient " + std::to_string(id) + " is in both train and validation data");
}

std::vector<FoldSplit> experiment_folds(const std::vector<int>& patient_ids, const std::vector<int>& flags,
                                        const ExperimentConfig& cfg) {
  if (static_cast<int>(patient_ids.size()) < cfg.folds)
    throw ConfigError("experiment: " + std::to_string(cfg.folds) + " folds requested but the dataset has " +
                      std::to_string(patient_ids.size()) + " patients");
  auto splits = stratified_patient_kfold(patient_ids, flags, cfg.folds, derive_seed(cfg.seed, "kfold"), cfg.val_fraction);
  for (const auto& s : splits) assert_no_leakage(s);
  return splits;
}

std::uint64_t fold_seed(std::uint64_t master, const ApproachConfig& a, int fold) {
  return derive_seed(master, "approach-" + to_string(a.variant), static_cast<std::uint64_t>(fold), a.seed);
}

// ---- scores ---------------------------------------------------------------

void write_scores_csv(const fs::path& path, const std::vector<ScoreRow>& rows) {
  std::ostringstream os;
  os << "patient_id,segment_id,target,score,fold\n";
  for (const auto& r : rows)
    os << r.patient_id << ',' << r.segment_id << ',' << r.target << ',' << fmt(r.score) << ',' << r.fold << '\n';
  write_text(path, os.str());
}

std::vector<ScoreRow> read_scores_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "patient_id,segment_id,target,score,fold")
    throw DataError("unexpected score file header in " + path.string());
  std::vector<ScoreRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    ScoreRow r;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf,%d%c", &r.patient_id, &r.segment_id, &r.target, &r.score, &r.fold,
                    &tail) != 5 ||
        (r.target != 0 && r.target != 1) || !std::isfinite(r.score))
      throw DataError("malformed score row " + std::to_string(lineno) + " in " + path.string());
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError("score file without rows: " + path.string());
  return rows;
}

// ---- cross validation -----------------------------------------------------

ExperimentResult run_crossval(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  const fs::path root = cfg.dataset_path();
  if (!fs::exists(root / "manifest.json")) throw DataError("no dataset manifest at " + root.string());
  res.manifest = read_manifest(root);
  const auto& ids = res.manifest.patient_ids;

  std::vector<Patient> patients(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) { patients[i] = load_patient(root, ids[i]); });
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = i;

  for (const auto& p : patients) {
    int flag = 0;
    for (const auto& l : p.lesions) flag |= lesion_target(l, cfg.target);
    res.patient_flags.push_back(flag);
  }
  res.splits = experiment_folds(ids, res.patient_flags, cfg);

  for (const auto& acfg : cfg.approaches) {
    ApproachRun run;
    run.config = acfg;
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<LesionSample>> samples(patients.size());
    parallel_for(patients.size(), jobs,
                 [&](std::size_t i) { samples[i] = prepare_patient(patients[i], acfg, cfg.target); });
    run.prepare_seconds = seconds_since(t0);

    auto gather = [&](const std::vector<int>& pids) {
      std::vector<LesionSample> out;
      for (int id : pids)
        for (const auto& s : samples[slot.at(id)]) out.push_back(s);
      return out;
    };

    t0 = std::chrono::steady_clock::now();
    const std::size_t K = res.splits.size();
    std::vector<std::vector<ScoreRow>> fold_rows(K);
    run.folds.resize(K);
    parallel_for(K, jobs, [&](std::size_t f) {
      const FoldSplit& split = res.splits[f];
      assert_no_leakage(split);
      std::vector<int> test_ids = split.test;
      std::sort(test_ids.begin(), test_ids.end());
      const auto train = gather(split.train), val = gather(split.val), test = gather(test_ids);
      ApproachConfig fcfg = acfg;
      fcfg.seed = fold_seed(cfg.seed, acfg, static_cast<int>(f));
      const ApproachResult ar = run_approach(train, val, test, fcfg);

      FoldRecord& rec = run.folds[f];
      rec.fold = static_cast<int>(f);
      rec.seed = fcfg.seed;
      rec.test_lesions = test.size();
      if (acfg.variant != Variant::RadiomicsGbt) {
        rec.best_epoch = ar.training.best_epoch;
        rec.log = ar.training.log;
      }
      std::vector<int> labels;
      for (std::size_t i = 0; i < test.size(); ++i) {
        fold_rows[f].push_back({test[i].patient_id, test[i].segment_id, test[i].target, ar.scores[i], rec.fold});
        labels.push_back(test[i].target);
      }
      if (!test.empty()) rec.metrics = evaluate_scores(ar.scores, labels);
    });
    run.train_seconds = seconds_since(t0);

    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& rows : fold_rows)
      for (const auto& r : rows) {
        run.scores.push_back(r);
        scores.push_back(r.score);
        labels.push_back(r.target);
      }
    run.pooled = evaluate_scores(scores, labels);
    res.runs.push_back(std::move(run));
  }
  return res;
}

// ---- reports --------------------------------------------------------------

namespace {

std::string metric_cells(const MetricsReport& m, const char* sep, const char* spec) {
  std::string out;
  const auto row = metric_row(m);
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += sep;
    out += (i == 0 && !m.auc_defined) ? std::string("nan") : fmt(row[i], spec);
  }
  return out;
}

std::string padded(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string header_line(std::size_t first) {
  std::string h = padded("approach", first);
  for (const auto& c : metric_columns()) h += padded(c, 8);
  return h;
}

std::string table_row(const std::string& name, const MetricsReport& m, std::size_t first) {
  std::string out = padded(name, first);
  const auto row = metric_row(m);
  for (std::size_t i = 0; i < row.size(); ++i)
    out += padded((i == 0 && !m.auc_defined) ? std::string("n/a") : fmt(row[i], "%.3f"), 8);
  return out;
}

}  // namespace

std::vector<ReportRow> report_from_score_files(const std::vector<fs::path>& files) {
  if (files.empty()) throw DataError("report: no score files");
  std::vector<ReportRow> out;
  for (const auto& f : files) {
    const auto rows = read_scores_csv(f);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& r : rows) {
      s.push_back(r.score);
      y.push_back(r.target);
    }
    std::string name = f.stem().string();
    const std::string suffix = "_scores";
    if (name.size() > suffix.size() && name.ends_with(suffix)) name.resize(name.size() - suffix.size());
    out.push_back({name, evaluate_scores(s, y)});
  }
  return out;
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
  std::size_t w = 10;
  for (const auto& r : rows) w = std::max(w, r.approach.size() + 2);
  std::string out = header_line(w) + "\n";
  for (const auto& r : rows) out += table_row(r.approach, r.pooled, w) + "\n";
  return out;
}

std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "approach";
  for (const auto& c : metric_columns()) out += "," + c;
  out += ",n,threshold\n";
  for (const auto& r : rows)
    out += r.approach + "," + metric_cells(r.pooled, ",", "%.17g") + "," + std::to_string(r.pooled.n) + "," +
           fmt(r.pooled.threshold) + "\n";
  return out;
}

void write_experiment(const fs::path& out, const ExperimentResult& r) {
  fs::create_directories(out);
  const ExperimentConfig& cfg = r.config;

  json echo = cfg;
  json seeds = json::object();
  seeds["master"] = cfg.seed;
  seeds["kfold"] = derive_seed(cfg.seed, "kfold");
  for (const auto& run : r.runs) {
    json per_fold = json::array();
    for (const auto& f : run.folds) per_fold.push_back(f.seed);
    seeds[to_string(run.config.variant)] = per_fold;
  }
  json record{{"config", echo},
              {"seeds", seeds},
              {"dataset", cfg.dataset_path().string()},
              {"manifest", manifest_to_json(r.manifest)}};
  write_text(out / "experiment.json", record.dump(2) + "\n");

  std::ostringstream folds;
  folds << "fold,role,patient_id,positive\n";
  std::map<int, int> flag;
  for (std::size_t i = 0; i < r.manifest.patient_ids.size(); ++i) flag[r.manifest.patient_ids[i]] = r.patient_flags[i];
  for (std::size_t f = 0; f < r.splits.size(); ++f) {
    const auto emit = [&](const char* role, std::vector<int> ids) {
      std::sort(ids.begin(), ids.end());
      for (int id : ids) folds << f << ',' << role << ',' << id << ',' << flag[id] << '\n';
    };
    emit("test", r.splits[f].test);
    emit("val", r.splits[f].val);
    emit("train", r.splits[f].train);
  }
  write_text(out / "folds.csv", folds.str());

  std::ostringstream csv, txt;
  csv << "approach,scope,n,positives";
  for (const auto& c : metric_columns()) csv << ',' << c;
  csv << ",best_epoch,seed\n";

  txt << "target " << to_string(cfg.target) << ", " << r.splits.size() << "-fold patient-stratified cross-validation, "
      << "master seed " << cfg.seed << "\n";
  txt << "dataset " << cfg.dataset_path().string() << ": " << r.manifest.patient_ids.size() << " patients, "
      << r.manifest.lesions << " lesions, stenosis50 prevalence " << fmt(r.manifest.stenosis_prevalence, "%.4f")
      << ", revascularization prevalence " << fmt(r.manifest.revascularization_prevalence, "%.4f") << "\n";
  int positives = 0;
  for (int f : r.patient_flags) positives += f;
  txt << "positive patients " << positives << " of " << r.patient_flags.size() << "; threshold 0.5\n\n";

  std::vector<ReportRow> pooled;
  for (const auto& run : r.runs) {
    const std::string name = to_string(run.config.variant);
    write_scores_csv(out / (name + "_scores.csv"), run.scores);
    if (run.config.variant != Variant::RadiomicsGbt) {
      fs::create_directories(out / name);
      for (const auto& f : run.folds) {
        char file[32];
        std::snprintf(file, sizeof file, "fold_%02d_training.csv", f.fold);
        nn::TrainResult tr;
        tr.log = f.log;
        tr.best_epoch = f.best_epoch;
        nn::write_training_log(out / name / file, tr);
      }
    }

    txt << name << "  (prepare " << fmt(run.prepare_seconds, "%.1f") << " s, train " << fmt(run.train_seconds, "%.1f")
        << " s)\n";
    const std::size_t w = 10;
    txt << "  " << header_line(w) << "best\n";
    for (const auto& f : run.folds) {
      txt << "  " << table_row("fold " + std::to_string(f.fold), f.metrics, w) << f.best_epoch << "\n";
      csv << name << ',' << f.fold << ',' << f.metrics.n << ','
          << (f.metrics.counts.tp + f.metrics.counts.fn) << ',' << metric_cells(f.metrics, ",", "%.17g") << ','
          << f.best_epoch << ',' << f.seed << '\n';
    }
    txt << "  " << table_row("pooled", run.pooled, w) << "\n\n";
    csv << name << ",pooled," << run.pooled.n << ',' << (run.pooled.counts.tp + run.pooled.counts.fn) << ','
        << metric_cells(run.pooled, ",", "%.17g") << ",,\n";
    pooled.push_back({name, run.pooled});
  }
  txt << "pooled comparison\n" << format_report_table(pooled);
  write_text(out / "report.txt", txt.str());
  write_text(out / "report.csv", csv.str());
}

}  // namespace plaque
