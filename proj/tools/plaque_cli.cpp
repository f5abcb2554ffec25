// plaque: phantom generation, feature extraction, cross-validation and reports.
//
// Exit codes: 0 success, 1 internal failure, 2 configuration error,
// 3 data error.

#include "plaque/experiment.hpp"
#include "plaque/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>

namespace fs = std::filesystem;
using namespace plaque;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string dataset;
  std::string from;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> approaches;
  std::string target;
  int jobs = 1;
  std::vector<std::string> score_files;
};

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig c;
  if (!o.config.empty()) c = read_experiment_config(o.config);
  else {
    // Built-in defaults: every variant, default phantoms.
    c = nlohmann::json::object().get<ExperimentConfig>();
  }
  if (!o.out.empty()) c.out = o.out;
  if (!o.dataset.empty()) c.dataset = o.dataset;
  if (o.seed_set) {
    c.seed = o.seed;
    c.phantom.master_seed = o.seed;
  }
  if (!o.target.empty()) c.target = target_from_string(o.target);
  if (!o.approaches.empty()) {
    std::vector<ApproachConfig> picked;
    for (const auto& name : o.approaches) {
      const Variant v = variant_from_string(name);
      auto it = std::find_if(c.approaches.begin(), c.approaches.end(),
                             [&](const ApproachConfig& a) { return a.variant == v; });
      if (it != c.approaches.end()) {
        picked.push_back(*it);
      } else {
        ApproachConfig a;
        a.variant = v;
        picked.push_back(a);
      }
    }
    c.approaches = picked;
  }
  if (o.jobs < 1) throw ConfigError("--jobs must be >= 1");
  c.validate();
  return c;
}

void log(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

int cmd_phantom(const Options& o) {
  const ExperimentConfig c = load_config(o);
  const fs::path root = o.out.empty() ? c.dataset_path() : fs::path(o.out);
  const DatasetManifest m = write_dataset(root, c.phantom, o.jobs);
  char line[200];
  std::snprintf(line, sizeof line, "%zu patients, %d lesions, stenosis50 %.4f, revascularization %.4f -> %s",
                m.patient_ids.size(), m.lesions, m.stenosis_prevalence, m.revascularization_prevalence,
                root.string().c_str());
  log(line);
  return 0;
}

int cmd_features(const Options& o) {
  const ExperimentConfig c = load_config(o);
  ApproachConfig a;
  for (const auto& x : c.approaches)
    if (x.variant == Variant::RadiomicsGbt) {
      a = x;
      break;
    }
  a.variant = Variant::RadiomicsGbt;
  const fs::path root = c.dataset_path();
  const DatasetManifest m = read_manifest(root);
  std::vector<std::vector<LesionSample>> samples(m.patient_ids.size());
  std::vector<Patient> patients(m.patient_ids.size());
  parallel_for(m.patient_ids.size(), o.jobs, [&](std::size_t i) {
    patients[i] = load_patient(root, m.patient_ids[i]);
    samples[i] = prepare_patient(patients[i], a, c.target);
  });

  fs::create_directories(c.out);
  const fs::path file = fs::path(c.out) / "features.csv";
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << "patient_id,segment_id,stenosis50,revascularization";
  for (const auto& n : radiomics::feature_names(a.radiomics)) os << ',' << n;
  os << '\n';
  char buf[32];
  std::size_t rows = 0;
  for (std::size_t i = 0; i < patients.size(); ++i)
    for (std::size_t k = 0; k < samples[i].size(); ++k) {
      const auto& l = patients[i].lesions[k];
      os << l.patient_id << ',' << l.segment_id << ',' << l.high_stenosis << ',' << l.revascularize;
      for (double v : samples[i][k].features) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ',' << buf;
      }
      os << '\n';
      ++rows;
    }
  log(std::to_string(rows) + " lesions x " + std::to_string(radiomics::feature_names(a.radiomics).size()) +
      " features -> " + file.string());
  return 0;
}

void print_summary(const ExperimentResult& r) {
  std::vector<ReportRow> rows;
  for (const auto& run : r.runs) rows.push_back({to_string(run.config.variant), run.pooled});
  std::cout << "target " << to_string(r.config.target) << "\n" << format_report_table(rows);
}

int cmd_crossval(const Options& o) {
  const ExperimentConfig c = load_config(o);
  log("cross-validating " + std::to_string(c.approaches.size()) + " approach(es) on " + c.dataset_path().string());
  const ExperimentResult r = run_crossval(c, o.jobs);
  write_experiment(c.out, r);
  print_summary(r);
  log("report written to " + c.out);
  return 0;
}

int cmd_report(const Options& o) {
  std::vector<fs::path> files(o.score_files.begin(), o.score_files.end());
  if (files.empty() && !o.out.empty() && fs::is_directory(o.out)) {
    for (const auto& e : fs::directory_iterator(o.out)) {
      const std::string name = e.path().filename().string();
      if (name.size() > 11 && name.ends_with("_scores.csv")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw ConfigError("report: give score files or an --out directory containing *_scores.csv");
  const auto rows = report_from_score_files(files);
  std::cout << format_report_table(rows);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "report_table.txt", std::ios::binary) << format_report_table(rows);
    std::ofstream(fs::path(o.out) / "report_table.csv", std::ios::binary) << format_report_csv(rows);
  }
  return 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Regenerates the dataset and every result from a configuration, or from a
// previous run's experiment.json (config echo plus manifest), then compares
// score files with that run when one is given.
int cmd_reproduce(const Options& o) {
  Options opts = o;
  ExperimentConfig c;
  if (!o.from.empty()) {
    const fs::path record = fs::path(o.from) / "experiment.json";
    std::ifstream is(record);
    if (!is) throw DataError("cannot read " + record.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const std::exception& e) {
      throw DataError(record.string() + ": " + e.what());
    }
    c = j.at("config").get<ExperimentConfig>();
    c.phantom = manifest_from_json(j.at("manifest")).spec;
    if (o.out.empty()) throw ConfigError("reproduce --from needs --out for the new run");
    c.out = o.out;
    c.dataset.clear();
    if (!o.target.empty() || o.seed_set || !o.approaches.empty())
      throw ConfigError("reproduce --from replays the recorded run; --seed/--target/--approach are not allowed");
  } else {
    c = load_config(opts);
    c.dataset.clear();
  }
  c.validate();
  const fs::path root = c.dataset_path();
  log("generating dataset in " + root.string());
  write_dataset(root, c.phantom, o.jobs);
  const ExperimentResult r = run_crossval(c, o.jobs);
  write_experiment(c.out, r);
  print_summary(r);
  if (o.from.empty()) return 0;

  bool same = true;
  for (const auto& run : r.runs) {
    const std::string name = to_string(run.config.variant) + "_scores.csv";
    const bool eq = slurp(fs::path(o.from) / name) == slurp(fs::path(c.out) / name);
    std::cout << name << (eq ? ": identical" : ": DIFFERS") << "\n";
    same = same && eq;
  }
  return same ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coronary plaque lesion classification on synthetic phantoms"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool experiment) {
    sub->add_option("--config", o.config, "experiment configuration (JSON)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    if (experiment) {
      sub->add_option("--dataset", o.dataset, "dataset directory (default <out>/dataset)");
      sub->add_option_function<std::uint64_t>(
          "--seed", [&](const std::uint64_t& s) { o.seed = s, o.seed_set = true; }, "master seed");
      sub->add_option("--target", o.target, "stenosis50 or revasc");
    }
  };

  auto* phantom = app.add_subcommand("phantom", "generate the synthetic dataset");
  common(phantom, true);
  auto* features = app.add_subcommand("features", "radiomics feature table for every lesion");
  common(features, true);
  auto* crossval = app.add_subcommand("crossval", "patient-stratified k-fold evaluation");
  common(crossval, true);
  crossval->add_option("--approach", o.approaches, "approach name (repeatable)");
  auto* report = app.add_subcommand("report", "comparison table from score files");
  report->add_option("--out", o.out, "directory to scan and write report_table.{txt,csv}");
  report->add_option("scores", o.score_files, "score CSV files")->check(CLI::ExistingFile);
  auto* reproduce = app.add_subcommand("reproduce", "dataset, cross-validation and report in one run");
  common(reproduce, true);
  reproduce->add_option("--approach", o.approaches, "approach name (repeatable)");
  reproduce->add_option("--from", o.from, "previous run directory to replay and compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*phantom) return cmd_phantom(o);
    if (*features) return cmd_features(o);
    if (*crossval) return cmd_crossval(o);
    if (*report) return cmd_report(o);
    if (*reproduce) return cmd_reproduce(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
