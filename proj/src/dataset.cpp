#include "plaque/dataset.hpp"

#include "plaque/config.hpp"
#include "plaque/eval.hpp"
#include "plaque/parallel.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace plaque {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const fs::path& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("malformed number '" + s + "' in " + where.string());
  }
}

int to_int(const std::string& s, const fs::path& where) {
  const double v = to_double(s, where);
  if (v != static_cast<int>(v)) throw DataError("expected an integer, got '" + s + "' in " + where.string());
  return static_cast<int>(v);
}

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

}  // namespace

json manifest_to_json(const DatasetManifest& m) {
  return json{{"format", "plaque-dataset/1"},
              {"spec", m.spec},
              {"patient_ids", m.patient_ids},
              {"patient_seeds", m.patient_seeds},
              {"lesions", m.lesions},
              {"stenosis_prevalence", m.stenosis_prevalence},
              {"revascularization_prevalence", m.revascularization_prevalence},
              {"decision_rule",
               "branch positive iff max degree > severe_degree, or max degree > moderate_degree with lipid or mixed "
               "plaque; flipped with probability label_noise; propagated to the worst segment"}};
}

DatasetManifest manifest_from_json(const json& j) {
  if (j.value("format", "") != "plaque-dataset/1") throw DataError("manifest: unknown format");
  DatasetManifest m;
  try {
    m.spec = j.at("spec").get<PhantomSpec>();
    m.patient_ids = j.at("patient_ids").get<std::vector<int>>();
    m.patient_seeds = j.at("patient_seeds").get<std::vector<std::uint64_t>>();
    m.lesions = j.at("lesions").get<int>();
    m.stenosis_prevalence = j.at("stenosis_prevalence").get<double>();
    m.revascularization_prevalence = j.at("revascularization_prevalence").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (m.patient_ids.size() != m.patient_seeds.size()) throw DataError("manifest: ids and seeds differ in length");
  return m;
}

fs::path patient_dir(const fs::path& root, int patient_id) {
  char name[32];
  std::snprintf(name, sizeof name, "patient_%04d", patient_id);
  return root / name;
}

void write_lesions_csv(const fs::path& path, const std::vector<LesionRecord>& lesions) {
  std::ostringstream os;
  os << "patient_id,branch_id,segment_id,start_index,end_index,stenosis_degree,high_stenosis,revascularize,"
        "center_arclength,extent,narrowing,component\n";
  for (const auto& l : lesions)
    os << l.patient_id << ',' << l.branch_id << ',' << l.segment_id << ',' << l.start_index << ',' << l.end_index
       << ',' << fmt(l.stenosis_degree) << ',' << l.high_stenosis << ',' << l.revascularize << ','
       << fmt(l.center_arclength) << ',' << fmt(l.extent) << ',' << fmt(l.narrowing) << ',' << to_string(l.component)
       << '\n';
  write_text(path, os.str());
}

std::vector<LesionRecord> read_lesions_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (split(line, ',').size() != 12) throw DataError("unexpected lesions header in " + path.string());
  std::vector<LesionRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 12) throw DataError("malformed lesion row in " + path.string());
    LesionRecord l;
    l.patient_id = to_int(c[0], path);
    l.branch_id = to_int(c[1], path);
    l.segment_id = to_int(c[2], path);
    l.start_index = to_int(c[3], path);
    l.end_index = to_int(c[4], path);
    l.stenosis_degree = to_double(c[5], path);
    l.high_stenosis = to_int(c[6], path);
    l.revascularize = to_int(c[7], path);
    l.center_arclength = to_double(c[8], path);
    l.extent = to_double(c[9], path);
    l.narrowing = to_double(c[10], path);
    try {
      l.component = component_from_string(c[11]);
    } catch (const std::exception&) {
      throw DataError("unknown plaque component '" + c[11] + "' in " + path.string());
    }
    if (l.start_index >= l.end_index) throw DataError("lesion with start >= end in " + path.string());
    out.push_back(l);
  }
  return out;
}

void write_patient(const fs::path& root, const Patient& p) {
  const fs::path dir = patient_dir(root, p.id);
  fs::create_directories(dir);
  write_volume(dir / "volume", p.volume);
  write_mask(dir / "lumen", p.lumen);
  write_mask(dir / "wall", p.wall);
  std::ostringstream cl;
  cl << "x,y,z\n";
  for (const auto& pt : p.centerline.points) cl << fmt(pt.x()) << ',' << fmt(pt.y()) << ',' << fmt(pt.z()) << '\n';
  write_text(dir / "centerline.csv", cl.str());
  write_lesions_csv(dir / "lesions.csv", p.lesions);
  const json meta{{"id", p.id}, {"branch_positive", p.branch_positive}, {"centerline_step", p.centerline.step}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

DatasetManifest write_dataset(const fs::path& root, const PhantomSpec& spec, int jobs) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw std::runtime_error("cannot create output directory " + root.string());

  DatasetManifest m;
  m.spec = spec;
  std::vector<std::vector<LesionRecord>> records(static_cast<std::size_t>(spec.patients));
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const Patient p = generate_patient(spec, static_cast<int>(i));
    write_patient(root, p);
    records[i] = p.lesions;
  });
  std::vector<int> sten, rev;
  for (int id = 0; id < spec.patients; ++id) {
    m.patient_ids.push_back(id);
    m.patient_seeds.push_back(patient_seed(spec, id));
    for (const auto& l : records[static_cast<std::size_t>(id)]) {
      sten.push_back(l.high_stenosis);
      rev.push_back(l.revascularize);
    }
  }
  m.lesions = static_cast<int>(sten.size());
  m.stenosis_prevalence = sten.empty() ? 0.0 : prevalence(sten);
  m.revascularization_prevalence = rev.empty() ? 0.0 : prevalence(rev);
  write_text(root / "manifest.json", manifest_to_json(m).dump(2) + "\n");
  return m;
}

DatasetManifest read_manifest(const fs::path& root) {
  return manifest_from_json(read_json_file(root / "manifest.json"));
}

Patient load_patient(const fs::path& root, int patient_id) {
  const fs::path dir = patient_dir(root, patient_id);
  if (!fs::is_directory(dir)) throw DataError("missing patient directory " + dir.string());
  Patient p;
  p.id = patient_id;
  try {
    p.volume = read_volume(dir / "volume");
    p.lumen = read_mask(dir / "lumen");
    p.wall = read_mask(dir / "wall");
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (!p.wall.grid().same_geometry(p.volume.grid()) || !p.lumen.grid().same_geometry(p.volume.grid()))
    throw DataError("mask geometry differs from the volume in " + dir.string());
  const json meta = read_json_file(dir / "meta.json");
  p.branch_positive = meta.value("branch_positive", false);
  p.centerline.step = meta.value("centerline_step", 0.0);

  std::ifstream cl(dir / "centerline.csv");
  if (!cl) throw DataError("cannot read " + (dir / "centerline.csv").string());
  std::string line;
  std::getline(cl, line);
  while (std::getline(cl, line)) {
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 3) throw DataError("malformed centerline row in " + dir.string());
    p.centerline.points.emplace_back(to_double(c[0], dir), to_double(c[1], dir), to_double(c[2], dir));
  }
  if (p.centerline.size() < 2) throw DataError("centerline needs at least two points in " + dir.string());
  p.lesions = read_lesions_csv(dir / "lesions.csv");
  for (const auto& l : p.lesions)
    if (l.end_index >= static_cast<int>(p.centerline.size()))
      throw DataError("lesion indices beyond the centerline in " + dir.string());
  return p;
}

}  // namespace plaque
