#pragma once

#include "plaque/phantom.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace plaque {

// Missing or malformed dataset files (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Layout:
//   manifest.json
//   patient_0000/volume.{raw,json}  lumen.{raw,json}  wall.{raw,json}
//                centerline.csv (x,y,z per row, mm)  lesions.csv  meta.json
struct DatasetManifest {
  PhantomSpec spec;
  std::vector<int> patient_ids;
  std::vector<std::uint64_t> patient_seeds;
  int lesions = 0;
  double stenosis_prevalence = 0;
  double revascularization_prevalence = 0;
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

std::filesystem::path patient_dir(const std::filesystem::path& root, int patient_id);

// Generates every patient of the spec and writes the dataset. Patients are
// independent, so `jobs` only changes wall time.
DatasetManifest write_dataset(const std::filesystem::path& root, const PhantomSpec& spec, int jobs = 1);

void write_patient(const std::filesystem::path& root, const Patient& p);
DatasetManifest read_manifest(const std::filesystem::path& root);
Patient load_patient(const std::filesystem::path& root, int patient_id);

void write_lesions_csv(const std::filesystem::path& path, const std::vector<LesionRecord>& lesions);
std::vector<LesionRecord> read_lesions_csv(const std::filesystem::path& path);

}  // namespace plaque
