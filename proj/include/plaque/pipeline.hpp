#pragma once

#include "plaque/config.hpp"
#include "plaque/gbt.hpp"
#include "plaque/mpr.hpp"
#include "plaque/nn/train.hpp"
#include "plaque/phantom.hpp"
#include "plaque/radiomics.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace plaque {

enum class Variant { RadiomicsGbt, Rcnn2dPolar, Rcnn3dBaseline, RadiomicsGru };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);  // throws ConfigError
const std::vector<Variant>& all_variants();

enum class Target { Stenosis50, Revascularization };

std::string to_string(Target t);
Target target_from_string(const std::string& s);  // accepts stenosis50, revasc, revascularization

int lesion_target(const LesionRecord& l, Target t);

// Slice, cube and polar sampling for the image-based variants, plus the
// intensity normalization applied when cubes become network input.
struct GeometryConfig {
  int slice_size = 33;        // S, odd
  double slice_spacing = 0.3; // mm
  int cube_length = 16;       // slices per cube
  int cube_stride = 8;
  int angles = 16;
  int radii = 12;
  double r_max = 4.5;          // mm
  double intensity_center = 400.0;
  double intensity_scale = 600.0;

  void validate() const;
};

struct AugmentConfig {
  bool enabled = true;
  bool rotate = true;
  bool mirror = true;
  double max_translation = 2.0;  // in-plane pixels
  double noise_sigma = 10.0;     // intensity units, before normalization

  void validate() const;
};

struct ApproachConfig {
  Variant variant = Variant::RadiomicsGbt;
  GeometryConfig geometry;
  radiomics::RadiomicsConfig radiomics;
  gbt::BoostConfig boost;
  nn::ArchitectureConfig architecture;
  nn::TrainConfig train;
  AugmentConfig augment;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const GeometryConfig& c);
void from_json(const nlohmann::json& j, GeometryConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
void to_json(nlohmann::json& j, const ApproachConfig& c);
void from_json(const nlohmann::json& j, ApproachConfig& c);

enum class PayloadKind { Features, PolarCubes, CartesianCubes, FeatureSequence };

// One lesion ready for a variant. Exactly one payload is populated:
//   Features        -> features (segment-level radiomics)
//   PolarCubes      -> polar, with the Cartesian source cubes kept in `cubes`
//                      so translation can act before the polar transform
//   CartesianCubes  -> cubes
//   FeatureSequence -> sequence (per-cube shape features + presence flag)
struct LesionSample {
  int patient_id = 0;
  int segment_id = 0;
  int target = 0;
  PayloadKind kind = PayloadKind::Features;
  std::vector<double> features;
  std::vector<Cube> cubes;
  std::vector<PolarCube> polar;
  std::vector<std::vector<double>> sequence;

  std::size_t sequence_length() const;
};

// Number of per-cube features in the FeatureSequence payload.
int sequence_feature_count();

// Builds the variant's samples for every lesion of one patient. The volume is
// histogram-equalized once per patient before any extraction.
std::vector<LesionSample> prepare_patient(const Patient& patient, const ApproachConfig& cfg, Target target);

// Wall voxels whose nearest centerline point lies in [start, end].
Mask segment_wall_mask(const Patient& patient, const LesionRecord& lesion);

// Polar payload helpers; both are exact index permutations.
PolarCube rotate_polar(const PolarCube& p, int steps);  // a -> (a + steps) mod A
PolarCube mirror_polar(const PolarCube& p);             // a -> (A - a) mod A

struct AugmentDraw {
  int angle_steps = 0;   // polar payloads
  double radians = 0.0;  // Cartesian payloads
  bool mirror = false;
  double dp = 0.0, dq = 0.0;
};

AugmentDraw draw_augmentation(const LesionSample& s, const AugmentConfig& cfg, int angles, Rng& rng);
// Applies translation, rotation, mirroring and then noise (drawn from rng).
LesionSample apply_augmentation(const LesionSample& s, const AugmentDraw& d, const AugmentConfig& cfg,
                                const GeometryConfig& geo, Rng& rng);
// Draw + apply. Throws std::invalid_argument for feature payloads.
LesionSample augment(const LesionSample& s, const AugmentConfig& cfg, const GeometryConfig& geo, Rng& rng);

// Class-balanced batches: each batch takes batch/2 indices of each class,
// sampling without replacement from the majority class (one pass over it per
// epoch) and with replacement from the minority class. Batch count is
// ceil(2 * majority / batch). Throws for single-class labels.
std::vector<std::vector<std::size_t>> balanced_batches(const std::vector<int>& labels, int batch, Rng& rng);

// Network input for a sample (normalized intensities or standardized
// feature vectors).
struct Standardizer {
  std::vector<double> mean, scale;
  static Standardizer fit(const std::vector<LesionSample>& samples);
  std::vector<double> apply(const std::vector<double>& v) const;
};
std::vector<nn::Tensor> to_network_input(const LesionSample& s, const GeometryConfig& geo,
                                         const Standardizer* standardizer);

struct ApproachResult {
  std::vector<double> scores;  // one per test sample, in (0, 1)
  nn::TrainResult training;    // empty for the boosting variant
};

// Trains on train (+ val for selection) and scores test.
ApproachResult run_approach(const std::vector<LesionSample>& train, const std::vector<LesionSample>& val,
                            const std::vector<LesionSample>& test, const ApproachConfig& cfg);

}  // namespace plaque
