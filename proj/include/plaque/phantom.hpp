#pragma once

#include "plaque/mpr.hpp"
#include "plaque/seed.hpp"
#include "plaque/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace plaque {

enum class PlaqueComponent { Calcified, Lipid, Mixed };

std::string to_string(PlaqueComponent c);
PlaqueComponent component_from_string(const std::string& s);

struct Intensities {
  double background = 0.0;
  double wall = 0.0;
  double lumen = 400.0;
  double calcified = 900.0;
  double lipid = -50.0;
};

// Branch-level synthetic clinical decision.
struct DecisionRule {
  double severe_degree = 0.5;    // positive above this
  double moderate_degree = 0.35; // positive above this when lipid is present
  double label_noise = 0.05;     // flip probability
};

struct PhantomSpec {
  std::uint64_t master_seed = 42;
  int patients = 40;

  Dims dims{120, 84, 24};
  double spacing = 0.5;  // isotropic, mm

  double path_length = 50.0;         // mm
  double curvature_min = 1.0 / 100;  // 1/mm
  double curvature_max = 1.0 / 30;
  double out_of_plane = 1.0;         // sinusoid amplitude, mm

  double r_ref = 1.8;           // mm
  double wall_thickness = 0.8;  // mm

  int lesions_min = 2;
  int lesions_max = 5;
  double extent_min = 6.0;  // mm
  double extent_max = 10.0;
  double end_margin = 3.0;  // lesion-free arclength at both vessel ends

  // Narrowing fraction: mild U[mild_min, mild_max], with probability
  // severe_probability severe U[severe_min, severe_max].
  double mild_min = 0.05, mild_max = 0.45;
  double severe_min = 0.30, severe_max = 0.80;
  double severe_probability = 0.35;

  Intensities intensity;
  double noise_sigma = 20.0;
  double centerline_step = 0.5;  // mm

  DecisionRule rule;

  void validate() const;
};

struct LesionRecord {
  int patient_id = 0;
  int branch_id = 0;
  int segment_id = 0;
  int start_index = 0;  // inclusive centerline indices
  int end_index = 0;
  double stenosis_degree = 0.0;
  int high_stenosis = 0;
  int revascularize = 0;
  // Generator ground truth.
  double center_arclength = 0.0;
  double extent = 0.0;
  double narrowing = 0.0;
  PlaqueComponent component = PlaqueComponent::Calcified;
};

struct Patient {
  int id = 0;
  Volume volume;
  Centerline centerline;
  Mask lumen;
  Mask wall;  // annulus between lumen and outer vessel wall
  std::vector<LesionRecord> lesions;
  bool branch_positive = false;
};

// Analytic lumen radius at arclength s: r_ref * (1 - sum_i f_i * g_i(s)),
// with g_i a unit-height Gaussian of sigma extent_i / 4 centered on the lesion.
double lumen_radius(const PhantomSpec& spec, const std::vector<LesionRecord>& lesions, double s);

// 1 - min r(s) / r_ref over the lesion's arclength interval.
double lesion_stenosis_degree(const PhantomSpec& spec, const std::vector<LesionRecord>& lesions,
                              const LesionRecord& lesion);

// Seed for a patient; stable in (master seed, patient id).
std::uint64_t patient_seed(const PhantomSpec& spec, int patient_id);

// Renders one patient. Labels are filled in: high_stenosis from the degree,
// revascularize from the branch decision propagated to the worst segment.
Patient generate_patient(const PhantomSpec& spec, int patient_id);

// Branch positive iff max degree > severe, or max degree > moderate with any
// lipid-bearing (lipid or mixed) lesion; then flipped with the rule's
// label-noise probability.
bool assign_branch_revascularization(const std::vector<LesionRecord>& branch,
                                     const DecisionRule& rule, Rng& rng);

}  // namespace plaque
