#include <doctest.h>

#include "plaque/eval.hpp"
#include "plaque/mpr.hpp"
#include "plaque/phantom.hpp"

#include <algorithm>
#include <cmath>

using namespace plaque;

namespace {

PhantomSpec quiet_spec() {
  PhantomSpec s;
  s.noise_sigma = 0.0;
  return s;
}

LesionRecord make_lesion(double center, double extent, double narrowing, PlaqueComponent c,
                         double degree = 0.0) {
  LesionRecord l;
  l.center_arclength = center;
  l.extent = extent;
  l.narrowing = narrowing;
  l.component = c;
  l.stenosis_degree = degree;
  return l;
}

// Wall intensity the generator paints just outside the lumen at arclength s.
double inner_wall_value(const PhantomSpec& spec, const Patient& pt, double s) {
  double v = spec.intensity.wall;
  for (const auto& l : pt.lesions) {
    if (std::abs(s - l.center_arclength) > l.extent / 2) continue;
    v = l.component == PlaqueComponent::Calcified ? spec.intensity.calcified : spec.intensity.lipid;
  }
  return v;
}

}  // namespace

TEST_CASE("generation is deterministic per (spec, patient)") {
  const PhantomSpec spec;
  const Patient a = generate_patient(spec, 3), b = generate_patient(spec, 3);
  CHECK(std::equal(a.volume.data().begin(), a.volume.data().end(), b.volume.data().begin()));
  CHECK(std::equal(a.wall.data().begin(), a.wall.data().end(), b.wall.data().begin()));
  REQUIRE(a.lesions.size() == b.lesions.size());
  for (std::size_t i = 0; i < a.lesions.size(); ++i) {
    CHECK(a.lesions[i].stenosis_degree == b.lesions[i].stenosis_degree);
    CHECK(a.lesions[i].start_index == b.lesions[i].start_index);
    CHECK(a.lesions[i].revascularize == b.lesions[i].revascularize);
  }
  const Patient c = generate_patient(spec, 4);
  CHECK_FALSE(std::equal(a.volume.data().begin(), a.volume.data().end(), c.volume.data().begin()));
}

TEST_CASE("a vessel without lesions keeps the reference radius") {
  PhantomSpec spec = quiet_spec();
  spec.lesions_min = spec.lesions_max = 0;
  const Patient p = generate_patient(spec, 0);
  CHECK(p.lesions.empty());
  for (double s = 0; s <= spec.path_length; s += 0.5) CHECK(lumen_radius(spec, p.lesions, s) == spec.r_ref);
  const LesionRecord probe = make_lesion(20.0, 8.0, 0.0, PlaqueComponent::Calcified);
  CHECK(lesion_stenosis_degree(spec, p.lesions, probe) == 0.0);
  CHECK(p.lumen.count() > 0);
}

TEST_CASE("an isolated 0.6 narrowing gives degree 0.6 and a high-stenosis label") {
  const PhantomSpec spec;
  const std::vector<LesionRecord> ls{make_lesion(25.0, 8.0, 0.6, PlaqueComponent::Lipid)};
  const double degree = lesion_stenosis_degree(spec, ls, ls[0]);
  CHECK(degree == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(stenosis_binary_label(degree) == 1);
  // Half-width at half-depth of the bump: sigma * sqrt(2 ln 2), sigma = extent / 4.
  const double hw = 2.0 * std::sqrt(2 * std::log(2.0));
  CHECK(lumen_radius(spec, ls, 25.0 + hw) == doctest::Approx(spec.r_ref * 0.7).epsilon(1e-12));
}

TEST_CASE("branch decision rule") {
  DecisionRule rule;
  rule.label_noise = 0.0;
  Rng rng(1);
  const std::vector<LesionRecord> mild{make_lesion(0, 1, 0, PlaqueComponent::Calcified, 0.2),
                                       make_lesion(0, 1, 0, PlaqueComponent::Calcified, 0.3)};
  CHECK_FALSE(assign_branch_revascularization(mild, rule, rng));
  const std::vector<LesionRecord> severe{make_lesion(0, 1, 0, PlaqueComponent::Calcified, 0.7)};
  CHECK(assign_branch_revascularization(severe, rule, rng));
  CHECK(assign_branch_revascularization(severe, rule, rng));
  const std::vector<LesionRecord> moderate_lipid{make_lesion(0, 1, 0, PlaqueComponent::Mixed, 0.4)};
  CHECK(assign_branch_revascularization(moderate_lipid, rule, rng));
  const std::vector<LesionRecord> moderate_calc{make_lesion(0, 1, 0, PlaqueComponent::Calcified, 0.4)};
  CHECK_FALSE(assign_branch_revascularization(moderate_calc, rule, rng));
  rule.label_noise = 1.0;
  CHECK_FALSE(assign_branch_revascularization(severe, rule, rng));
  CHECK_THROWS(assign_branch_revascularization({}, rule, rng));
}

TEST_CASE("records satisfy their invariants and labels follow the rules") {
  const PhantomSpec spec;
  for (int id = 0; id < 8; ++id) {
    const Patient p = generate_patient(spec, id);
    REQUIRE(p.lesions.size() >= 2);
    REQUIRE(p.lesions.size() <= 5);
    int positives = 0;
    std::vector<double> degrees;
    for (const auto& l : p.lesions) {
      CHECK(l.start_index < l.end_index);
      CHECK(l.end_index < static_cast<int>(p.centerline.size()));
      CHECK(l.stenosis_degree >= 0.0);
      CHECK(l.stenosis_degree < 1.0);
      CHECK(l.high_stenosis == (l.stenosis_degree > 0.5 ? 1 : 0));
      positives += l.revascularize;
      degrees.push_back(l.stenosis_degree);
    }
    CHECK(positives == (p.branch_positive ? 1 : 0));
    CHECK(propagate_revascularization(p.branch_positive, degrees) ==
          [&] {
            std::vector<int> v;
            for (const auto& l : p.lesions) v.push_back(l.revascularize);
            return v;
          }());
    CHECK(p.wall.count() > 0);
    for (std::size_t i = 0; i < p.wall.size(); ++i) CHECK_FALSE((p.wall.data()[i] && p.lumen.data()[i]));
  }
}

TEST_CASE("measured half-max lumen radius matches the analytic profile") {
  const PhantomSpec spec = quiet_spec();
  const Patient p = generate_patient(spec, 1);
  const FrameSet frames = rotation_minimizing_frames(p.centerline);
  const double margin = spec.end_margin;
  int probes = 0;
  for (std::size_t i = 0; i < p.centerline.size(); i += 3) {
    const double s = p.centerline.step * static_cast<double>(i);
    if (s < margin || s > spec.path_length - margin) continue;
    const double r = lumen_radius(spec, p.lesions, s);
    const double half = 0.5 * (spec.intensity.lumen + inner_wall_value(spec, p, s));
    for (const Vec3& dir : {frames[i].u, frames[i].v, Vec3(-frames[i].u)}) {
      // March outward until the profile passes the half level, then refine.
      const double h = 0.01;
      double prev = *sample_trilinear(p.volume, p.centerline.points[i]);
      const bool rising = half > prev;
      double crossing = -1;
      for (double d = h; d < spec.r_ref + spec.wall_thickness; d += h) {
        const double v = *sample_trilinear(p.volume, p.centerline.points[i] + d * dir);
        if ((v - half) * (prev - half) <= 0 && (rising ? v >= half : v <= half)) {
          crossing = d - h + h * (half - prev) / (v - prev);
          break;
        }
        prev = v;
      }
      REQUIRE(crossing > 0);
      CHECK(std::abs(crossing - r) <= spec.spacing);
      ++probes;
    }
  }
  CHECK(probes > 30);
}

TEST_CASE("default cohort prevalence lies in the target band") {
  const PhantomSpec spec;
  std::vector<int> sten, rev;
  for (int id = 0; id < spec.patients; ++id)
    for (const auto& l : generate_patient(spec, id).lesions) {
      sten.push_back(l.high_stenosis);
      rev.push_back(l.revascularize);
    }
  MESSAGE("lesions " << sten.size() << " stenosis " << prevalence(sten) << " revasc " << prevalence(rev));
  CHECK(prevalence(sten) >= 0.15);
  CHECK(prevalence(sten) <= 0.40);
  CHECK(prevalence(rev) >= 0.15);
  CHECK(prevalence(rev) <= 0.40);
}

TEST_CASE("invalid specs are rejected") {
  PhantomSpec s;
  s.severe_max = 1.0;
  CHECK_THROWS(generate_patient(s, 0));
  s = PhantomSpec{};
  s.extent_min = 0;
  CHECK_THROWS(s.validate());
  s = PhantomSpec{};
  s.dims = {20, 20, 20};
  CHECK_THROWS(generate_patient(s, 0));
  CHECK(component_from_string(to_string(PlaqueComponent::Mixed)) == PlaqueComponent::Mixed);
}
