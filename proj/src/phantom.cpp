#include "plaque/phantom.hpp"

#include "plaque/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace plaque {

std::string to_string(PlaqueComponent c) {
  switch (c) {
    case PlaqueComponent::Calcified: return "calcified";
    case PlaqueComponent::Lipid: return "lipid";
    case PlaqueComponent::Mixed: return "mixed";
  }
  return "calcified";
}

PlaqueComponent component_from_string(const std::string& s) {
  if (s == "calcified") return PlaqueComponent::Calcified;
  if (s == "lipid") return PlaqueComponent::Lipid;
  if (s == "mixed") return PlaqueComponent::Mixed;
  throw std::invalid_argument("unknown plaque component: " + s);
}

void PhantomSpec::validate() const {
  if (patients < 1) throw std::invalid_argument("phantom: patients must be >= 1");
  Grid{dims, Vec3::Constant(spacing), Vec3::Zero()}.validate();
  if (!(path_length > 0)) throw std::invalid_argument("phantom: path length must be positive");
  if (!(curvature_min >= 0 && curvature_min <= curvature_max))
    throw std::invalid_argument("phantom: invalid curvature range");
  if (!(r_ref > 0 && wall_thickness > 0)) throw std::invalid_argument("phantom: invalid radii");
  if (lesions_min < 0 || lesions_min > lesions_max)
    throw std::invalid_argument("phantom: invalid lesions-per-vessel range");
  if (!(extent_min > 0 && extent_min <= extent_max))
    throw std::invalid_argument("phantom: lesion extents must be positive");
  const double usable = path_length - 2 * end_margin;
  if (lesions_max > 0 && usable / lesions_max < extent_min)
    throw std::invalid_argument("phantom: lesions do not fit along the path");
  for (double f : {mild_min, mild_max, severe_min, severe_max})
    if (!(f >= 0 && f < 1)) throw std::invalid_argument("phantom: narrowing fraction must be in [0, 1)");
  if (mild_min > mild_max || severe_min > severe_max)
    throw std::invalid_argument("phantom: invalid narrowing range");
  if (!(severe_probability >= 0 && severe_probability <= 1))
    throw std::invalid_argument("phantom: severe probability outside [0, 1]");
  if (!(noise_sigma >= 0)) throw std::invalid_argument("phantom: noise sigma must be >= 0");
  if (!(centerline_step > 0)) throw std::invalid_argument("phantom: centerline step must be positive");
  if (!(rule.label_noise >= 0 && rule.label_noise <= 1))
    throw std::invalid_argument("phantom: label noise outside [0, 1]");
}

double lumen_radius(const PhantomSpec& spec, const std::vector<LesionRecord>& lesions, double s) {
  double narrowing = 0.0;
  for (const auto& l : lesions) {
    const double sigma = l.extent / 4.0;
    const double z = (s - l.center_arclength) / sigma;
    narrowing += l.narrowing * std::exp(-0.5 * z * z);
  }
  return spec.r_ref * (1.0 - narrowing);
}

double lesion_stenosis_degree(const PhantomSpec& spec, const std::vector<LesionRecord>& lesions,
                              const LesionRecord& lesion) {
  const double a = lesion.center_arclength - lesion.extent / 2;
  const double b = lesion.center_arclength + lesion.extent / 2;
  double r_min = lumen_radius(spec, lesions, lesion.center_arclength);
  const int n = static_cast<int>(std::ceil((b - a) / 0.01));
  for (int i = 0; i <= n; ++i) r_min = std::min(r_min, lumen_radius(spec, lesions, a + (b - a) * i / n));
  return std::clamp(1.0 - r_min / spec.r_ref, 0.0, 1.0);
}

std::uint64_t patient_seed(const PhantomSpec& spec, int patient_id) {
  return derive_seed(spec.master_seed, "patient", static_cast<std::uint64_t>(patient_id));
}

bool assign_branch_revascularization(const std::vector<LesionRecord>& branch,
                                     const DecisionRule& rule, Rng& rng) {
  if (branch.empty()) throw std::invalid_argument("branch without lesions");
  double max_degree = 0.0;
  bool lipid = false;
  for (const auto& l : branch) {
    max_degree = std::max(max_degree, l.stenosis_degree);
    lipid = lipid || l.component != PlaqueComponent::Calcified;
  }
  bool positive = max_degree > rule.severe_degree || (max_degree > rule.moderate_degree && lipid);
  // Always consume one draw so the stream does not depend on p.
  if (uniform01(rng) < rule.label_noise) positive = !positive;
  return positive;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double ramp(double x, double h) { return std::clamp(x / h + 0.5, 0.0, 1.0); }

}  // namespace

Patient generate_patient(const PhantomSpec& spec, int patient_id) {
  spec.validate();
  Rng rng(patient_seed(spec, patient_id));

  // Path: planar circular arc in the xy-plane plus an out-of-plane sinusoid.
  const double kappa = uniform(rng, spec.curvature_min, spec.curvature_max);
  const double bend = uniform01(rng) < 0.5 ? 1.0 : -1.0;
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  auto path = [&](double s) {
    const double x = kappa > 0 ? std::sin(kappa * s) / kappa : s;
    const double y = kappa > 0 ? bend * (1.0 - std::cos(kappa * s)) / kappa : 0.0;
    const double z =
        spec.out_of_plane * std::sin(2.0 * std::numbers::pi * s / spec.path_length + phase);
    return Vec3(x, y, z);
  };
  std::vector<Vec3> dense;
  const int n_dense = static_cast<int>(std::ceil(spec.path_length / 0.01));
  for (int i = 0; i <= n_dense; ++i) dense.push_back(path(spec.path_length * i / n_dense));

  // Center the path's bounding box in the grid.
  Vec3 lo = dense.front(), hi = dense.front();
  for (const auto& p : dense) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Grid grid{spec.dims, Vec3::Constant(spec.spacing), Vec3::Zero()};
  const Vec3 extent(spec.dims.nx - 1, spec.dims.ny - 1, spec.dims.nz - 1);
  const Vec3 world_extent = extent * spec.spacing;
  const Vec3 needed = (hi - lo) + Vec3::Constant(4.0 * spec.r_ref);
  if ((needed.array() > world_extent.array()).any())
    throw std::invalid_argument("phantom: volume too small for the vessel path plus margin");
  grid.origin = 0.5 * (lo + hi) - 0.5 * world_extent;

  const Centerline fine = resample_centerline(dense, 0.05);
  Patient pt;
  pt.id = patient_id;
  pt.centerline = resample_centerline(dense, spec.centerline_step);
  const double length = fine.step * static_cast<double>(fine.size() - 1);

  // Lesions in disjoint arclength slots.
  const int n_lesions = spec.lesions_min +
                        static_cast<int>(uniform_index(
                            rng, static_cast<std::size_t>(spec.lesions_max - spec.lesions_min + 1)));
  const double usable = length - 2 * spec.end_margin;
  for (int k = 0; k < n_lesions; ++k) {
    const double slot = usable / n_lesions;
    LesionRecord l;
    l.patient_id = patient_id;
    l.branch_id = 0;
    l.segment_id = k;
    l.extent = uniform(rng, spec.extent_min, std::min(spec.extent_max, slot));
    const double slack = (slot - l.extent) / 2;
    l.center_arclength = spec.end_margin + (k + 0.5) * slot + uniform(rng, -slack, slack);
    const bool severe = uniform01(rng) < spec.severe_probability;
    l.narrowing = severe ? uniform(rng, spec.severe_min, spec.severe_max)
                         : uniform(rng, spec.mild_min, spec.mild_max);
    l.component = static_cast<PlaqueComponent>(uniform_index(rng, 3));
    const double step = pt.centerline.step;
    const int last = static_cast<int>(pt.centerline.size()) - 1;
    l.start_index = std::clamp(
        static_cast<int>(std::ceil((l.center_arclength - l.extent / 2) / step - 1e-9)), 0, last);
    l.end_index = std::clamp(
        static_cast<int>(std::floor((l.center_arclength + l.extent / 2) / step + 1e-9)), 0, last);
    if (l.start_index >= l.end_index) throw std::logic_error("phantom: lesion shorter than one step");
    pt.lesions.push_back(l);
  }
  for (auto& l : pt.lesions) {
    l.stenosis_degree = lesion_stenosis_degree(spec, pt.lesions, l);
    l.high_stenosis = stenosis_binary_label(l.stenosis_degree);
  }
  if (!pt.lesions.empty()) {
    pt.branch_positive = assign_branch_revascularization(pt.lesions, spec.rule, rng);
    std::vector<double> degrees;
    for (const auto& l : pt.lesions) degrees.push_back(l.stenosis_degree);
    const auto labels = propagate_revascularization(pt.branch_positive, degrees);
    for (std::size_t i = 0; i < labels.size(); ++i) pt.lesions[i].revascularize = labels[i];
  }

  // Nearest fine centerline point per voxel, by splatting each point into
  // the voxels within reach.
  const double r_outer = spec.r_ref + spec.wall_thickness;
  const double reach = r_outer + 2.0 * spec.spacing;
  const std::size_t nvox = grid.dims.count();
  std::vector<double> dist(nvox, std::numeric_limits<double>::infinity());
  std::vector<int> nearest(nvox, -1);
  const int half = static_cast<int>(std::ceil(reach / spec.spacing));
  for (int j = 0; j < static_cast<int>(fine.size()); ++j) {
    const Vec3 c = grid.continuous_index(fine.points[j]);
    const int ci = static_cast<int>(std::lround(c.x()));
    const int cj = static_cast<int>(std::lround(c.y()));
    const int ck = static_cast<int>(std::lround(c.z()));
    for (int k = std::max(0, ck - half); k <= std::min(grid.dims.nz - 1, ck + half); ++k)
      for (int jj = std::max(0, cj - half); jj <= std::min(grid.dims.ny - 1, cj + half); ++jj)
        for (int i = std::max(0, ci - half); i <= std::min(grid.dims.nx - 1, ci + half); ++i) {
          const double d = (grid.world(i, jj, k) - fine.points[j]).norm();
          const std::size_t idx = grid.index(i, jj, k);
          if (d < dist[idx]) {
            dist[idx] = d;
            nearest[idx] = j;
          }
        }
  }

  const Intensities& in = spec.intensity;
  pt.volume = Volume(grid, in.background);
  pt.lumen = Mask(grid, 0);
  pt.wall = Mask(grid, 0);
  const int last_fine = static_cast<int>(fine.size()) - 1;
  const Vec3 t_first = (fine.points[1] - fine.points[0]).normalized();
  const Vec3 t_last = (fine.points[last_fine] - fine.points[last_fine - 1]).normalized();
  for (int k = 0; k < grid.dims.nz; ++k)
    for (int j = 0; j < grid.dims.ny; ++j)
      for (int i = 0; i < grid.dims.nx; ++i) {
        const std::size_t idx = grid.index(i, j, k);
        const int n = nearest[idx];
        if (n < 0) continue;
        const Vec3 w = grid.world(i, j, k);
        // Flat vessel ends: nothing beyond the end planes.
        if (n == 0 && (w - fine.points[0]).dot(t_first) < -fine.step) continue;
        if (n == last_fine && (w - fine.points[last_fine]).dot(t_last) > fine.step) continue;
        const double d = dist[idx];
        const double s = fine.step * n;
        const double r = lumen_radius(spec, pt.lesions, s);

        double wall_value = in.wall;
        for (const auto& l : pt.lesions) {
          if (std::abs(s - l.center_arclength) > l.extent / 2) continue;
          switch (l.component) {
            case PlaqueComponent::Calcified: wall_value = in.calcified; break;
            case PlaqueComponent::Lipid: wall_value = in.lipid; break;
            case PlaqueComponent::Mixed:
              wall_value = (d - r) / (r_outer - r) > 0.5 ? in.calcified : in.lipid;
              break;
          }
        }
        const double h = spec.spacing;
        pt.volume.at(i, j, k) = in.background + (wall_value - in.background) * ramp(r_outer - d, h) +
                                (in.lumen - wall_value) * ramp(r - d, h);
        if (d <= r) pt.lumen.at(i, j, k) = 1;
        else if (d <= r_outer) pt.wall.at(i, j, k) = 1;
      }

  if (spec.noise_sigma > 0) {
    Rng noise = make_rng(patient_seed(spec, patient_id), "noise");
    for (double& v : pt.volume.data()) v += spec.noise_sigma * normal01(noise);
  }
  return pt;
}

}  // namespace plaque
