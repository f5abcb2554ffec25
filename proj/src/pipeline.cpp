#include "plaque/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace plaque {

using nlohmann::json;

// ---- names ----------------------------------------------------------------

std::string to_string(Variant v) {
  switch (v) {
    case Variant::RadiomicsGbt: return "radiomics_gbt";
    case Variant::Rcnn2dPolar: return "rcnn2d_polar";
    case Variant::Rcnn3dBaseline: return "rcnn3d_baseline";
    case Variant::RadiomicsGru: return "radiomics_gru";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : all_variants())
    if (to_string(v) == s) return v;
  throw ConfigError("unknown approach '" + s + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::RadiomicsGbt, Variant::Rcnn2dPolar, Variant::Rcnn3dBaseline,
                                      Variant::RadiomicsGru};
  return v;
}

std::string to_string(Target t) { return t == Target::Stenosis50 ? "stenosis50" : "revascularization"; }

Target target_from_string(const std::string& s) {
  if (s == "stenosis50") return Target::Stenosis50;
  if (s == "revasc" || s == "revascularization") return Target::Revascularization;
  throw ConfigError("unknown target '" + s + "' (expected stenosis50 or revasc)");
}

int lesion_target(const LesionRecord& l, Target t) {
  return t == Target::Stenosis50 ? l.high_stenosis : l.revascularize;
}

// ---- configs --------------------------------------------------------------

void GeometryConfig::validate() const {
  if (slice_size < 3 || slice_size % 2 == 0) throw ConfigError("geometry: slice_size must be odd and >= 3");
  if (!(slice_spacing > 0)) throw ConfigError("geometry: slice_spacing must be positive");
  if (cube_length < 1) throw ConfigError("geometry: cube_length must be >= 1");
  if (cube_stride < 1 || cube_stride > cube_length) throw ConfigError("geometry: cube_stride must lie in [1, cube_length]");
  if (angles < 2 || radii < 2) throw ConfigError("geometry: angles and radii must be >= 2");
  if (!(r_max > 0) || r_max > (slice_size - 1) / 2.0 * slice_spacing + 1e-9)
    throw ConfigError("geometry: r_max must be positive and inside the slice");
  if (!(intensity_scale > 0)) throw ConfigError("geometry: intensity_scale must be positive");
}

void AugmentConfig::validate() const {
  if (!(max_translation >= 0)) throw ConfigError("augment: max_translation must be >= 0");
  if (!(noise_sigma >= 0)) throw ConfigError("augment: noise_sigma must be >= 0");
}

void ApproachConfig::validate() const {
  geometry.validate();
  augment.validate();
  try {
    switch (variant) {
      case Variant::RadiomicsGbt:
        radiomics.validate();
        boost.validate();
        break;
      default:
        architecture.validate();
        train.validate();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const GeometryConfig& c) {
  j = json{{"slice_size", c.slice_size},   {"slice_spacing", c.slice_spacing},
           {"cube_length", c.cube_length}, {"cube_stride", c.cube_stride},
           {"angles", c.angles},           {"radii", c.radii},
           {"r_max", c.r_max},             {"intensity_center", c.intensity_center},
           {"intensity_scale", c.intensity_scale}};
}

void from_json(const json& j, GeometryConfig& c) {
  check_keys(j, {"slice_size", "slice_spacing", "cube_length", "cube_stride", "angles", "radii", "r_max",
                 "intensity_center", "intensity_scale"},
             "geometry");
  read(j, "slice_size", c.slice_size);
  read(j, "slice_spacing", c.slice_spacing);
  read(j, "cube_length", c.cube_length);
  read(j, "cube_stride", c.cube_stride);
  read(j, "angles", c.angles);
  read(j, "radii", c.radii);
  read(j, "r_max", c.r_max);
  read(j, "intensity_center", c.intensity_center);
  read(j, "intensity_scale", c.intensity_scale);
}

void to_json(json& j, const AugmentConfig& c) {
  j = json{{"enabled", c.enabled},
           {"rotate", c.rotate},
           {"mirror", c.mirror},
           {"max_translation", c.max_translation},
           {"noise_sigma", c.noise_sigma}};
}

void from_json(const json& j, AugmentConfig& c) {
  check_keys(j, {"enabled", "rotate", "mirror", "max_translation", "noise_sigma"}, "augment");
  read(j, "enabled", c.enabled);
  read(j, "rotate", c.rotate);
  read(j, "mirror", c.mirror);
  read(j, "max_translation", c.max_translation);
  read(j, "noise_sigma", c.noise_sigma);
}

void to_json(json& j, const ApproachConfig& c) {
  j = json{{"variant", to_string(c.variant)}, {"geometry", c.geometry}, {"radiomics", c.radiomics},
           {"boost", c.boost},                 {"architecture", c.architecture}, {"train", c.train},
           {"augment", c.augment},             {"seed", c.seed}};
}

void from_json(const json& j, ApproachConfig& c) {
  check_keys(j, {"variant", "geometry", "radiomics", "boost", "architecture", "train", "augment", "seed"}, "approach");
  if (!j.contains("variant")) throw ConfigError("approach: missing 'variant'");
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  read(j, "geometry", c.geometry);
  read(j, "radiomics", c.radiomics);
  read(j, "boost", c.boost);
  if (j.contains("architecture")) {
    check_keys(j.at("architecture"),
               {"conv2d_channels", "fmp_ratio", "slice_features", "fused_features", "conv3d_channels",
                "cube_features", "mlp_widths", "gru_hidden", "gru_layers", "bidirectional"},
               "approach.architecture");
    c.architecture = j.at("architecture").get<nn::ArchitectureConfig>();
  }
  if (j.contains("train")) {
    check_keys(j.at("train"), {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_eps"}, "approach.train");
    c.train = j.at("train").get<nn::TrainConfig>();
  }
  read(j, "augment", c.augment);
  read(j, "seed", c.seed);
}

// ---- samples --------------------------------------------------------------

std::size_t LesionSample::sequence_length() const {
  switch (kind) {
    case PayloadKind::Features: return 1;
    case PayloadKind::PolarCubes: return polar.size();
    case PayloadKind::CartesianCubes: return cubes.size();
    case PayloadKind::FeatureSequence: return sequence.size();
  }
  return 0;
}

int sequence_feature_count() { return 11; }

namespace {

// Nearest centerline index for every wall voxel (-1 elsewhere).
std::vector<int> nearest_centerline_index(const Patient& p) {
  std::vector<int> nearest(p.wall.size(), -1);
  const Dims d = p.wall.dims();
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        if (!p.wall.at(i, j, k)) continue;
        const Vec3 w = p.wall.grid().world(i, j, k);
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t c = 0; c < p.centerline.size(); ++c) {
          const double dist = (p.centerline.points[c] - w).squaredNorm();
          if (dist < best) {
            best = dist;
            arg = static_cast<int>(c);
          }
        }
        nearest[p.wall.grid().index(i, j, k)] = arg;
      }
  return nearest;
}

Mask segment_mask_from(const Patient& p, const std::vector<int>& nearest, const LesionRecord& l) {
  Mask m(p.wall.grid());
  for (std::size_t v = 0; v < nearest.size(); ++v)
    if (nearest[v] >= l.start_index && nearest[v] <= l.end_index) m.data()[v] = 1;
  return m;
}

struct Box {
  int lo[3], hi[3];  // inclusive
};

Box crop_box(const Mask& m, int margin) {
  const Dims d = m.dims();
  Box b{{d.nx, d.ny, d.nz}, {-1, -1, -1}};
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i)
        if (m.at(i, j, k)) {
          const int idx[3] = {i, j, k};
          for (int a = 0; a < 3; ++a) {
            b.lo[a] = std::min(b.lo[a], idx[a]);
            b.hi[a] = std::max(b.hi[a], idx[a]);
          }
        }
  if (b.hi[0] < 0) throw std::runtime_error("empty segment mask");
  const int n[3] = {d.nx, d.ny, d.nz};
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = std::max(0, b.lo[a] - margin);
    b.hi[a] = std::min(n[a] - 1, b.hi[a] + margin);
  }
  return b;
}

Grid crop_grid(const Grid& g, const Box& b) {
  Grid out;
  out.dims = {b.hi[0] - b.lo[0] + 1, b.hi[1] - b.lo[1] + 1, b.hi[2] - b.lo[2] + 1};
  out.spacing = g.spacing;
  out.origin = g.world(b.lo[0], b.lo[1], b.lo[2]);
  return out;
}

Volume crop(const Volume& v, const Box& b) {
  Volume out(crop_grid(v.grid(), b));
  const Dims d = out.dims();
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) out.at(i, j, k) = v.at(i + b.lo[0], j + b.lo[1], k + b.lo[2]);
  return out;
}

Mask crop(const Mask& m, const Box& b) {
  Mask out(crop_grid(m.grid(), b));
  const Dims d = out.dims();
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) out.at(i, j, k) = m.at(i + b.lo[0], j + b.lo[1], k + b.lo[2]);
  return out;
}

MprStack lesion_stack(const Volume& vol, const Patient& p, const FrameSet& frames, const LesionRecord& l,
                      const GeometryConfig& geo, double pad) {
  Centerline sub;
  sub.step = p.centerline.step;
  FrameSet sub_frames;
  for (int i = l.start_index; i <= l.end_index; ++i) {
    sub.points.push_back(p.centerline.points[static_cast<std::size_t>(i)]);
    sub_frames.push_back(frames[static_cast<std::size_t>(i)]);
  }
  return extract_mpr_stack(vol, sub, sub_frames, geo.slice_size, geo.slice_spacing, pad);
}

std::vector<double> cube_shape_features(const Cube& mask_cube) {
  Grid g;
  g.dims = {mask_cube.size, mask_cube.size, mask_cube.length};
  g.spacing = Vec3(mask_cube.spacing, mask_cube.spacing, mask_cube.step);
  Mask m(g);
  for (int l = 0; l < mask_cube.length; ++l)
    for (int p = 0; p < mask_cube.size; ++p)
      for (int q = 0; q < mask_cube.size; ++q) m.at(p, q, l) = mask_cube.at(l, p, q) >= 0.5 ? 1 : 0;
  std::vector<double> out(static_cast<std::size_t>(sequence_feature_count()), 0.0);
  if (m.count() == 0) return out;
  const auto shape = radiomics::shape_features(m);
  for (std::size_t i = 0; i < shape.features.size() && i + 1 < out.size(); ++i) out[i] = shape.features[i].value;
  out.back() = 1.0;
  return out;
}

}  // namespace

Mask segment_wall_mask(const Patient& patient, const LesionRecord& lesion) {
  return segment_mask_from(patient, nearest_centerline_index(patient), lesion);
}

std::vector<LesionSample> prepare_patient(const Patient& patient, const ApproachConfig& cfg, Target target) {
  cfg.validate();
  const Volume eq = histogram_equalize(patient.volume);
  const GeometryConfig& geo = cfg.geometry;
  std::vector<LesionSample> out;
  std::vector<int> nearest;
  FrameSet frames;
  if (cfg.variant == Variant::RadiomicsGbt) nearest = nearest_centerline_index(patient);
  else frames = rotation_minimizing_frames(patient.centerline);
  std::unique_ptr<Volume> wall_volume;
  if (cfg.variant == Variant::RadiomicsGru) wall_volume = std::make_unique<Volume>(mask_as_volume(patient.wall));

  for (const auto& l : patient.lesions) {
    LesionSample s;
    s.patient_id = patient.id;
    s.segment_id = l.segment_id;
    s.target = lesion_target(l, target);
    switch (cfg.variant) {
      case Variant::RadiomicsGbt: {
        s.kind = PayloadKind::Features;
        const Mask seg = segment_mask_from(patient, nearest, l);
        double sigma_max = 0;
        for (double sg : cfg.radiomics.log_sigmas) sigma_max = std::max(sigma_max, sg);
        const double h = patient.volume.spacing().minCoeff();
        const int margin = 2 + static_cast<int>(std::ceil(4 * sigma_max / h));
        const Box box = crop_box(seg, margin);
        s.features = radiomics::extract_radiomics(crop(eq, box), crop(seg, box), cfg.radiomics).values();
        break;
      }
      case Variant::Rcnn2dPolar:
      case Variant::Rcnn3dBaseline: {
        const MprStack stack = lesion_stack(eq, patient, frames, l, geo, kMprPad);
        s.cubes = cut_cubes(stack, geo.cube_length, geo.cube_stride);
        if (cfg.variant == Variant::Rcnn2dPolar) {
          s.kind = PayloadKind::PolarCubes;
          for (const auto& c : s.cubes) s.polar.push_back(to_polar(c, geo.angles, geo.radii, geo.r_max));
        } else {
          s.kind = PayloadKind::CartesianCubes;
        }
        break;
      }
      case Variant::RadiomicsGru: {
        s.kind = PayloadKind::FeatureSequence;
        const MprStack stack = lesion_stack(*wall_volume, patient, frames, l, geo, 0.0);
        for (const auto& c : cut_cubes(stack, geo.cube_length, geo.cube_stride))
          s.sequence.push_back(cube_shape_features(c));
        break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---- augmentation ---------------------------------------------------------

PolarCube rotate_polar(const PolarCube& p, int steps) {
  PolarCube out = p;
  const int A = p.angles;
  const int k = ((steps % A) + A) % A;
  for (int l = 0; l < p.length; ++l)
    for (int a = 0; a < A; ++a)
      for (int r = 0; r < p.radii; ++r) out.at(l, (a + k) % A, r) = p.at(l, a, r);
  return out;
}

PolarCube mirror_polar(const PolarCube& p) {
  PolarCube out = p;
  const int A = p.angles;
  for (int l = 0; l < p.length; ++l)
    for (int a = 0; a < A; ++a)
      for (int r = 0; r < p.radii; ++r) out.at(l, (A - a) % A, r) = p.at(l, a, r);
  return out;
}

AugmentDraw draw_augmentation(const LesionSample& s, const AugmentConfig& cfg, int angles, Rng& rng) {
  AugmentDraw d;
  if (cfg.rotate) {
    if (s.kind == PayloadKind::PolarCubes) d.angle_steps = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(angles)));
    else d.radians = 2 * 3.141592653589793 * uniform01(rng);
  }
  if (cfg.mirror) d.mirror = uniform01(rng) < 0.5;
  if (cfg.max_translation > 0) {
    d.dp = (2 * uniform01(rng) - 1) * cfg.max_translation;
    d.dq = (2 * uniform01(rng) - 1) * cfg.max_translation;
  }
  return d;
}

LesionSample apply_augmentation(const LesionSample& s, const AugmentDraw& d, const AugmentConfig& cfg,
                                const GeometryConfig& geo, Rng& rng) {
  if (s.kind != PayloadKind::PolarCubes && s.kind != PayloadKind::CartesianCubes)
    throw std::invalid_argument("augment: only image payloads can be augmented");
  LesionSample out = s;
  const bool translate = d.dp != 0.0 || d.dq != 0.0;
  if (translate)
    for (auto& c : out.cubes) c = translate_cube(c, d.dp, d.dq);
  if (s.kind == PayloadKind::CartesianCubes) {
    for (auto& c : out.cubes) {
      if (d.radians != 0.0) c = rotate_cube(c, d.radians);
      if (d.mirror) c = mirror_cube(c);
      if (cfg.noise_sigma > 0)
        for (double& v : c.pixels) v += cfg.noise_sigma * normal01(rng);
    }
  } else {
    for (std::size_t i = 0; i < out.polar.size(); ++i) {
      PolarCube& p = out.polar[i];
      if (translate) p = to_polar(out.cubes[i], geo.angles, geo.radii, geo.r_max);
      if (d.angle_steps != 0) p = rotate_polar(p, d.angle_steps);
      if (d.mirror) p = mirror_polar(p);
      if (cfg.noise_sigma > 0)
        for (double& v : p.samples) v += cfg.noise_sigma * normal01(rng);
    }
  }
  return out;
}

LesionSample augment(const LesionSample& s, const AugmentConfig& cfg, const GeometryConfig& geo, Rng& rng) {
  if (s.kind != PayloadKind::PolarCubes && s.kind != PayloadKind::CartesianCubes)
    throw std::invalid_argument("augment: only image payloads can be augmented");
  const AugmentDraw d = draw_augmentation(s, cfg, geo.angles, rng);
  return apply_augmentation(s, d, cfg, geo, rng);
}

// ---- batching -------------------------------------------------------------

std::vector<std::vector<std::size_t>> balanced_batches(const std::vector<int>& labels, int batch, Rng& rng) {
  if (batch < 2) throw std::invalid_argument("balanced batches: batch size must be >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw std::invalid_argument("balanced batches: both classes are required");
  const bool pos_major = pos.size() >= neg.size();
  std::vector<std::size_t>& major = pos_major ? pos : neg;
  const std::vector<std::size_t>& minor = pos_major ? neg : pos;
  const int half_minor = batch / 2, half_major = batch - half_minor;
  const std::size_t count = (2 * major.size() + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch);

  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
  };
  shuffle(major);
  std::size_t cursor = 0;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < count; ++b) {
    std::vector<std::size_t> idx;
    for (int i = 0; i < half_major; ++i) {
      if (cursor == major.size()) {
        shuffle(major);
        cursor = 0;
      }
      idx.push_back(major[cursor++]);
    }
    for (int i = 0; i < half_minor; ++i) idx.push_back(minor[uniform_index(rng, minor.size())]);
    out.push_back(std::move(idx));
  }
  return out;
}

// ---- network input --------------------------------------------------------

Standardizer Standardizer::fit(const std::vector<LesionSample>& samples) {
  Standardizer st;
  const std::size_t F = static_cast<std::size_t>(sequence_feature_count());
  st.mean.assign(F, 0.0);
  st.scale.assign(F, 1.0);
  std::vector<double> sq(F, 0.0);
  std::size_t n = 0;
  for (const auto& s : samples)
    for (const auto& v : s.sequence) {
      for (std::size_t f = 0; f < F; ++f) {
        st.mean[f] += v[f];
        sq[f] += v[f] * v[f];
      }
      ++n;
    }
  if (n == 0) return st;
  for (std::size_t f = 0; f < F; ++f) {
    st.mean[f] /= static_cast<double>(n);
    const double var = sq[f] / static_cast<double>(n) - st.mean[f] * st.mean[f];
    st.scale[f] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return st;
}

std::vector<double> Standardizer::apply(const std::vector<double>& v) const {
  std::vector<double> out(v.size());
  for (std::size_t f = 0; f < v.size(); ++f) out[f] = (v[f] - mean[f]) / scale[f];
  return out;
}

std::vector<nn::Tensor> to_network_input(const LesionSample& s, const GeometryConfig& geo,
                                         const Standardizer* standardizer) {
  std::vector<nn::Tensor> out;
  auto norm = [&](double v) { return (v - geo.intensity_center) / geo.intensity_scale; };
  switch (s.kind) {
    case PayloadKind::PolarCubes:
      for (const auto& p : s.polar) {
        nn::Tensor t({p.length, p.angles, p.radii});
        std::transform(p.samples.begin(), p.samples.end(), t.data.begin(), norm);
        out.push_back(std::move(t));
      }
      break;
    case PayloadKind::CartesianCubes:
      for (const auto& c : s.cubes) {
        nn::Tensor t({c.length, c.size, c.size});
        std::transform(c.pixels.begin(), c.pixels.end(), t.data.begin(), norm);
        out.push_back(std::move(t));
      }
      break;
    case PayloadKind::FeatureSequence:
      for (const auto& v : s.sequence) {
        nn::Tensor t({static_cast<int>(v.size())});
        const std::vector<double> z = standardizer ? standardizer->apply(v) : v;
        t.data.assign(z.begin(), z.end());
        out.push_back(std::move(t));
      }
      break;
    case PayloadKind::Features:
      throw std::invalid_argument("network input: segment-level feature vectors go to the boosting variant");
  }
  return out;
}

// ---- approaches -----------------------------------------------------------

namespace {

PayloadKind expected_kind(Variant v) {
  switch (v) {
    case Variant::RadiomicsGbt: return PayloadKind::Features;
    case Variant::Rcnn2dPolar: return PayloadKind::PolarCubes;
    case Variant::Rcnn3dBaseline: return PayloadKind::CartesianCubes;
    case Variant::RadiomicsGru: return PayloadKind::FeatureSequence;
  }
  return PayloadKind::Features;
}

std::unique_ptr<nn::SequenceModel> make_model(const ApproachConfig& cfg, std::uint64_t seed) {
  const GeometryConfig& g = cfg.geometry;
  switch (cfg.variant) {
    case Variant::Rcnn2dPolar:
      return std::make_unique<nn::Rcnn2dPolar>(cfg.architecture, g.cube_length, g.angles, g.radii, seed);
    case Variant::Rcnn3dBaseline:
      return std::make_unique<nn::Rcnn3d>(cfg.architecture, g.cube_length, g.slice_size, seed);
    case Variant::RadiomicsGru:
      return std::make_unique<nn::RadiomicsGru>(cfg.architecture, sequence_feature_count(), seed);
    default:
      throw std::logic_error("make_model: not a network variant");
  }
}

Eigen::MatrixXd feature_matrix(const std::vector<const LesionSample*>& rows) {
  const Eigen::Index F = static_cast<Eigen::Index>(rows.front()->features.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), F);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i]->features.size()) != F)
      throw std::invalid_argument("run_approach: feature vectors differ in length");
    for (Eigen::Index f = 0; f < F; ++f) X(static_cast<Eigen::Index>(i), f) = rows[i]->features[static_cast<std::size_t>(f)];
  }
  return X;
}

}  // namespace

ApproachResult run_approach(const std::vector<LesionSample>& train, const std::vector<LesionSample>& val,
                            const std::vector<LesionSample>& test, const ApproachConfig& cfg) {
  cfg.validate();
  const PayloadKind kind = expected_kind(cfg.variant);
  for (const auto* set : {&train, &val, &test})
    for (const auto& s : *set)
      if (s.kind != kind) throw std::invalid_argument("run_approach: payload does not match " + to_string(cfg.variant));
  if (train.empty()) throw std::invalid_argument("run_approach: empty training set");

  ApproachResult result;
  if (test.empty()) return result;

  if (cfg.variant == Variant::RadiomicsGbt) {
    // No early stopping for boosting: the validation patients join training.
    std::vector<const LesionSample*> fit;
    std::vector<int> labels;
    for (const auto* set : {&train, &val})
      for (const auto& s : *set) {
        fit.push_back(&s);
        labels.push_back(s.target);
      }
    gbt::BoostConfig bc = cfg.boost;
    bc.seed = derive_seed(cfg.seed, "gbt");
    const gbt::TreeEnsemble model = gbt::train(feature_matrix(fit), labels, bc);
    std::vector<const LesionSample*> rows;
    for (const auto& s : test) rows.push_back(&s);
    result.scores = gbt::predict_proba(model, feature_matrix(rows));
    return result;
  }

  if (val.empty()) throw std::invalid_argument("run_approach: networks need a validation set");
  Standardizer st;
  const Standardizer* stp = nullptr;
  if (cfg.variant == Variant::RadiomicsGru) {
    st = Standardizer::fit(train);
    stp = &st;
  }
  auto examples = [&](const std::vector<LesionSample>& set) {
    std::vector<nn::SequenceExample> out;
    for (const auto& s : set) out.push_back({to_network_input(s, cfg.geometry, stp), s.target});
    return out;
  };
  const auto tr = examples(train), va = examples(val), te = examples(test);
  std::vector<int> labels;
  for (const auto& s : train) labels.push_back(s.target);

  nn::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "nn-train");
  nn::TrainHooks hooks;
  hooks.batches = [&](Rng& rng) { return balanced_batches(labels, tc.batch_size, rng); };
  const bool image = kind == PayloadKind::PolarCubes || kind == PayloadKind::CartesianCubes;
  if (image && cfg.augment.enabled)
    hooks.augment = [&](std::size_t i, Rng& rng) {
      return to_network_input(augment(train[i], cfg.augment, cfg.geometry, rng), cfg.geometry, stp);
    };
  auto model = make_model(cfg, derive_seed(cfg.seed, "nn-init"));
  result.training = nn::train_loop(*model, tr, va, tc, hooks);
  result.scores = nn::predict(*model, te);
  return result;
}

}  // namespace plaque
