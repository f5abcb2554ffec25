#include "plaque/radiomics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace plaque::radiomics {

void DiscretizationSpec::validate() const {
  if (mode == Mode::FixedWidth && !(width > 0))
    throw std::invalid_argument("discretization: bin width must be positive");
  if (mode == Mode::FixedCount && count < 2)
    throw std::invalid_argument("discretization: bin count must be >= 2");
}

std::vector<std::string> FeatureVector::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.full_name());
  return out;
}

std::vector<double> FeatureVector::values() const {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.value);
  return out;
}

// ---------------------------------------------------------------- transforms

namespace {

int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

// 1D convolution along `axis` with a symmetric kernel of radius (size-1)/2.
Volume convolve_axis(const Volume& in, int axis, const std::vector<double>& kernel) {
  const Dims d = in.dims();
  const int n[3] = {d.nx, d.ny, d.nz};
  const int radius = static_cast<int>(kernel.size() / 2);
  Volume out(in.grid(), 0.0);
  std::vector<double> line(n[axis]);
  int idx[3];
  const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  for (int u = 0; u < n[a1]; ++u)
    for (int w = 0; w < n[a2]; ++w) {
      idx[a1] = u;
      idx[a2] = w;
      for (int t = 0; t < n[axis]; ++t) {
        idx[axis] = t;
        line[t] = in.at(idx[0], idx[1], idx[2]);
      }
      for (int t = 0; t < n[axis]; ++t) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * line[reflect(t + k, n[axis])];
        idx[axis] = t;
        out.at(idx[0], idx[1], idx[2]) = s;
      }
    }
  return out;
}

}  // namespace

Volume log_transform(const Volume& vol, double sigma_mm) {
  if (!(sigma_mm > 0)) throw std::invalid_argument("LoG sigma must be positive");
  const Dims d = vol.dims();
  const int n[3] = {d.nx, d.ny, d.nz};
  std::array<std::vector<double>, 3> gauss, second;
  const double s2 = sigma_mm * sigma_mm;
  for (int a = 0; a < 3; ++a) {
    const double h = vol.spacing()[a];
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_mm / h));
    if (radius > n[a])
      throw std::invalid_argument("LoG kernel exceeds the volume extent; sigma too large");
    std::vector<double> g(2 * radius + 1), g2(2 * radius + 1);
    double sum = 0;
    for (int k = -radius; k <= radius; ++k) {
      const double x = k * h;
      g[k + radius] = std::exp(-x * x / (2 * s2));
      sum += g[k + radius];
    }
    double mean2 = 0;
    for (int k = -radius; k <= radius; ++k) {
      const double x = k * h;
      g[k + radius] /= sum;
      g2[k + radius] = (x * x / (s2 * s2) - 1.0 / s2) * g[k + radius];
      mean2 += g2[k + radius];
    }
    mean2 /= static_cast<double>(g2.size());
    for (double& v : g2) v -= mean2;
    gauss[a] = std::move(g);
    second[a] = std::move(g2);
  }

  Volume out(vol.grid(), 0.0);
  for (int a = 0; a < 3; ++a) {
    Volume t = vol;
    for (int b = 0; b < 3; ++b) t = convolve_axis(t, b, b == a ? second[b] : gauss[b]);
    auto o = out.data();
    auto src = t.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += s2 * src[i];
  }
  return out;
}

const std::array<std::string, 8>& haar_band_names() {
  static const std::array<std::string, 8> names = {"LLL", "LLH", "LHL", "LHH",
                                                   "HLL", "HLH", "HHL", "HHH"};
  return names;
}

namespace {

Grid half_grid(const Grid& g) {
  Grid h;
  h.dims = {(g.dims.nx + 1) / 2, (g.dims.ny + 1) / 2, (g.dims.nz + 1) / 2};
  h.spacing = 2.0 * g.spacing;
  h.origin = g.origin + 0.5 * g.spacing;
  return h;
}

// Edge-replicated read.
double clamped(const Volume& v, int i, int j, int k) {
  const Dims& d = v.dims();
  return v.at(std::min(i, d.nx - 1), std::min(j, d.ny - 1), std::min(k, d.nz - 1));
}

}  // namespace

std::array<Volume, 8> haar_wavelet_3d(const Volume& vol) {
  const Grid hg = half_grid(vol.grid());
  std::array<Volume, 8> bands;
  for (auto& b : bands) b = Volume(hg, 0.0);
  for (int k = 0; k < hg.dims.nz; ++k)
    for (int j = 0; j < hg.dims.ny; ++j)
      for (int i = 0; i < hg.dims.nx; ++i) {
        double c[2][2][2];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e) c[a][b][e] = clamped(vol, 2 * i + a, 2 * j + b, 2 * k + e);
        for (int band = 0; band < 8; ++band) {
          const int fx = (band >> 2) & 1, fy = (band >> 1) & 1, fz = band & 1;
          double s = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int e = 0; e < 2; ++e) {
                const double wx = (fx && a) ? -0.5 : 0.5;
                const double wy = (fy && b) ? -0.5 : 0.5;
                const double wz = (fz && e) ? -0.5 : 0.5;
                s += wx * wy * wz * c[a][b][e];
              }
          bands[band].at(i, j, k) = s;
        }
      }
  return bands;
}

Volume haar_inverse_3d(const std::array<Volume, 8>& bands, const Grid& original) {
  Volume out(original, 0.0);
  const Dims& hd = bands[0].dims();
  for (int k = 0; k < hd.nz; ++k)
    for (int j = 0; j < hd.ny; ++j)
      for (int i = 0; i < hd.nx; ++i)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e) {
              const int x = 2 * i + a, y = 2 * j + b, z = 2 * k + e;
              if (x >= original.dims.nx || y >= original.dims.ny || z >= original.dims.nz) continue;
              double s = 0;
              for (int band = 0; band < 8; ++band) {
                const int fx = (band >> 2) & 1, fy = (band >> 1) & 1, fz = band & 1;
                const double sign = ((fx && a) ? -1 : 1) * ((fy && b) ? -1 : 1) * ((fz && e) ? -1 : 1);
                s += sign * bands[band].at(i, j, k);
              }
              out.at(x, y, z) = s;
            }
  return out;
}

Mask haar_downsample_mask(const Mask& mask) {
  const Grid hg = half_grid(mask.grid());
  auto build = [&](int need) {
    Mask out(hg, 0);
    const Dims& d = mask.dims();
    for (int k = 0; k < hg.dims.nz; ++k)
      for (int j = 0; j < hg.dims.ny; ++j)
        for (int i = 0; i < hg.dims.nx; ++i) {
          int set = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int e = 0; e < 2; ++e)
                set += mask.at(std::min(2 * i + a, d.nx - 1), std::min(2 * j + b, d.ny - 1),
                               std::min(2 * k + e, d.nz - 1));
          if (set >= need) out.at(i, j, k) = 1;
        }
    return out;
  };
  Mask half = build(4);
  if (half.count() == 0) half = build(1);
  return half;
}

// ------------------------------------------------------------- discretization

namespace {

std::vector<double> masked_values(const Volume& vol, const Mask& mask) {
  if (!vol.grid().same_geometry(mask.grid()))
    throw std::invalid_argument("volume and mask grids differ");
  std::vector<double> v;
  auto src = vol.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    if (m[i]) v.push_back(src[i]);
  if (v.empty()) throw std::invalid_argument("empty mask");
  return v;
}

}  // namespace

LevelMap discretize(const Volume& vol, const Mask& mask, const DiscretizationSpec& spec) {
  spec.validate();
  const auto values = masked_values(vol, mask);
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it, mx = *mx_it;

  LevelMap out;
  out.dims = vol.dims();
  out.level.assign(vol.size(), 0);
  auto src = vol.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!m[i]) continue;
    int lvl;
    if (spec.mode == DiscretizationSpec::Mode::FixedWidth) {
      lvl = static_cast<int>(std::floor((src[i] - mn) / spec.width)) + 1;
    } else if (mx > mn) {
      lvl = static_cast<int>(std::floor((src[i] - mn) / (mx - mn) * spec.count)) + 1;
      lvl = std::min(lvl, spec.count);
    } else {
      lvl = 1;
    }
    out.level[i] = lvl;
    out.levels = std::max(out.levels, lvl);
  }
  return out;
}

// ---------------------------------------------------------------- first order

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Feature make(const char* cls, const char* name, double v) {
  return Feature{"", cls, name, std::isfinite(v) ? v : 0.0};
}

}  // namespace

std::vector<Feature> first_order_features(const Volume& vol, const Mask& mask,
                                          const DiscretizationSpec& spec) {
  auto x = masked_values(vol, mask);
  const double n = static_cast<double>(x.size());
  std::sort(x.begin(), x.end());

  double sum = 0, energy = 0;
  for (double v : x) {
    sum += v;
    energy += v * v;
  }
  const double mean = sum / n;
  double m2 = 0, m3 = 0, m4 = 0, mad = 0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    mad += std::abs(d);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mad /= n;
  const double skew = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 0 ? m4 / (m2 * m2) : 0.0;

  const double p10 = percentile(x, 0.10), p90 = percentile(x, 0.90);
  const double p25 = percentile(x, 0.25), p75 = percentile(x, 0.75);
  double rsum = 0;
  int rn = 0;
  for (double v : x)
    if (v >= p10 && v <= p90) {
      rsum += v;
      ++rn;
    }
  const double rmean = rn ? rsum / rn : mean;
  double rmad = 0;
  for (double v : x)
    if (v >= p10 && v <= p90) rmad += std::abs(v - rmean);
  rmad = rn ? rmad / rn : 0.0;

  const LevelMap lm = discretize(vol, mask, spec);
  std::vector<double> hist(lm.levels + 1, 0.0);
  for (int l : lm.level)
    if (l) hist[l] += 1;
  double entropy = 0, uniformity = 0;
  for (double c : hist) {
    if (c == 0) continue;
    const double p = c / n;
    entropy -= p * std::log2(p);
    uniformity += p * p;
  }
  const Vec3& sp = vol.spacing();
  const double voxel_volume = sp.x() * sp.y() * sp.z();

  const char* cls = "firstorder";
  return {make(cls, "Mean", mean),
          make(cls, "Median", percentile(x, 0.5)),
          make(cls, "Minimum", x.front()),
          make(cls, "Maximum", x.back()),
          make(cls, "Range", x.back() - x.front()),
          make(cls, "Variance", m2),
          make(cls, "Skewness", skew),
          make(cls, "Kurtosis", kurt),
          make(cls, "Energy", energy),
          make(cls, "RootMeanSquared", std::sqrt(energy / n)),
          make(cls, "MeanAbsoluteDeviation", mad),
          make(cls, "RobustMeanAbsoluteDeviation", rmad),
          make(cls, "10Percentile", p10),
          make(cls, "90Percentile", p90),
          make(cls, "InterquartileRange", p75 - p25),
          make(cls, "Entropy", entropy),
          make(cls, "Uniformity", uniformity),
          make(cls, "TotalEnergy", energy * voxel_volume)};
}

// ---------------------------------------------------------------------- shape

namespace {

Mask largest_component(const Mask& mask, bool& reduced) {
  const Dims& d = mask.dims();
  std::vector<int> label(mask.size(), 0);
  int next = 0, best = 0;
  std::size_t best_size = 0;
  std::deque<std::array<int, 3>> queue;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t idx = mask.grid().index(i, j, k);
        if (!mask.data()[idx] || label[idx]) continue;
        ++next;
        std::size_t size = 0;
        label[idx] = next;
        queue.push_back({i, j, k});
        while (!queue.empty()) {
          const auto [x, y, z] = queue.front();
          queue.pop_front();
          ++size;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int a = x + dx, b = y + dy, c = z + dz;
                if (a < 0 || b < 0 || c < 0 || a >= d.nx || b >= d.ny || c >= d.nz) continue;
                const std::size_t n = mask.grid().index(a, b, c);
                if (mask.data()[n] && !label[n]) {
                  label[n] = next;
                  queue.push_back({a, b, c});
                }
              }
        }
        if (size > best_size) {
          best_size = size;
          best = next;
        }
      }
  reduced = next > 1;
  if (!reduced) return mask;
  Mask out(mask.grid(), 0);
  for (std::size_t i = 0; i < label.size(); ++i) out.data()[i] = label[i] == best ? 1 : 0;
  return out;
}

}  // namespace

ShapeResult shape_features(const Mask& input) {
  if (input.count() == 0) throw std::invalid_argument("empty mask");
  ShapeResult result;
  const Mask mask = largest_component(input, result.took_largest_component);
  if (result.took_largest_component)
    std::clog << "radiomics: mask is not connected; using the largest component\n";

  const Dims& d = mask.dims();
  const Vec3& sp = mask.spacing();
  const double face_area[3] = {sp.y() * sp.z(), sp.x() * sp.z(), sp.x() * sp.y()};
  auto inside = [&](int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < d.nx && j < d.ny && k < d.nz && mask.at(i, j, k);
  };

  std::size_t count = 0;
  double area = 0;
  Vec3 mean = Vec3::Zero();
  std::vector<Vec3> points, surface;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        if (!mask.at(i, j, k)) continue;
        ++count;
        const Vec3 p(i * sp.x(), j * sp.y(), k * sp.z());
        points.push_back(p);
        mean += p;
        int exposed = 0;
        const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (int f = 0; f < 6; ++f)
          if (!inside(i + off[f][0], j + off[f][1], k + off[f][2])) {
            ++exposed;
            area += face_area[f / 2];
          }
        if (exposed) surface.push_back(p);
      }
  mean /= static_cast<double>(count);
  const double volume = static_cast<double>(count) * sp.x() * sp.y() * sp.z();

  double diameter2 = 0;
  for (std::size_t a = 0; a < surface.size(); ++a)
    for (std::size_t b = a + 1; b < surface.size(); ++b)
      diameter2 = std::max(diameter2, (surface[a] - surface[b]).squaredNorm());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(count);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Vec3 ev = es.eigenvalues().cwiseMax(0.0);  // ascending
  const double l1 = ev[2], l2 = ev[1], l3 = ev[0];

  const double sphericity =
      std::cbrt(std::numbers::pi) * std::pow(6.0 * volume, 2.0 / 3.0) / area;
  const char* cls = "shape";
  result.features = {make(cls, "VoxelVolume", volume),
                     make(cls, "SurfaceArea", area),
                     make(cls, "SurfaceVolumeRatio", area / volume),
                     make(cls, "Sphericity", sphericity),
                     make(cls, "Maximum3DDiameter", std::sqrt(diameter2)),
                     make(cls, "MajorAxisLength", 4.0 * std::sqrt(l1)),
                     make(cls, "MinorAxisLength", 4.0 * std::sqrt(l2)),
                     make(cls, "LeastAxisLength", 4.0 * std::sqrt(l3)),
                     make(cls, "Elongation", l1 > 0 ? std::sqrt(l2 / l1) : 0.0),
                     make(cls, "Flatness", l1 > 0 ? std::sqrt(l3 / l1) : 0.0)};
  return result;
}

// -------------------------------------------------------------------- texture

const std::array<std::array<int, 3>, 13>& directions() {
  static const std::array<std::array<int, 3>, 13> dirs = {{{1, 0, 0},
                                                           {0, 1, 0},
                                                           {0, 0, 1},
                                                           {1, 1, 0},
                                                           {1, -1, 0},
                                                           {1, 0, 1},
                                                           {1, 0, -1},
                                                           {0, 1, 1},
                                                           {0, 1, -1},
                                                           {1, 1, 1},
                                                           {1, 1, -1},
                                                           {1, -1, 1},
                                                           {1, -1, -1}}};
  return dirs;
}

namespace {

bool in_grid(const Dims& d, int i, int j, int k) {
  return i >= 0 && j >= 0 && k >= 0 && i < d.nx && j < d.ny && k < d.nz;
}

std::vector<int> resolve_use(std::vector<int> use) {
  if (use.empty())
    for (int i = 0; i < 13; ++i) use.push_back(i);
  for (int u : use)
    if (u < 0 || u >= 13) throw std::invalid_argument("direction index out of range");
  return use;
}

}  // namespace

std::vector<Eigen::MatrixXd> glcm_matrices(const LevelMap& lm) {
  const int ng = std::max(lm.levels, 1);
  std::vector<Eigen::MatrixXd> out;
  const Dims& d = lm.dims;
  for (const auto& dir : directions()) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(ng, ng);
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const int a = lm.at(i, j, k);
          if (!a) continue;
          const int x = i + dir[0], y = j + dir[1], z = k + dir[2];
          if (!in_grid(d, x, y, z)) continue;
          const int b = lm.at(x, y, z);
          if (!b) continue;
          p(a - 1, b - 1) += 1;
          p(b - 1, a - 1) += 1;
        }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Feature> glcm_features(const LevelMap& lm, std::vector<int> use) {
  use = resolve_use(std::move(use));
  const auto mats = glcm_matrices(lm);
  double max_pairs = 0;
  for (int u : use) max_pairs = std::max(max_pairs, mats[u].sum() / 2);
  if (max_pairs < 2) throw std::invalid_argument("GLCM: fewer than 2 voxel pairs in every direction");

  constexpr int kCount = 12;
  std::array<double, kCount> acc{};
  int used = 0;
  for (int u : use) {
    const double total = mats[u].sum();
    if (total == 0) continue;
    const Eigen::MatrixXd p = mats[u] / total;
    const int ng = static_cast<int>(p.rows());
    Eigen::VectorXd px = p.rowwise().sum(), py = p.colwise().sum().transpose();
    double mux = 0, muy = 0;
    for (int i = 0; i < ng; ++i) {
      mux += (i + 1) * px[i];
      muy += (i + 1) * py[i];
    }
    double sx = 0, sy = 0;
    for (int i = 0; i < ng; ++i) {
      sx += (i + 1 - mux) * (i + 1 - mux) * px[i];
      sy += (i + 1 - muy) * (i + 1 - muy) * py[i];
    }
    sx = std::sqrt(sx);
    sy = std::sqrt(sy);
    std::vector<double> pdiff(ng, 0.0);
    double contrast = 0, dissim = 0, energy = 0, entropy = 0, idm = 0, auto_corr = 0, shade = 0,
           prominence = 0, pmax = 0;
    for (int i = 0; i < ng; ++i)
      for (int j = 0; j < ng; ++j) {
        const double v = p(i, j);
        if (v == 0) continue;
        const double a = i + 1, b = j + 1;
        const double diff = a - b;
        contrast += diff * diff * v;
        dissim += std::abs(diff) * v;
        energy += v * v;
        entropy -= v * std::log2(v);
        idm += v / (1 + diff * diff);
        auto_corr += a * b * v;
        const double c = a + b - mux - muy;
        shade += c * c * c * v;
        prominence += c * c * c * c * v;
        pmax = std::max(pmax, v);
        pdiff[std::abs(i - j)] += v;
      }
    const double corr = (sx * sy > 0) ? (auto_corr - mux * muy) / (sx * sy) : 1.0;
    double diff_entropy = 0;
    for (double v : pdiff)
      if (v > 0) diff_entropy -= v * std::log2(v);
    const std::array<double, kCount> f = {contrast, dissim,    energy,     entropy,
                                          idm,      corr,      shade,      prominence,
                                          pmax,     auto_corr, mux + muy,  diff_entropy};
    for (int i = 0; i < kCount; ++i) acc[i] += f[i];
    ++used;
  }
  static const char* names[kCount] = {"Contrast",         "Dissimilarity",     "JointEnergy",
                                      "JointEntropy",     "Idm",               "Correlation",
                                      "ClusterShade",     "ClusterProminence", "MaximumProbability",
                                      "Autocorrelation",  "SumAverage",        "DifferenceEntropy"};
  std::vector<Feature> out;
  for (int i = 0; i < kCount; ++i) out.push_back(make("glcm", names[i], acc[i] / used));
  return out;
}

std::vector<Eigen::MatrixXd> glrlm_matrices(const LevelMap& lm) {
  const int ng = std::max(lm.levels, 1);
  const Dims& d = lm.dims;
  const int max_run = std::max({d.nx, d.ny, d.nz});
  std::vector<Eigen::MatrixXd> out;
  for (const auto& dir : directions()) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(ng, max_run);
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const int a = lm.at(i, j, k);
          if (!a) continue;
          // Only run starts: predecessor missing or different.
          const int pi = i - dir[0], pj = j - dir[1], pk = k - dir[2];
          if (in_grid(d, pi, pj, pk) && lm.at(pi, pj, pk) == a) continue;
          int len = 1;
          int x = i + dir[0], y = j + dir[1], z = k + dir[2];
          while (in_grid(d, x, y, z) && lm.at(x, y, z) == a) {
            ++len;
            x += dir[0];
            y += dir[1];
            z += dir[2];
          }
          r(a - 1, len - 1) += 1;
        }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Feature> glrlm_features(const LevelMap& lm, std::vector<int> use) {
  use = resolve_use(std::move(use));
  std::size_t n_voxels = 0;
  for (int l : lm.level)
    if (l) ++n_voxels;
  if (n_voxels == 0) throw std::invalid_argument("GLRLM: empty mask");
  const auto mats = glrlm_matrices(lm);

  constexpr int kCount = 11;
  std::array<double, kCount> acc{};
  int used = 0;
  for (int u : use) {
    const Eigen::MatrixXd& r = mats[u];
    const double nr = r.sum();
    if (nr == 0) continue;
    double sre = 0, lre = 0, lglre = 0, hglre = 0, srlgle = 0, srhgle = 0, lrlgle = 0, lrhgle = 0;
    for (int i = 0; i < r.rows(); ++i)
      for (int j = 0; j < r.cols(); ++j) {
        const double v = r(i, j);
        if (v == 0) continue;
        const double g = i + 1, l = j + 1;
        const double g2 = g * g, l2 = l * l;
        sre += v / l2;
        lre += v * l2;
        lglre += v / g2;
        hglre += v * g2;
        srlgle += v / (g2 * l2);
        srhgle += v * g2 / l2;
        lrlgle += v * l2 / g2;
        lrhgle += v * g2 * l2;
      }
    const double gln = r.rowwise().sum().squaredNorm();
    const double rln = r.colwise().sum().squaredNorm();
    const std::array<double, kCount> f = {sre / nr,    lre / nr,    gln / nr,    rln / nr,
                                          nr / static_cast<double>(n_voxels),
                                          lglre / nr,  hglre / nr,  srlgle / nr, srhgle / nr,
                                          lrlgle / nr, lrhgle / nr};
    for (int i = 0; i < kCount; ++i) acc[i] += f[i];
    ++used;
  }
  static const char* names[kCount] = {"ShortRunEmphasis",
                                      "LongRunEmphasis",
                                      "GrayLevelNonUniformity",
                                      "RunLengthNonUniformity",
                                      "RunPercentage",
                                      "LowGrayLevelRunEmphasis",
                                      "HighGrayLevelRunEmphasis",
                                      "ShortRunLowGrayLevelEmphasis",
                                      "ShortRunHighGrayLevelEmphasis",
                                      "LongRunLowGrayLevelEmphasis",
                                      "LongRunHighGrayLevelEmphasis"};
  std::vector<Feature> out;
  for (int i = 0; i < kCount; ++i) out.push_back(make("glrlm", names[i], acc[i] / used));
  return out;
}

// ------------------------------------------------------------------ extraction

namespace {

std::string sigma_name(double s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << "log-sigma-" << s << "mm";
  std::string out = os.str();
  std::replace(out.begin(), out.end(), '.', '-');
  return out;
}

}  // namespace

std::vector<std::string> RadiomicsConfig::transform_names() const {
  std::vector<std::string> names;
  if (original) names.push_back("original");
  for (double s : log_sigmas) names.push_back(sigma_name(s));
  if (wavelet)
    for (int b = wavelet_lll ? 0 : 1; b < 8; ++b) names.push_back("wavelet-" + haar_band_names()[b]);
  return names;
}

std::size_t RadiomicsConfig::dimension() const {
  std::size_t per = (first_order ? 18 : 0) + (glcm ? 12 : 0) + (glrlm ? 11 : 0);
  return (shape ? 10 : 0) + per * transform_names().size();
}

void RadiomicsConfig::validate() const {
  discretization.validate();
  for (double s : log_sigmas)
    if (!(s > 0)) throw std::invalid_argument("LoG sigmas must be positive");
  if (!std::is_sorted(log_sigmas.begin(), log_sigmas.end()))
    throw std::invalid_argument("LoG sigmas must be ascending");
  if (dimension() == 0) throw std::invalid_argument("radiomics config enables no features");
}

FeatureVector extract_radiomics(const Volume& vol, const Mask& mask, const RadiomicsConfig& cfg) {
  cfg.validate();
  if (!vol.grid().same_geometry(mask.grid()))
    throw std::invalid_argument("volume and mask grids differ");
  if (mask.count() == 0) throw std::invalid_argument("empty mask");

  FeatureVector fv;
  auto append = [&](const std::string& transform, std::vector<Feature> fs) {
    for (auto& f : fs) {
      f.transform = transform;
      fv.features.push_back(std::move(f));
    }
  };
  if (cfg.shape) append("original", shape_features(mask).features);

  auto per_transform = [&](const std::string& name, const Volume& v, const Mask& m) {
    if (cfg.first_order) append(name, first_order_features(v, m, cfg.discretization));
    if (cfg.glcm || cfg.glrlm) {
      const LevelMap lm = discretize(v, m, cfg.discretization);
      if (cfg.glcm) append(name, glcm_features(lm));
      if (cfg.glrlm) append(name, glrlm_features(lm));
    }
  };
  const bool texture = cfg.first_order || cfg.glcm || cfg.glrlm;
  if (!texture) return fv;

  if (cfg.original) per_transform("original", vol, mask);
  for (double s : cfg.log_sigmas) per_transform(sigma_name(s), log_transform(vol, s), mask);
  if (cfg.wavelet) {
    const auto bands = haar_wavelet_3d(vol);
    const Mask half = haar_downsample_mask(mask);
    for (int b = cfg.wavelet_lll ? 0 : 1; b < 8; ++b)
      per_transform("wavelet-" + haar_band_names()[b], bands[b], half);
  }
  return fv;
}

std::vector<std::string> feature_names(const RadiomicsConfig& cfg) {
  std::vector<std::string> names;
  static const char* fo[18] = {"Mean",          "Median",
                               "Minimum",       "Maximum",
                               "Range",         "Variance",
                               "Skewness",      "Kurtosis",
                               "Energy",        "RootMeanSquared",
                               "MeanAbsoluteDeviation", "RobustMeanAbsoluteDeviation",
                               "10Percentile",  "90Percentile",
                               "InterquartileRange", "Entropy",
                               "Uniformity",    "TotalEnergy"};
  static const char* sh[10] = {"VoxelVolume",      "SurfaceArea",     "SurfaceVolumeRatio",
                               "Sphericity",       "Maximum3DDiameter", "MajorAxisLength",
                               "MinorAxisLength",  "LeastAxisLength", "Elongation",
                               "Flatness"};
  static const char* gl[12] = {"Contrast",        "Dissimilarity",     "JointEnergy",
                               "JointEntropy",    "Idm",               "Correlation",
                               "ClusterShade",    "ClusterProminence", "MaximumProbability",
                               "Autocorrelation", "SumAverage",        "DifferenceEntropy"};
  static const char* rl[11] = {"ShortRunEmphasis",
                               "LongRunEmphasis",
                               "GrayLevelNonUniformity",
                               "RunLengthNonUniformity",
                               "RunPercentage",
                               "LowGrayLevelRunEmphasis",
                               "HighGrayLevelRunEmphasis",
                               "ShortRunLowGrayLevelEmphasis",
                               "ShortRunHighGrayLevelEmphasis",
                               "LongRunLowGrayLevelEmphasis",
                               "LongRunHighGrayLevelEmphasis"};
  if (cfg.shape)
    for (const char* n : sh) names.push_back(std::string("original_shape_") + n);
  const bool texture = cfg.first_order || cfg.glcm || cfg.glrlm;
  if (!texture) return names;
  for (const auto& t : cfg.transform_names()) {
    if (cfg.first_order)
      for (const char* n : fo) names.push_back(t + "_firstorder_" + n);
    if (cfg.glcm)
      for (const char* n : gl) names.push_back(t + "_glcm_" + n);
    if (cfg.glrlm)
      for (const char* n : rl) names.push_back(t + "_glrlm_" + n);
  }
  return names;
}

}  // namespace plaque::radiomics
