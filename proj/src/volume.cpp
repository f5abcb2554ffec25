#include "plaque/volume.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace plaque {

namespace fs = std::filesystem;

bool Grid::same_geometry(const Grid& other) const {
  return dims == other.dims && spacing == other.spacing && origin == other.origin;
}

void Grid::validate() const {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw std::invalid_argument("grid dims must be positive");
  if (!(spacing.x() > 0 && spacing.y() > 0 && spacing.z() > 0))
    throw std::invalid_argument("grid spacing must be positive");
  if (!origin.allFinite()) throw std::invalid_argument("grid origin not finite");
}

Volume::Volume(Grid grid, double fill) : grid_(grid) {
  grid_.validate();
  voxels_.assign(grid_.dims.count(), fill);
}

Volume::Volume(Grid grid, std::vector<double> voxels)
    : grid_(grid), voxels_(std::move(voxels)) {
  grid_.validate();
  if (voxels_.size() != grid_.dims.count())
    throw std::invalid_argument("voxel count does not match dims");
  for (double v : voxels_)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite voxel");
}

Mask::Mask(Grid grid, std::uint8_t fill) : grid_(grid) {
  grid_.validate();
  if (fill > 1) throw std::invalid_argument("mask values must be 0 or 1");
  voxels_.assign(grid_.dims.count(), fill);
}

Mask::Mask(Grid grid, std::vector<std::uint8_t> voxels)
    : grid_(grid), voxels_(std::move(voxels)) {
  grid_.validate();
  if (voxels_.size() != grid_.dims.count())
    throw std::invalid_argument("mask voxel count does not match dims");
  for (auto v : voxels_)
    if (v > 1) throw std::invalid_argument("mask values must be 0 or 1");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), 1));
}

namespace {

// Resolves one axis: lower index and fraction, or false when outside.
bool axis_cell(double x, int n, int& i0, double& t) {
  constexpr double kEps = 1e-9;
  if (x < -kEps || x > (n - 1) + kEps) return false;
  x = std::clamp(x, 0.0, static_cast<double>(n - 1));
  // Snap world->index round-off so voxel centers sample exactly.
  const double r = std::round(x);
  if (std::abs(x - r) < kEps) x = r;
  if (n == 1) {
    i0 = 0;
    t = 0.0;
    return true;
  }
  i0 = std::min(static_cast<int>(std::floor(x)), n - 2);
  t = x - i0;
  return true;
}

}  // namespace

std::optional<double> sample_trilinear(const Volume& vol, const Vec3& point) {
  const Grid& g = vol.grid();
  const Vec3 c = g.continuous_index(point);
  int i, j, k;
  double tx, ty, tz;
  if (!axis_cell(c.x(), g.dims.nx, i, tx) || !axis_cell(c.y(), g.dims.ny, j, ty) ||
      !axis_cell(c.z(), g.dims.nz, k, tz))
    return std::nullopt;
  const int i1 = std::min(i + 1, g.dims.nx - 1);
  const int j1 = std::min(j + 1, g.dims.ny - 1);
  const int k1 = std::min(k + 1, g.dims.nz - 1);

  const double c00 = vol.at(i, j, k) * (1 - tx) + vol.at(i1, j, k) * tx;
  const double c10 = vol.at(i, j1, k) * (1 - tx) + vol.at(i1, j1, k) * tx;
  const double c01 = vol.at(i, j, k1) * (1 - tx) + vol.at(i1, j, k1) * tx;
  const double c11 = vol.at(i, j1, k1) * (1 - tx) + vol.at(i1, j1, k1) * tx;
  const double c0 = c00 * (1 - ty) + c10 * ty;
  const double c1 = c01 * (1 - ty) + c11 * ty;
  return c0 * (1 - tz) + c1 * tz;
}

double sample_trilinear_or(const Volume& vol, const Vec3& point, double pad) {
  return sample_trilinear(vol, point).value_or(pad);
}

Volume histogram_equalize(const Volume& vol, const EqualizationParams& params) {
  if (params.bins < 2) throw std::invalid_argument("equalization needs >= 2 bins");
  if (!(params.lo < params.hi)) throw std::invalid_argument("equalization needs lo < hi");

  const double range = params.hi - params.lo;
  const auto bin_of = [&](double v) {
    const double c = std::clamp(v, params.lo, params.hi);
    const int b = static_cast<int>(std::floor((c - params.lo) / range * params.bins));
    return std::clamp(b, 0, params.bins - 1);
  };

  std::vector<std::size_t> hist(params.bins, 0);
  for (double v : vol.data()) ++hist[bin_of(v)];

  std::vector<double> level(params.bins);
  std::size_t cum = 0;
  const double n = static_cast<double>(vol.size());
  for (int b = 0; b < params.bins; ++b) {
    cum += hist[b];
    level[b] = params.lo + range * (static_cast<double>(cum) / n);
  }

  std::vector<double> out(vol.size());
  auto src = vol.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = level[bin_of(src[i])];
  return Volume(vol.grid(), std::move(out));
}

namespace {

nlohmann::json header_json(const Grid& g, const char* kind) {
  return {{"format", kVolumeFormat},
          {"kind", kind},
          {"dtype", "float32-le"},
          {"dims", {g.dims.nx, g.dims.ny, g.dims.nz}},
          {"spacing", {g.spacing.x(), g.spacing.y(), g.spacing.z()}},
          {"origin", {g.origin.x(), g.origin.y(), g.origin.z()}}};
}

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

void write_container(const fs::path& stem, const Grid& g, const char* kind,
                     const std::vector<float>& values) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  {
    std::ofstream h(with_ext(stem, ".json"));
    if (!h) throw std::runtime_error("cannot write " + with_ext(stem, ".json").string());
    h << header_json(g, kind).dump(2) << '\n';
  }
  std::ofstream raw(with_ext(stem, ".raw"), std::ios::binary);
  if (!raw) throw std::runtime_error("cannot write " + with_ext(stem, ".raw").string());
  static_assert(sizeof(float) == 4);
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  raw.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_container(const fs::path& stem, Grid& g) {
  std::ifstream h(with_ext(stem, ".json"));
  if (!h) throw std::runtime_error("cannot read " + with_ext(stem, ".json").string());
  const auto j = nlohmann::json::parse(h);
  if (j.at("format").get<std::string>() != kVolumeFormat)
    throw std::runtime_error("unsupported volume format in " + stem.string());
  const auto d = j.at("dims");
  const auto s = j.at("spacing");
  const auto o = j.at("origin");
  g.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
  g.spacing = Vec3(s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>());
  g.origin = Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
  g.validate();

  std::ifstream raw(with_ext(stem, ".raw"), std::ios::binary);
  if (!raw) throw std::runtime_error("cannot read " + with_ext(stem, ".raw").string());
  std::vector<char> bytes(g.dims.count() * 4);
  raw.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (raw.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw std::runtime_error("truncated voxel stream in " + stem.string());
  std::vector<float> values(g.dims.count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

}  // namespace

void write_volume(const fs::path& stem, const Volume& vol) {
  std::vector<float> v(vol.size());
  std::transform(vol.data().begin(), vol.data().end(), v.begin(),
                 [](double x) { return static_cast<float>(x); });
  write_container(stem, vol.grid(), "volume", v);
}

Volume read_volume(const fs::path& stem) {
  Grid g;
  const auto v = read_container(stem, g);
  return Volume(g, std::vector<double>(v.begin(), v.end()));
}

void write_mask(const fs::path& stem, const Mask& mask) {
  std::vector<float> v(mask.size());
  std::transform(mask.data().begin(), mask.data().end(), v.begin(),
                 [](std::uint8_t x) { return static_cast<float>(x); });
  write_container(stem, mask.grid(), "mask", v);
}

Mask read_mask(const fs::path& stem) {
  Grid g;
  const auto v = read_container(stem, g);
  std::vector<std::uint8_t> m(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0f && v[i] != 1.0f)
      throw std::runtime_error("mask values must be 0 or 1 in " + stem.string());
    m[i] = v[i] == 1.0f ? 1 : 0;
  }
  return Mask(g, std::move(m));
}

}  // namespace plaque
