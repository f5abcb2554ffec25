#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace plaque {

using Vec3 = Eigen::Vector3d;

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  bool operator==(const Dims&) const = default;
};

// Grid geometry shared by volumes and masks.
//
// Voxel (i, j, k) has its center at origin + (i*sx, j*sy, k*sz). There is no
// direction matrix: the grid axes are the world axes.
struct Grid {
  Dims dims;
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims.nx) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(dims.ny) * static_cast<std::size_t>(k));
  }
  Vec3 world(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
  Vec3 continuous_index(const Vec3& p) const {
    return (p - origin).cwiseQuotient(spacing);
  }
  bool same_geometry(const Grid& other) const;
  void validate() const;
};

class Volume {
 public:
  Volume() = default;
  Volume(Grid grid, double fill = 0.0);
  Volume(Grid grid, std::vector<double> voxels);

  const Grid& grid() const { return grid_; }
  const Dims& dims() const { return grid_.dims; }
  const Vec3& spacing() const { return grid_.spacing; }
  const Vec3& origin() const { return grid_.origin; }
  std::size_t size() const { return voxels_.size(); }

  double& at(int i, int j, int k) { return voxels_[grid_.index(i, j, k)]; }
  double at(int i, int j, int k) const { return voxels_[grid_.index(i, j, k)]; }
  std::span<double> data() { return voxels_; }
  std::span<const double> data() const { return voxels_; }

 private:
  Grid grid_;
  std::vector<double> voxels_;
};

class Mask {
 public:
  Mask() = default;
  explicit Mask(Grid grid, std::uint8_t fill = 0);
  Mask(Grid grid, std::vector<std::uint8_t> voxels);

  const Grid& grid() const { return grid_; }
  const Dims& dims() const { return grid_.dims; }
  const Vec3& spacing() const { return grid_.spacing; }
  std::size_t size() const { return voxels_.size(); }

  std::uint8_t& at(int i, int j, int k) { return voxels_[grid_.index(i, j, k)]; }
  std::uint8_t at(int i, int j, int k) const { return voxels_[grid_.index(i, j, k)]; }
  std::span<std::uint8_t> data() { return voxels_; }
  std::span<const std::uint8_t> data() const { return voxels_; }

  std::size_t count() const;

 private:
  Grid grid_;
  std::vector<std::uint8_t> voxels_;
};

class OutsideVolume : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Trilinear interpolation at a world point. Returns nullopt when the point
// lies outside the hull of voxel centers.
std::optional<double> sample_trilinear(const Volume& vol, const Vec3& point);

// Same, but out-of-hull points take `pad`.
double sample_trilinear_or(const Volume& vol, const Vec3& point, double pad);

struct EqualizationParams {
  int bins = 256;
  double lo = -200.0;
  double hi = 1000.0;
};

// Histogram equalization over the whole volume: clip to [lo, hi], bin, and map
// each bin to lo + (hi - lo) * CDF(bin). The map is monotone non-decreasing.
Volume histogram_equalize(const Volume& vol, const EqualizationParams& params = {});

// Container: <stem>.raw holds little-endian float32 voxels (x fastest),
// <stem>.json the header {format, dims, spacing, origin, kind}.
inline constexpr const char* kVolumeFormat = "plaque-volume/1";

void write_volume(const std::filesystem::path& stem, const Volume& vol);
Volume read_volume(const std::filesystem::path& stem);
void write_mask(const std::filesystem::path& stem, const Mask& mask);
Mask read_mask(const std::filesystem::path& stem);

}  // namespace plaque
