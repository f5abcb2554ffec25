#pragma once

#include "plaque/volume.hpp"

#include <optional>
#include <span>
#include <vector>

namespace plaque {

struct Centerline {
  std::vector<Vec3> points;
  double step = 0.0;  // arclength between consecutive points (mm)

  std::size_t size() const { return points.size(); }
};

// Uniform resampling along the polyline with equal chord lengths. The number
// of intervals is round(arclength / step); the realized chord (stored in the
// result) is chosen so that both endpoints are kept.
Centerline resample_centerline(std::span<const Vec3> points, double step);

// Per-point orthonormal frame: t along the curve, (u, v) spanning the slice
// plane, v = t x u.
struct Frame {
  Vec3 t;
  Vec3 u;
  Vec3 v;
};
using FrameSet = std::vector<Frame>;

// Rotation-minimizing frames by double reflection. Without `initial_normal`
// the first u is the world axis with the smallest |component| of t0,
// projected orthogonal to t0.
FrameSet rotation_minimizing_frames(const Centerline& cl,
                                    std::optional<Vec3> initial_normal = std::nullopt);

// Stack of L square slices, S x S pixels. Pixel (p, q) of slice l sits at
// cl[l] + (p - c) * spacing * u_l + (q - c) * spacing * v_l, c = (S - 1) / 2.
struct MprStack {
  int length = 0;
  int size = 0;
  double spacing = 0.0;
  double step = 0.0;  // centerline step between slices
  std::vector<double> pixels;
  FrameSet frames;

  double& at(int l, int p, int q) { return pixels[(static_cast<std::size_t>(l) * size + p) * size + q]; }
  double at(int l, int p, int q) const { return pixels[(static_cast<std::size_t>(l) * size + p) * size + q]; }
};

inline constexpr double kMprPad = -1024.0;

MprStack extract_mpr_stack(const Volume& vol, const Centerline& cl, const FrameSet& frames,
                           int size, double spacing, double pad = kMprPad);

// Cartesian sub-stack; same layout as MprStack.
struct Cube {
  int length = 0;
  int size = 0;
  double spacing = 0.0;
  double step = 0.0;
  int first_slice = 0;  // index into the originating stack
  std::vector<double> pixels;

  double& at(int l, int p, int q) { return pixels[(static_cast<std::size_t>(l) * size + p) * size + q]; }
  double at(int l, int p, int q) const { return pixels[(static_cast<std::size_t>(l) * size + p) * size + q]; }
};

// Polar sample (a, r) is at angle 2*pi*a/A (0 along +u) and radius
// r * r_max / (R - 1).
struct PolarCube {
  int length = 0;
  int angles = 0;
  int radii = 0;
  double r_max = 0.0;
  std::vector<double> samples;

  double& at(int l, int a, int r) { return samples[(static_cast<std::size_t>(l) * angles + a) * radii + r]; }
  double at(int l, int a, int r) const { return samples[(static_cast<std::size_t>(l) * angles + a) * radii + r]; }
};

// Overlapping cubes starting at 0, stride, 2*stride, ... When (L - len) is not
// a multiple of stride, one more cube aligned with the stack end is appended
// so that every slice is covered. L < len yields one cube whose trailing
// slices replicate the last slice.
std::vector<Cube> cut_cubes(const MprStack& stack, int len, int stride);
int cube_count(int stack_length, int len, int stride);

PolarCube to_polar(const Cube& cube, int angles, int radii, double r_max);

// Inverse resampling onto an S x S grid; pixels outside r_max are set to
// `outside`. Angle is periodic, radius linear.
Cube from_polar(const PolarCube& polar, int size, double spacing, double outside = 0.0);

// In-plane operations on Cartesian cubes, used by augmentation.
// Rotation about the slice center by `radians` (bilinear, edge-clamped);
// translation by (dp, dq) pixels (bilinear, edge-clamped); mirror reflects
// across the u axis (q -> S - 1 - q), i.e. angle -> -angle.
Cube rotate_cube(const Cube& cube, double radians);
Cube translate_cube(const Cube& cube, double dp, double dq);
Cube mirror_cube(const Cube& cube);

// Bilinear lookup in slice l at fractional pixel (p, q), clamped to the grid.
double sample_slice(const Cube& cube, int l, double p, double q);

// Converts a mask to a 0/1 volume so it can be resampled like intensities.
Volume mask_as_volume(const Mask& mask);

}  // namespace plaque
