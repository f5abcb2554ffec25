#include "plaque/mpr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace plaque {

namespace {

struct PolyPos {
  std::size_t seg = 0;  // point lies on [points[seg], points[seg + 1]]
  double t = 0.0;
};

// Walks `count` chords of Euclidean length `d` along the polyline. Returns the
// arclength position reached, or +inf if the polyline ends first.
double walk_chords(std::span<const Vec3> pts, std::span<const double> cum, double d, long count,
                   std::vector<Vec3>* out) {
  PolyPos pos;
  Vec3 cur = pts[0];
  if (out) out->push_back(cur);
  for (long n = 0; n < count; ++n) {
    // First segment whose end lies at distance >= d from cur.
    std::size_t seg = pos.seg;
    while (seg + 1 < pts.size() && (pts[seg + 1] - cur).norm() < d) ++seg;
    if (seg + 1 >= pts.size()) return std::numeric_limits<double>::infinity();
    // Solve |a + t (b - a) - cur| = d for the larger root in [0, 1].
    const Vec3 a = pts[seg], ab = pts[seg + 1] - pts[seg], ac = a - cur;
    const double qa = ab.squaredNorm(), qb = 2 * ab.dot(ac), qc = ac.squaredNorm() - d * d;
    const double disc = std::max(0.0, qb * qb - 4 * qa * qc);
    double t = (-qb + std::sqrt(disc)) / (2 * qa);
    if (seg == pos.seg) t = std::max(t, pos.t);
    t = std::clamp(t, 0.0, 1.0);
    pos = {seg, t};
    cur = a + t * ab;
    if (out) out->push_back(cur);
  }
  return cum[pos.seg] + pos.t * (cum[pos.seg + 1] - cum[pos.seg]);
}

}  // namespace

Centerline resample_centerline(std::span<const Vec3> points, double step) {
  if (points.size() < 2) throw std::invalid_argument("centerline needs at least 2 points");
  if (!(step > 0)) throw std::invalid_argument("resampling step must be positive");
  std::vector<double> cum(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i)
    cum[i] = cum[i - 1] + (points[i] - points[i - 1]).norm();
  const double total = cum.back();
  if (!(total > 0)) throw std::invalid_argument("degenerate centerline (zero length)");

  // Equal chords: bisect on the chord length so that `intervals` chords end
  // exactly at the last point.
  const long intervals = std::max(1L, std::lround(total / step));
  double lo = 0.0, hi = total / static_cast<double>(intervals) * (1 + 1e-9);
  const double chord_end = (points.back() - points.front()).norm();
  if (intervals == 1) lo = hi = chord_end;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (walk_chords(points, cum, mid, intervals, nullptr) < total ? lo : hi) = mid;
  }
  Centerline cl;
  cl.step = hi;
  walk_chords(points, cum, hi, intervals - 1, &cl.points);
  cl.points.push_back(points.back());
  return cl;
}

namespace {

std::vector<Vec3> tangents(const std::vector<Vec3>& p) {
  const std::size_t n = p.size();
  std::vector<Vec3> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& a = p[i == 0 ? 0 : i - 1];
    const Vec3& b = p[i + 1 == n ? n - 1 : i + 1];
    Vec3 d = b - a;
    if (d.norm() == 0) throw std::invalid_argument("coincident consecutive centerline points");
    t[i] = d.normalized();
  }
  return t;
}

Frame orthonormalize(const Vec3& t, const Vec3& u_guess) {
  Frame f;
  f.t = t.normalized();
  f.u = (u_guess - u_guess.dot(f.t) * f.t).normalized();
  f.v = f.t.cross(f.u);
  return f;
}

}  // namespace

FrameSet rotation_minimizing_frames(const Centerline& cl, std::optional<Vec3> initial_normal) {
  if (cl.points.size() < 2) throw std::invalid_argument("centerline needs at least 2 points");
  const auto t = tangents(cl.points);

  Vec3 u0;
  if (initial_normal) {
    u0 = *initial_normal;
  } else {
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(t[0][a]) < std::abs(t[0][axis])) axis = a;
    u0 = Vec3::Unit(axis);
  }
  if ((u0 - u0.dot(t[0]) * t[0]).norm() < 1e-12)
    throw std::invalid_argument("initial normal parallel to tangent");

  FrameSet frames(cl.points.size());
  frames[0] = orthonormalize(t[0], u0);
  for (std::size_t i = 0; i + 1 < cl.points.size(); ++i) {
    const Vec3 v1 = cl.points[i + 1] - cl.points[i];
    const double c1 = v1.squaredNorm();
    Vec3 r = frames[i].u;
    if (c1 > 0) {
      const Vec3 r_l = r - (2.0 / c1) * v1.dot(r) * v1;
      const Vec3 t_l = t[i] - (2.0 / c1) * v1.dot(t[i]) * v1;
      const Vec3 v2 = t[i + 1] - t_l;
      const double c2 = v2.squaredNorm();
      r = c2 > 1e-30 ? Vec3(r_l - (2.0 / c2) * v2.dot(r_l) * v2) : r_l;
    }
    frames[i + 1] = orthonormalize(t[i + 1], r);
  }
  return frames;
}

MprStack extract_mpr_stack(const Volume& vol, const Centerline& cl, const FrameSet& frames,
                           int size, double spacing, double pad) {
  if (frames.size() != cl.points.size()) throw std::invalid_argument("frames/centerline mismatch");
  if (size < 1 || size % 2 == 0) throw std::invalid_argument("MPR slice size must be odd");
  if (!(spacing > 0)) throw std::invalid_argument("MPR spacing must be positive");
  MprStack s;
  s.length = static_cast<int>(cl.points.size());
  s.size = size;
  s.spacing = spacing;
  s.step = cl.step;
  s.frames = frames;
  s.pixels.resize(static_cast<std::size_t>(s.length) * size * size);
  const double c = (size - 1) / 2.0;
  for (int l = 0; l < s.length; ++l) {
    const Frame& f = frames[l];
    for (int p = 0; p < size; ++p)
      for (int q = 0; q < size; ++q) {
        const Vec3 w = cl.points[l] + ((p - c) * spacing) * f.u + ((q - c) * spacing) * f.v;
        s.at(l, p, q) = sample_trilinear_or(vol, w, pad);
      }
  }
  return s;
}

int cube_count(int stack_length, int len, int stride) {
  if (len < 1) throw std::invalid_argument("cube length must be >= 1");
  if (stride < 1 || stride > len) throw std::invalid_argument("stride must be in [1, len]");
  if (stack_length < 1) throw std::invalid_argument("empty stack");
  if (stack_length <= len) return 1;
  const int span = stack_length - len;
  return span / stride + 1 + (span % stride != 0 ? 1 : 0);
}

std::vector<Cube> cut_cubes(const MprStack& stack, int len, int stride) {
  const int count = cube_count(stack.length, len, stride);
  const std::size_t slice = static_cast<std::size_t>(stack.size) * stack.size;
  std::vector<Cube> cubes;
  cubes.reserve(count);
  for (int n = 0; n < count; ++n) {
    int start = n * stride;
    if (stack.length >= len) start = std::min(start, stack.length - len);
    Cube c;
    c.length = len;
    c.size = stack.size;
    c.spacing = stack.spacing;
    c.step = stack.step;
    c.first_slice = start;
    c.pixels.resize(slice * len);
    for (int l = 0; l < len; ++l) {
      const int src = std::min(start + l, stack.length - 1);
      std::copy_n(stack.pixels.begin() + static_cast<std::ptrdiff_t>(src * slice), slice,
                  c.pixels.begin() + static_cast<std::ptrdiff_t>(l * slice));
    }
    cubes.push_back(std::move(c));
  }
  return cubes;
}

double sample_slice(const Cube& cube, int l, double p, double q) {
  const int n = cube.size;
  p = std::clamp(p, 0.0, static_cast<double>(n - 1));
  q = std::clamp(q, 0.0, static_cast<double>(n - 1));
  const int p0 = std::min(static_cast<int>(std::floor(p)), std::max(n - 2, 0));
  const int q0 = std::min(static_cast<int>(std::floor(q)), std::max(n - 2, 0));
  const int p1 = std::min(p0 + 1, n - 1);
  const int q1 = std::min(q0 + 1, n - 1);
  const double tp = p - p0, tq = q - q0;
  const double a = cube.at(l, p0, q0) * (1 - tq) + cube.at(l, p0, q1) * tq;
  const double b = cube.at(l, p1, q0) * (1 - tq) + cube.at(l, p1, q1) * tq;
  return a * (1 - tp) + b * tp;
}

PolarCube to_polar(const Cube& cube, int angles, int radii, double r_max) {
  if (angles < 2 || radii < 2) throw std::invalid_argument("polar grid needs A, R >= 2");
  const double limit = (cube.size - 1) / 2.0 * cube.spacing;
  if (!(r_max > 0) || r_max > limit + 1e-9)
    throw std::invalid_argument("r_max exceeds the slice half-width");
  PolarCube out;
  out.length = cube.length;
  out.angles = angles;
  out.radii = radii;
  out.r_max = r_max;
  out.samples.resize(static_cast<std::size_t>(cube.length) * angles * radii);
  const double c = (cube.size - 1) / 2.0;
  for (int a = 0; a < angles; ++a) {
    const double theta = 2.0 * std::numbers::pi * a / angles;
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int r = 0; r < radii; ++r) {
      const double rho = r * r_max / (radii - 1) / cube.spacing;
      const double p = c + rho * ct, q = c + rho * st;
      for (int l = 0; l < cube.length; ++l) out.at(l, a, r) = sample_slice(cube, l, p, q);
    }
  }
  return out;
}

Cube from_polar(const PolarCube& polar, int size, double spacing, double outside) {
  Cube out;
  out.length = polar.length;
  out.size = size;
  out.spacing = spacing;
  out.pixels.assign(static_cast<std::size_t>(polar.length) * size * size, outside);
  const double c = (size - 1) / 2.0;
  const double dr = polar.r_max / (polar.radii - 1);
  const double da = 2.0 * std::numbers::pi / polar.angles;
  for (int p = 0; p < size; ++p)
    for (int q = 0; q < size; ++q) {
      const double x = (p - c) * spacing, y = (q - c) * spacing;
      const double rho = std::hypot(x, y);
      if (rho > polar.r_max + 1e-12) continue;
      double theta = std::atan2(y, x);
      if (theta < 0) theta += 2.0 * std::numbers::pi;
      const double fa = theta / da, fr = std::min(rho / dr, polar.radii - 1.0);
      const int a0 = static_cast<int>(std::floor(fa)) % polar.angles;
      const int a1 = (a0 + 1) % polar.angles;
      const int r0 = std::min(static_cast<int>(std::floor(fr)), polar.radii - 2);
      const double ta = fa - std::floor(fa), tr = fr - r0;
      for (int l = 0; l < polar.length; ++l) {
        const double lo = polar.at(l, a0, r0) * (1 - ta) + polar.at(l, a1, r0) * ta;
        const double hi = polar.at(l, a0, r0 + 1) * (1 - ta) + polar.at(l, a1, r0 + 1) * ta;
        out.at(l, p, q) = lo * (1 - tr) + hi * tr;
      }
    }
  return out;
}

Cube rotate_cube(const Cube& cube, double radians) {
  Cube out = cube;
  const double c = (cube.size - 1) / 2.0;
  const double cr = std::cos(radians), sr = std::sin(radians);
  for (int p = 0; p < cube.size; ++p)
    for (int q = 0; q < cube.size; ++q) {
      // Output pixel at angle phi reads the input at phi - radians.
      const double x = p - c, y = q - c;
      const double sp = c + cr * x + sr * y;
      const double sq = c - sr * x + cr * y;
      for (int l = 0; l < cube.length; ++l) out.at(l, p, q) = sample_slice(cube, l, sp, sq);
    }
  return out;
}

Cube translate_cube(const Cube& cube, double dp, double dq) {
  Cube out = cube;
  for (int p = 0; p < cube.size; ++p)
    for (int q = 0; q < cube.size; ++q)
      for (int l = 0; l < cube.length; ++l) out.at(l, p, q) = sample_slice(cube, l, p - dp, q - dq);
  return out;
}

Cube mirror_cube(const Cube& cube) {
  Cube out = cube;
  for (int l = 0; l < cube.length; ++l)
    for (int p = 0; p < cube.size; ++p)
      for (int q = 0; q < cube.size; ++q) out.at(l, p, q) = cube.at(l, p, cube.size - 1 - q);
  return out;
}

Volume mask_as_volume(const Mask& mask) {
  std::vector<double> v(mask.data().begin(), mask.data().end());
  return Volume(mask.grid(), std::move(v));
}

}  // namespace plaque
