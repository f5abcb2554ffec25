#include <doctest.h>

#include "plaque/mpr.hpp"
#include "plaque/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace plaque;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec3> planar_arc(double radius, double angle, int n) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= n; ++i) {
    const double a = angle * i / n;
    pts.emplace_back(radius * std::sin(a), radius * (1 - std::cos(a)), 0.0);
  }
  return pts;
}

Cube cube_from(int len, int size, double spacing, auto&& f) {
  Cube c;
  c.length = len;
  c.size = size;
  c.spacing = spacing;
  c.step = 1.0;
  c.pixels.resize(static_cast<std::size_t>(len) * size * size);
  const double ctr = (size - 1) / 2.0;
  for (int l = 0; l < len; ++l)
    for (int p = 0; p < size; ++p)
      for (int q = 0; q < size; ++q) c.at(l, p, q) = f(l, (p - ctr) * spacing, (q - ctr) * spacing);
  return c;
}

// Smooth, non-symmetric test slice: a few broad Gaussian blobs.
double blobs(int l, double x, double y) {
  const double a = std::exp(-((x - 1.2) * (x - 1.2) + (y + 0.4) * (y + 0.4)) / 4.0);
  const double b = 0.6 * std::exp(-((x + 0.8) * (x + 0.8) + (y - 1.5) * (y - 1.5)) / 6.0);
  return 100.0 * (a + b) + 10.0 * l;
}

MprStack numbered_stack(int length, int size = 3) {
  MprStack s;
  s.length = length;
  s.size = size;
  s.spacing = 1.0;
  s.step = 0.5;
  s.pixels.resize(static_cast<std::size_t>(length) * size * size);
  for (int l = 0; l < length; ++l)
    for (int p = 0; p < size; ++p)
      for (int q = 0; q < size; ++q) s.at(l, p, q) = l;
  return s;
}

}  // namespace

TEST_CASE("straight 10 mm segment at 1 mm step has 11 points") {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0, 0, 10)};
  const Centerline cl = resample_centerline(pts, 1.0);
  REQUIRE(cl.size() == 11);
  for (std::size_t i = 0; i < cl.size(); ++i) CHECK((cl.points[i] - Vec3(0, 0, i)).norm() < 1e-12);
  CHECK(cl.step == doctest::Approx(1.0));
}

TEST_CASE("uniformly sampled input is reproduced") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 9; ++i) pts.emplace_back(0.5 * i, 0.0, 2.0);
  const Centerline cl = resample_centerline(pts, 0.5);
  REQUIRE(cl.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((cl.points[i] - pts[i]).norm() < 1e-12);
}

TEST_CASE("degenerate centerlines are rejected") {
  CHECK_THROWS(resample_centerline(std::vector<Vec3>{Vec3(1, 2, 3), Vec3(1, 2, 3)}, 0.5));
  CHECK_THROWS(resample_centerline(std::vector<Vec3>{Vec3(1, 2, 3)}, 0.5));
}

TEST_CASE("resampled curves keep endpoints and a uniform step") {
  const auto pts = planar_arc(30.0, 1.2, 800);
  const Centerline cl = resample_centerline(pts, 0.5);
  CHECK((cl.points.front() - pts.front()).norm() < 1e-12);
  CHECK((cl.points.back() - pts.back()).norm() < 1e-12);
  for (std::size_t i = 1; i < cl.size(); ++i)
    CHECK(std::abs((cl.points[i] - cl.points[i - 1]).norm() - cl.step) < 1e-6);
  CHECK(std::abs(cl.step - 0.5) < 0.5 / static_cast<double>(cl.size()));
}

TEST_CASE("straight centerline gives identical frames") {
  const Centerline cl = resample_centerline(std::vector<Vec3>{Vec3(1, 2, 3), Vec3(4, 6, 15)}, 0.5);
  const FrameSet f = rotation_minimizing_frames(cl);
  for (const Frame& fr : f) {
    CHECK((fr.t - f[0].t).norm() < 1e-12);
    CHECK((fr.u - f[0].u).norm() < 1e-12);
    CHECK((fr.v - f[0].v).norm() < 1e-12);
  }
  // Smallest |t0| component is x, so u starts near the x axis.
  CHECK(std::abs(f[0].u.x()) > 0.9);
}

TEST_CASE("planar arc: in-plane normal stays in the plane and follows the curve") {
  const Centerline cl = resample_centerline(planar_arc(25.0, 1.5, 2000), 0.5);
  const FrameSet f = rotation_minimizing_frames(cl, Vec3(0, 1, 0));
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(std::abs(f[i].u.z()) < 1e-6);
    // Analytic planar frame: u is the inward normal (-sin a, cos a, 0).
    const Vec3 p = cl.points[i];
    const Vec3 inward = (Vec3(0, 25.0, 0) - p).normalized();
    CHECK(f[i].u.dot(inward) > 1 - 1e-4);
  }
  const FrameSet g = rotation_minimizing_frames(cl);
  for (const Frame& fr : g) CHECK(std::abs(std::abs(fr.u.z()) - 1.0) < 1e-6);
}

TEST_CASE("frames are orthonormal and continuous on a wiggly centerline") {
  std::vector<Vec3> pts;
  for (int i = 0; i <= 1000; ++i) {
    const double s = 50.0 * i / 1000;
    pts.emplace_back(s, 0.02 * s * s, 1.0 * std::sin(2 * kPi * s / 25.0));
  }
  const Centerline cl = resample_centerline(pts, 0.5);
  const FrameSet f = rotation_minimizing_frames(cl);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Frame& fr = f[i];
    CHECK(std::abs(fr.t.norm() - 1) < 1e-9);
    CHECK(std::abs(fr.u.norm() - 1) < 1e-9);
    CHECK(std::abs(fr.v.norm() - 1) < 1e-9);
    CHECK(std::abs(fr.t.dot(fr.u)) < 1e-9);
    CHECK(std::abs(fr.t.dot(fr.v)) < 1e-9);
    CHECK(std::abs(fr.u.dot(fr.v)) < 1e-9);
    CHECK((fr.t.cross(fr.u) - fr.v).norm() < 1e-9);
    if (i > 0) {
      CHECK(std::acos(std::clamp(fr.u.dot(f[i - 1].u), -1.0, 1.0)) < 10.0 * kPi / 180.0);
      const Vec3 d = (cl.points[std::min(i + 1, f.size() - 1)] - cl.points[i - 1]).normalized();
      CHECK(fr.t.dot(d) > 1 - 1e-9);
    }
  }
}

TEST_CASE("MPR of a constant volume is constant with the requested shape") {
  Volume vol(Grid{{20, 20, 20}, Vec3::Ones(), Vec3::Zero()}, 37.0);
  const Centerline cl = resample_centerline(std::vector<Vec3>{Vec3(10, 10, 4), Vec3(10, 10, 14)}, 1.0);
  const MprStack s = extract_mpr_stack(vol, cl, rotation_minimizing_frames(cl), 7, 0.5);
  CHECK(s.length == 11);
  CHECK(s.size == 7);
  CHECK(s.pixels.size() == 11u * 7 * 7);
  for (double v : s.pixels) CHECK(v == doctest::Approx(37.0));
  CHECK_THROWS(extract_mpr_stack(vol, cl, rotation_minimizing_frames(cl), 6, 0.5));
}

TEST_CASE("MPR of an axis-aligned tube shows lumen at the center and background outside") {
  const double r = 2.0;
  Volume vol(Grid{{25, 25, 30}, Vec3(0.5, 0.5, 0.5), Vec3::Zero()}, 0.0);
  const Vec3 axis(6.0, 6.0, 0.0);
  for (int k = 0; k < 30; ++k)
    for (int j = 0; j < 25; ++j)
      for (int i = 0; i < 25; ++i) {
        const Vec3 w = vol.grid().world(i, j, k);
        if (std::hypot(w.x() - axis.x(), w.y() - axis.y()) <= r) vol.at(i, j, k) = 400.0;
      }
  const Centerline cl = resample_centerline(std::vector<Vec3>{Vec3(6, 6, 2), Vec3(6, 6, 12)}, 0.5);
  const MprStack s = extract_mpr_stack(vol, cl, rotation_minimizing_frames(cl), 21, 0.25);
  const int c = 10;
  for (int l = 0; l < s.length; ++l) {
    CHECK(s.at(l, c, c) == doctest::Approx(400.0));
    // More than one voxel diagonal beyond the wall, only background is sampled.
    CHECK(s.at(l, 0, c) == doctest::Approx(0.0));
    CHECK(s.at(l, c, 20) == doctest::Approx(0.0));
  }
}

TEST_CASE("MPR samples outside the volume take the pad value") {
  Volume vol(Grid{{5, 5, 5}, Vec3::Ones(), Vec3::Zero()}, 1.0);
  const Centerline cl = resample_centerline(std::vector<Vec3>{Vec3(2, 2, 0), Vec3(2, 2, 4)}, 1.0);
  const MprStack s = extract_mpr_stack(vol, cl, rotation_minimizing_frames(cl), 11, 1.0);
  CHECK(s.at(0, 0, 0) == kMprPad);
  CHECK(s.at(0, 5, 5) == 1.0);
}

TEST_CASE("cut_cubes counts and padding") {
  CHECK(cube_count(64, 16, 8) == 7);
  CHECK(cut_cubes(numbered_stack(64), 16, 8).size() == 7);
  const auto one = cut_cubes(numbered_stack(16), 16, 8);
  REQUIRE(one.size() == 1);
  for (int l = 0; l < 16; ++l) CHECK(one[0].at(l, 1, 1) == l);

  const auto pad = cut_cubes(numbered_stack(10), 16, 8);
  REQUIRE(pad.size() == 1);
  for (int l = 0; l < 16; ++l) CHECK(pad[0].at(l, 0, 2) == std::min(l, 9));

  // A remainder slice range gets one extra end-aligned cube.
  const auto tail = cut_cubes(numbered_stack(20), 16, 8);
  REQUIRE(tail.size() == 2);
  CHECK(tail[1].first_slice == 4);
  CHECK(tail[1].at(15, 0, 0) == 19);
  CHECK_THROWS(cut_cubes(numbered_stack(20), 8, 9));
}

TEST_CASE("cut_cubes covers every slice and cubes copy the right slices") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const int len = 1 + static_cast<int>(uniform_index(rng, 12));
    const int stride = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(len)));
    const int L = 1 + static_cast<int>(uniform_index(rng, 40));
    const auto cubes = cut_cubes(numbered_stack(L, 1), len, stride);
    CHECK(static_cast<int>(cubes.size()) == cube_count(L, len, stride));
    if (L >= len && (L - len) % stride == 0) CHECK(cube_count(L, len, stride) == (L - len) / stride + 1);
    std::vector<int> hits(L, 0);
    for (std::size_t n = 0; n < cubes.size(); ++n) {
      const Cube& c = cubes[n];
      CHECK(c.length == len);
      if (n + 1 < cubes.size()) CHECK(c.first_slice == static_cast<int>(n) * stride);
      for (int l = 0; l < len; ++l) {
        const int src = std::min(c.first_slice + l, L - 1);
        CHECK(c.at(l, 0, 0) == src);
        ++hits[src];
      }
    }
    for (int h : hits) CHECK(h >= 1);
  }
}

TEST_CASE("polar transform of a radially symmetric slice is constant along angle") {
  const Cube c = cube_from(2, 33, 0.3, [](int, double x, double y) {
    return 1000.0 * std::exp(-(x * x + y * y) / (2 * 5.0 * 5.0));
  });
  const double peak = *std::max_element(c.pixels.begin(), c.pixels.end());
  const PolarCube p = to_polar(c, 16, 12, 4.5);
  for (int l = 0; l < 2; ++l)
    for (int r = 0; r < 12; ++r) {
      double lo = 1e300, hi = -1e300;
      for (int a = 0; a < 16; ++a) {
        lo = std::min(lo, p.at(l, a, r));
        hi = std::max(hi, p.at(l, a, r));
      }
      CHECK(hi - lo <= 1e-3 * peak);
    }
}

TEST_CASE("polar radius row zero equals the center pixel") {
  const Cube c = cube_from(3, 33, 0.3, blobs);
  const PolarCube p = to_polar(c, 16, 12, 4.5);
  for (int l = 0; l < 3; ++l)
    for (int a = 0; a < 16; ++a) CHECK(p.at(l, a, 0) == c.at(l, 16, 16));
}

TEST_CASE("polar sample positions follow the documented convention") {
  // Linear image: f = x, so polar(a, r) = r * r_max / (R - 1) * cos(2 pi a / A).
  const Cube c = cube_from(1, 33, 0.3, [](int, double x, double) { return x; });
  const PolarCube p = to_polar(c, 16, 12, 4.5);
  for (int a = 0; a < 16; ++a)
    for (int r = 0; r < 12; ++r)
      CHECK(p.at(0, a, r) == doctest::Approx(r * 4.5 / 11 * std::cos(2 * kPi * a / 16)).epsilon(1e-9));
  CHECK_THROWS(to_polar(c, 16, 12, 4.9));
  CHECK_THROWS(to_polar(c, 1, 12, 4.0));
}

TEST_CASE("rotating by whole angle steps equals a cyclic polar shift") {
  const Cube c = cube_from(2, 33, 0.3, blobs);
  const int A = 16;
  const PolarCube base = to_polar(c, A, 12, 4.5);
  double range = 0;
  for (double v : base.samples) range = std::max(range, std::abs(v));
  for (int k = 0; k < A; ++k) {
    const PolarCube rot = to_polar(rotate_cube(c, 2 * kPi * k / A), A, 12, 4.5);
    // Quarter turns map the pixel grid onto itself: exact. Others: bilinear.
    const double tol = k % 4 == 0 ? 1e-9 : 0.02 * range;
    for (int l = 0; l < 2; ++l)
      for (int a = 0; a < A; ++a)
        for (int r = 0; r < 12; ++r)
          CHECK(std::abs(rot.at(l, (a + k) % A, r) - base.at(l, a, r)) <= tol);
  }
}

TEST_CASE("polar round trip reconstructs smooth slices within 2% of the range") {
  const Cube c = cube_from(2, 33, 0.3, blobs);
  const PolarCube p = to_polar(c, 64, 16, 4.5);
  const Cube back = from_polar(p, 33, 0.3);
  double lo = 1e300, hi = -1e300, err = 0;
  int n = 0;
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 33; ++i)
      for (int j = 0; j < 33; ++j) {
        lo = std::min(lo, c.at(l, i, j));
        hi = std::max(hi, c.at(l, i, j));
        if (std::hypot((i - 16) * 0.3, (j - 16) * 0.3) > 4.5) continue;
        err += std::abs(back.at(l, i, j) - c.at(l, i, j));
        ++n;
      }
  CHECK(err / n < 0.02 * (hi - lo));
}

TEST_CASE("mirror is an involution and reverses the polar angle axis") {
  const Cube c = cube_from(2, 33, 0.3, blobs);
  const Cube m = mirror_cube(c);
  CHECK(mirror_cube(m).pixels == c.pixels);
  const PolarCube pc = to_polar(c, 16, 12, 4.5), pm = to_polar(m, 16, 12, 4.5);
  for (int l = 0; l < 2; ++l)
    for (int a = 0; a < 16; ++a)
      for (int r = 0; r < 12; ++r) CHECK(pm.at(l, (16 - a) % 16, r) == doctest::Approx(pc.at(l, a, r)).epsilon(1e-12));
}

TEST_CASE("zero rotation and zero translation are identities") {
  const Cube c = cube_from(2, 9, 0.5, blobs);
  CHECK(rotate_cube(c, 0.0).pixels == c.pixels);
  CHECK(translate_cube(c, 0.0, 0.0).pixels == c.pixels);
  const Cube t = translate_cube(c, 1.0, -2.0);
  CHECK(t.at(0, 4, 4) == c.at(0, 3, 6));
}
