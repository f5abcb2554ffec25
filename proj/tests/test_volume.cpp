#include <doctest.h>

#include "plaque/seed.hpp"
#include "plaque/volume.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>

using namespace plaque;

namespace {

Grid small_grid(int nx = 5, int ny = 4, int nz = 3) {
  return Grid{{nx, ny, nz}, Vec3(0.5, 0.7, 1.1), Vec3(-2.0, 1.0, 3.0)};
}

Volume random_volume(const Grid& g, std::uint64_t seed, double scale = 100.0) {
  Rng rng(seed);
  Volume v(g, 0.0);
  for (double& x : v.data()) x = scale * (2 * uniform01(rng) - 1);
  return v;
}

}  // namespace

TEST_CASE("trilinear sampling on a constant volume returns the constant") {
  Volume v(small_grid(), 7.0);
  Rng rng(1);
  for (int n = 0; n < 50; ++n) {
    const Vec3 idx(4 * uniform01(rng), 3 * uniform01(rng), 2 * uniform01(rng));
    const Vec3 w = v.origin() + idx.cwiseProduct(v.spacing());
    auto s = sample_trilinear(v, w);
    REQUIRE(s.has_value());
    CHECK(*s == doctest::Approx(7.0).epsilon(1e-14));
  }
}

TEST_CASE("trilinear sampling is exact at voxel centers") {
  const Volume v = random_volume(small_grid(), 3);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 5; ++i) CHECK(*sample_trilinear(v, v.grid().world(i, j, k)) == v.at(i, j, k));
}

TEST_CASE("midpoint between voxels valued 0 and 10 samples 5") {
  Volume v(Grid{{2, 1, 1}, Vec3(2.0, 1.0, 1.0), Vec3::Zero()}, 0.0);
  v.at(1, 0, 0) = 10.0;
  CHECK(*sample_trilinear(v, Vec3(1.0, 0.0, 0.0)) == doctest::Approx(5.0));
}

TEST_CASE("out-of-hull points signal outside and take padding") {
  Volume v(small_grid(), 1.0);
  CHECK_FALSE(sample_trilinear(v, v.origin() - Vec3(0.01, 0, 0)).has_value());
  CHECK(sample_trilinear_or(v, v.origin() + Vec3(100, 0, 0), -1024.0) == -1024.0);
}

TEST_CASE("trilinear sampling is linear in the voxel data") {
  const Grid g = small_grid();
  const Volume a = random_volume(g, 11), b = random_volume(g, 12);
  const double alpha = 1.7, beta = -0.3;
  Volume c(g, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    const Vec3 idx(4 * uniform01(rng), 3 * uniform01(rng), 2 * uniform01(rng));
    const Vec3 w = g.origin + idx.cwiseProduct(g.spacing);
    const double lhs = *sample_trilinear(c, w);
    const double rhs = alpha * *sample_trilinear(a, w) + beta * *sample_trilinear(b, w);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("equalization of a constant volume is constant") {
  Volume v(small_grid(), 123.0);
  const Volume e = histogram_equalize(v);
  const auto [mn, mx] = std::minmax_element(e.data().begin(), e.data().end());
  CHECK(*mn == *mx);
  CHECK(e.grid().same_geometry(v.grid()));
}

TEST_CASE("equalization of a uniform histogram moves values by at most one bin") {
  EqualizationParams p{16, 0.0, 160.0};
  Volume v(Grid{{16, 4, 1}, Vec3::Ones(), Vec3::Zero()}, 0.0);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 16; ++i) v.at(i, j, 0) = 10.0 * i + 2.5 * j;
  const Volume e = histogram_equalize(v, p);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(e.data()[i] - v.data()[i]) <= 10.0);
}

TEST_CASE("equalization matches a direct CDF mapping on a two-valued volume") {
  EqualizationParams p{256, -200.0, 1000.0};
  Volume v(small_grid(4, 4, 4), 0.0);
  // Half at lo, half at the upper quartile.
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = i % 2 ? -200.0 : 700.0;
  const Volume e = histogram_equalize(v, p);

  // Oracle: out(x) = lo + (hi - lo) * #{y : bin(y) <= bin(x)} / N.
  auto bin = [&](double x) {
    const double c = std::clamp(x, p.lo, p.hi);
    return std::min(p.bins - 1, static_cast<int>((c - p.lo) / (p.hi - p.lo) * p.bins));
  };
  const auto vals = v.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t le = 0;
    for (double y : vals) le += bin(y) <= bin(vals[i]);
    const double expect = p.lo + (p.hi - p.lo) * static_cast<double>(le) / static_cast<double>(v.size());
    CHECK(e.data()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(e.data()[1] == doctest::Approx(400.0));
  CHECK(e.data()[0] == doctest::Approx(1000.0));
}

TEST_CASE("equalization is monotone and idempotent up to one bin width") {
  EqualizationParams p;
  const Volume v = random_volume(small_grid(9, 8, 7), 21, 700.0);
  const Volume e = histogram_equalize(v, p);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v.data()[a] < v.data()[b]; });
  for (std::size_t n = 1; n < order.size(); ++n)
    CHECK(e.data()[order[n - 1]] <= e.data()[order[n]]);

  const Volume ee = histogram_equalize(e, p);
  const double width = (p.hi - p.lo) / p.bins;
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(std::abs(ee.data()[i] - e.data()[i]) <= width + 1e-9);
}

TEST_CASE("equalization rejects invalid parameters") {
  Volume v(small_grid(), 0.0);
  CHECK_THROWS_AS(histogram_equalize(v, {1, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(histogram_equalize(v, {16, 5, 5}), std::invalid_argument);
}

TEST_CASE("volume and mask containers round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "plaque_test_volume_io";
  std::filesystem::remove_all(dir);
  Volume v = random_volume(small_grid(), 9);
  for (double& x : v.data()) x = static_cast<float>(x);
  write_volume(dir / "vol", v);
  const Volume r = read_volume(dir / "vol");
  CHECK(r.grid().same_geometry(v.grid()));
  CHECK(std::equal(r.data().begin(), r.data().end(), v.data().begin()));

  Mask m(small_grid(), 0);
  m.at(1, 2, 1) = 1;
  write_mask(dir / "mask", m);
  const Mask mr = read_mask(dir / "mask");
  CHECK(mr.count() == 1);
  CHECK(mr.at(1, 2, 1) == 1);
  CHECK(std::filesystem::file_size(dir / "vol.raw") == v.size() * 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("volume invariants are enforced") {
  CHECK_THROWS(Volume(Grid{{0, 1, 1}, Vec3::Ones(), Vec3::Zero()}));
  CHECK_THROWS(Volume(Grid{{1, 1, 1}, Vec3(1, 0, 1), Vec3::Zero()}));
  CHECK_THROWS(Volume(Grid{{2, 1, 1}, Vec3::Ones(), Vec3::Zero()}, std::vector<double>{1.0}));
  CHECK_THROWS(Mask(Grid{{1, 1, 1}, Vec3::Ones(), Vec3::Zero()}, std::vector<std::uint8_t>{2}));
}
