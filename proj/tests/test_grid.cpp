#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kakeya/grid.hpp"
#include "kakeya/mask_io.hpp"
#include "kakeya/rng.hpp"

using namespace kakeya;

namespace {
template <int D>
std::shared_ptr<const VoxelGrid<D>> std_grid(double delta, double factor = 8.0) {
  return std::make_shared<const VoxelGrid<D>>(VoxelGrid<D>::standard(delta, delta / factor));
}

Direction<3> rand_dir(CounterRng& rng) {
  for (;;) {
    Vec<3> v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.norm() > 0.1 && v.norm() <= 1.0) return Direction<3>(v);
  }
}
}  // namespace

TEST_CASE("grid indexing round-trips and covers the sweep box") {
  auto g = std_grid<3>(0.1);
  CHECK(g->covers_ball(1.5));
  CHECK(g->extents()[0] % VoxelGrid<3>::lattice_refinement(0.1, g->h()) == 0);
  for (std::int64_t k : {std::int64_t(0), std::int64_t(12345), g->size() - 1})
    CHECK(g->linear(g->unlinear(k)) == k);
}

TEST_CASE("mask measure is popcount times cell volume") {
  auto g = std_grid<3>(0.2, 4.0);
  auto empty = SetMask<3>::empty(g);
  CHECK(empty.measure() == 0.0);
  auto ball = SetMask<3>::from_predicate(
      g, [](const Vec<3>& x) { return x.squaredNorm() <= 1.0; });
  std::int64_t n = 0;
  ball.for_each([&](std::int64_t) { ++n; });
  CHECK(n == ball.popcount());
  CHECK(ball.measure() == doctest::Approx(static_cast<double>(n) * std::pow(g->h(), 3)));
}

TEST_CASE("ball mask converges to the analytic volume") {
  // h = 0.01 via delta = 0.08 at factor 8
  auto g = std_grid<3>(0.08);
  REQUIRE(g->h() == doctest::Approx(0.01));
  auto ball = SetMask<3>::from_predicate(
      g, [](const Vec<3>& x) { return x.squaredNorm() <= 1.0; });
  CHECK(ball.measure() == doctest::Approx(4.0 * kPi / 3.0).epsilon(0.01));
}

TEST_CASE("refinement convergence of the ball measure") {
  auto coarse = std_grid<3>(0.16);  // h = 0.02
  auto fine = std_grid<3>(0.08);    // h = 0.01
  auto pred = [](const Vec<3>& x) { return x.squaredNorm() <= 1.0; };
  auto m1 = SetMask<3>::from_predicate(coarse, pred);
  auto m2 = SetMask<3>::from_predicate(fine, pred);
  CHECK(std::abs(m1.measure() - m2.measure()) <= 30.0 * coarse->h());
}

TEST_CASE("rasterized tube matches tube_contains exactly") {
  auto g = std_grid<3>(0.1);
  CounterRng rng(3);
  for (int it = 0; it < 5; ++it) {
    Tube<3> t(rand_dir(rng),
              Vec<3>(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)),
              0.1);
    auto vox = rasterize_tube(*g, t);
    CHECK(std::is_sorted(vox.begin(), vox.end()));
    // every reported voxel satisfies the predicate
    for (std::int64_t k : vox) CHECK(tube_contains(t, g->center(k)));
    // spot-check the complement on a bounding window
    std::int64_t misses = 0;
    for (int s = 0; s < 20000; ++s) {
      std::int64_t k = static_cast<std::int64_t>(rng.next_below(
          static_cast<std::uint64_t>(g->size())));
      bool inside = tube_contains(t, g->center(k));
      bool listed = std::binary_search(vox.begin(), vox.end(), k);
      if (inside != listed) ++misses;
    }
    CHECK(misses == 0);
  }
}

TEST_CASE("rasterized tube measure approximates the analytic volume") {
  CounterRng rng(5);
  for (double delta : {0.1, 0.05}) {
    auto g = std_grid<3>(delta);
    for (int it = 0; it < 10; ++it) {
      Tube<3> t(rand_dir(rng),
                Vec<3>(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)),
                delta);
      double vol = static_cast<double>(tube_voxel_count(*g, t)) * g->cell_volume();
      CHECK(vol == doctest::Approx(tube_volume(t)).epsilon(0.05));
    }
  }
}

TEST_CASE("tube fully outside the box rasterizes to nothing") {
  auto g = std_grid<3>(0.1);
  Tube<3> t(Direction<3>(Vec<3>(1, 0, 0)), Vec<3>(50, 0, 0), 0.1);
  CHECK(rasterize_tube(*g, t).empty());
}

TEST_CASE("parallel separated tubes have disjoint voxel lists") {
  auto g = std_grid<3>(0.1);
  Tube<3> a(Direction<3>(Vec<3>(1, 0, 0)), Vec<3>(0, 0, 0), 0.1);
  Tube<3> b(Direction<3>(Vec<3>(1, 0, 0)), Vec<3>(0, 0.5, 0), 0.1);
  auto va = rasterize_tube(*g, a), vb = rasterize_tube(*g, b);
  std::vector<std::int64_t> inter;
  std::set_intersection(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(inter));
  CHECK(inter.empty());
}

TEST_CASE("intersection measure basics") {
  auto g = std_grid<3>(0.1);
  Tube<3> t(Direction<3>(Vec<3>(1, 0, 0)), Vec<3>::Zero(), 0.1);
  auto full = SetMask<3>::from_predicate(g, [](const Vec<3>&) { return true; });
  CHECK(intersection_measure(full, t) == doctest::Approx(tube_volume(t)).epsilon(0.05));
  auto empty = SetMask<3>::empty(g);
  CHECK(intersection_measure(empty, t) == 0.0);
  auto self = tube_mask(g, t);
  CHECK(intersection_count(self, t) == self.popcount());
}

TEST_CASE("intersection measure is monotone in the mask") {
  auto g = std_grid<3>(0.2, 4.0);
  CounterRng rng(9);
  auto small = SetMask<3>::from_predicate(
      g, [](const Vec<3>& x) { return x.squaredNorm() <= 0.25; });
  auto big = SetMask<3>::from_predicate(
      g, [](const Vec<3>& x) { return x.squaredNorm() <= 0.8; });
  REQUIRE(small.subset_of(big));
  for (int it = 0; it < 30; ++it) {
    Tube<3> t(rand_dir(rng),
              Vec<3>(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)),
              0.2);
    CHECK(intersection_count(small, t) <= intersection_count(big, t));
  }
}

TEST_CASE("annulus restriction") {
  auto g = std_grid<3>(0.1);
  auto ball = SetMask<3>::from_predicate(
      g, [](const Vec<3>& x) { return x.squaredNorm() <= 1.0; });
  Line<3> xaxis{Vec<3>::Zero(), Direction<3>(Vec<3>(1, 0, 0))};

  auto all = annulus_restrict(ball, xaxis, 0.0, std::numeric_limits<double>::infinity());
  CHECK(all.popcount() == ball.popcount());

  // dyadic annuli plus core partition the mask
  double delta = 0.1;
  std::int64_t total = 0;
  total += ball.filter([&](const Vec<3>& y) {
    return dist_point_line(y, xaxis) < delta;
  }).popcount();
  for (int k = 0; k < 6; ++k) {
    double lo = delta * std::pow(2.0, k), hi = delta * std::pow(2.0, k + 1);
    total += annulus_restrict(ball, xaxis, lo, hi).popcount();
  }
  CHECK(total == ball.popcount());

  // analytic shell volume: cylinder shell [0.5, 1) inside the unit ball,
  // vol = (4pi/3)(1 - r^2)^{3/2} evaluated between the radii
  auto shell = annulus_restrict(ball, xaxis, 0.5, 1.0);
  double analytic = 4.0 * kPi / 3.0 * std::pow(1.0 - 0.25, 1.5);
  CHECK(shell.measure() == doctest::Approx(analytic).epsilon(0.02));
}

TEST_CASE("ball complement restriction") {
  auto g = std_grid<3>(0.2, 4.0);
  auto ball = SetMask<3>::from_predicate(
      g, [](const Vec<3>& x) { return x.squaredNorm() <= 1.0; });
  const Vec<3> origin = Vec<3>::Zero();
  CHECK(ball_complement_restrict(ball, origin, 0.0).popcount() == ball.popcount());
  CHECK(ball_complement_restrict(ball, origin, 100.0).popcount() == 0);
  auto outside = ball_complement_restrict(ball, Vec<3>(0.2, 0, 0), 0.5);
  auto inside = ball.filter(
      [](const Vec<3>& y) { return (y - Vec<3>(0.2, 0, 0)).squaredNorm() < 0.25; });
  CHECK(outside.popcount() + inside.popcount() == ball.popcount());
}

TEST_CASE("mask file round-trip is bit-exact") {
  auto g = std_grid<2>(0.1);
  CounterRng rng(31);
  auto m = SetMask<2>::from_predicate(g, [&](const Vec<2>& x) {
    return std::sin(40.0 * x[0]) * std::cos(31.0 * x[1]) > 0.3;
  });
  std::stringstream ss;
  write_mask(ss, m);
  auto back = read_mask<2>(ss);
  CHECK(back.grid() == m.grid());
  CHECK(back.words() == m.words());

  std::stringstream ss2;
  write_mask(ss2, m);
  CHECK(ss.str() == ss2.str());
}
