#include <doctest.h>

#include <cmath>

#include "kakeya/geometry.hpp"
#include "kakeya/rng.hpp"

using namespace kakeya;

namespace {
Vec<3> v3(double x, double y, double z) { return Vec<3>(x, y, z); }

Vec<3> random_unit(CounterRng& rng) {
  for (;;) {
    Vec<3> v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double n = v.norm();
    if (n > 0.1 && n <= 1.0) return v / n;
  }
}
}  // namespace

TEST_CASE("angle basics") {
  Direction<3> e1(v3(1, 0, 0)), e2(v3(0, 1, 0));
  CHECK(angle(e1, e1) == doctest::Approx(0.0));
  CHECK(angle(e1, e2) == doctest::Approx(kPi / 2));
  CHECK(angle(e1, Direction<3>(v3(-1, 0, 0))) == doctest::Approx(kPi));
  // normalization at the boundary: scaled input gives the same direction
  CHECK(angle(Direction<3>(v3(3, 0, 0)), e1) == doctest::Approx(0.0));
}

TEST_CASE("angle triangle inequality on sampled triples") {
  CounterRng rng(7);
  for (int it = 0; it < 300; ++it) {
    Direction<3> a(random_unit(rng)), b(random_unit(rng)), c(random_unit(rng));
    CHECK(angle(a, c) <= angle(a, b) + angle(b, c) + 1e-9);
    CHECK(angle(a, b) == doctest::Approx(angle(b, a)));
  }
}

TEST_CASE("tube containment from the defining inequalities") {
  Tube<3> t(Direction<3>(v3(1, 0, 0)), Vec<3>::Zero(), 0.1);
  CHECK(tube_contains(t, v3(0.49, 0, 0)));
  CHECK_FALSE(tube_contains(t, v3(0, 0.11, 0)));
  // |x_perp| = sqrt(0.0098) < 0.1
  CHECK(tube_contains(t, v3(0.4, 0.07, 0.07)));
  CHECK_FALSE(tube_contains(t, v3(0.51, 0, 0)));
}

TEST_CASE("tube containment is rigid-motion invariant") {
  CounterRng rng(11);
  Tube<3> t(Direction<3>(v3(1, 0, 0)), Vec<3>::Zero(), 0.1);
  for (int it = 0; it < 200; ++it) {
    Vec<3> x(rng.uniform(-0.8, 0.8), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    // skip points too close to the boundary for a 1e-9 claim
    Vec<3> u = x;
    double ax = u[0];
    double r2 = u.squaredNorm() - ax * ax;
    if (std::abs(std::abs(ax) - 0.5) < 1e-6) continue;
    if (std::abs(r2 - 0.01) < 1e-6) continue;

    // random rotation from two angles, plus a translation
    double a = rng.uniform(0, 2 * kPi), b = rng.uniform(0, kPi);
    Eigen::Matrix3d rot =
        (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()))
            .toRotationMatrix();
    Vec<3> shift(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    Tube<3> t2(Direction<3>((rot * t.direction().vec()).eval()),
               (rot * t.center() + shift).eval(), t.radius());
    CHECK(tube_contains(t, x) == tube_contains(t2, (rot * x + shift).eval()));
  }
}

TEST_CASE("tube volume") {
  Tube<2> t2(Direction<2>(Vec<2>(1, 0)), Vec<2>::Zero(), 0.1);
  CHECK(tube_volume(t2) == doctest::Approx(0.2));
  Tube<3> t3(Direction<3>(v3(1, 0, 0)), Vec<3>::Zero(), 0.1);
  CHECK(tube_volume(t3) == doctest::Approx(kPi * 0.01));
  Tube<3> t3b(Direction<3>(v3(1, 0, 0)), Vec<3>::Zero(), 0.05);
  CHECK(tube_volume(t3b) == doctest::Approx(kPi * 0.0025));
}

TEST_CASE("point-line distance") {
  Line<3> xaxis{Vec<3>::Zero(), Direction<3>(v3(1, 0, 0))};
  CHECK(dist_point_line(v3(0.3, 0.2, 0), xaxis) == doctest::Approx(0.2));
  CHECK(dist_point_line(v3(5.0, 0, 0), xaxis) == doctest::Approx(0.0));
  CHECK(dist_point_line(v3(0, 3, 4), xaxis) == doctest::Approx(5.0));
}

TEST_CASE("wedge point: intersection and skew midpoint") {
  Line<3> g1{Vec<3>::Zero(), Direction<3>(v3(1, 0, 0))};
  Line<3> g2{Vec<3>::Zero(), Direction<3>(v3(0, 1, 0))};
  CHECK(wedge_point(g1, g2).norm() == doctest::Approx(0.0));

  Line<3> g3{v3(0, 0, 1), Direction<3>(v3(0, 1, 0))};
  Vec<3> q = wedge_point(g1, g3);
  CHECK(q[0] == doctest::Approx(0.0));
  CHECK(q[1] == doctest::Approx(0.0));
  CHECK(q[2] == doctest::Approx(0.5));

  Line<3> par{v3(0, 1, 0), Direction<3>(v3(1, 0, 0))};
  CHECK_THROWS_AS((void)wedge_point(g1, par), degenerate_geometry_error);
}

TEST_CASE("wedge point minimizes the distance sum (brute-force oracle)") {
  CounterRng rng(23);
  for (int it = 0; it < 20; ++it) {
    Line<3> g1{v3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
               Direction<3>(random_unit(rng))};
    Line<3> g2{v3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
               Direction<3>(random_unit(rng))};
    if (angle(g1.dir, g2.dir) < 0.2 || angle(g1.dir, g2.dir) > kPi - 0.2) continue;
    Vec<3> q = wedge_point(g1, g2);
    double at_q = dist_point_line(q, g1) + dist_point_line(q, g2);
    // line-to-line distance via the closest-point construction
    double s, t;
    REQUIRE(detail::closest_line_params(g1, g2, s, t));
    double dll = (g1.point + s * g1.dir.vec() - g2.point - t * g2.dir.vec()).norm();
    CHECK(at_q == doctest::Approx(dll).epsilon(1e-6));
    // brute grid search cannot beat it
    double best = at_q;
    for (int i = 0; i < 4000; ++i) {
      Vec<3> x = q + 0.3 * v3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      best = std::min(best, dist_point_line(x, g1) + dist_point_line(x, g2));
    }
    CHECK(at_q <= best + 1e-9);
  }
}

TEST_CASE("wedge weight") {
  Line<3> g1{Vec<3>::Zero(), Direction<3>(v3(1, 0, 0))};
  Line<3> g2{Vec<3>::Zero(), Direction<3>(v3(0, 1, 0))};
  const Vec<3> origin = Vec<3>::Zero();
  CHECK(wedge_weight(origin, g1, g2) == doctest::Approx(0.0));
  CHECK(wedge_weight(v3(0.25, 0, 0), g1, g2) == doctest::Approx(0.5));
  CHECK(wedge_weight(v3(0, 0, 1), g1, g2) == doctest::Approx(1.0));
}

TEST_CASE("tube intersection predicate") {
  Tube<3> t1(Direction<3>(v3(1, 0, 0)), Vec<3>::Zero(), 0.1);
  CHECK(tubes_intersect(t1, t1));
  Tube<3> far(Direction<3>(v3(1, 0, 0)), v3(0, 10, 0), 0.1);
  CHECK_FALSE(tubes_intersect(t1, far));
  Tube<3> perp(Direction<3>(v3(0, 1, 0)), Vec<3>::Zero(), 0.05);
  Tube<3> t1s(Direction<3>(v3(1, 0, 0)), Vec<3>::Zero(), 0.05);
  CHECK(tubes_intersect(t1s, perp));
}

TEST_CASE("direction nets: size bounds and separation") {
  auto net = make_direction_net<2>(0.5);
  CHECK(net.size() >= 7);
  CHECK(net.size() <= 12);
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = i + 1; j < net.size(); ++j)
      CHECK(angle(net.dir(i), net.dir(j)) >= 0.5 - 1e-12);

  auto net3 = make_direction_net<2>(kPi / 3);
  CHECK(net3.size() >= 4);
  CHECK(net3.size() <= 6);
}

TEST_CASE("direction net on S^2: separation and candidate covering") {
  const double sep = 0.5;
  auto net = make_direction_net<3>(sep);
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = i + 1; j < net.size(); ++j)
      CHECK(angle(net.dir(i), net.dir(j)) >= sep - 1e-12);
  // maximality relative to the candidate sequence: every candidate lies
  // within sep of some member
  for (const auto& cand : DirectionNet<3>::candidate_sequence(sep)) {
    double best = 10.0;
    for (std::size_t i = 0; i < net.size(); ++i)
      best = std::min(best, angle(net.dir(i), Direction<3>(cand)));
    CHECK(best <= sep + 1e-12);
  }
  // total quadrature weight is the sphere measure
  CHECK(net.total_weight() == doctest::Approx(4 * kPi).epsilon(1e-9));
}

TEST_CASE("direction net rejects bad separation") {
  CHECK_THROWS_AS((void)make_direction_net<3>(0.0), parameter_error);
  CHECK_THROWS_AS((void)make_direction_net<3>(2.0), parameter_error);
}
