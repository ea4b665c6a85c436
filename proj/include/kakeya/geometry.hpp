#pragma once

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "kakeya/common.hpp"

namespace kakeya {

// Unit vector on S^{d-1}. Construction normalizes, so callers may pass any
// nonzero vector; the homogeneous extension f(lambda*xi) = f(xi) is realized
// by this normalization at the API boundary.
template <int D>
class Direction {
 public:
  Direction() { v_.setZero(); v_[0] = 1.0; }
  explicit Direction(const Vec<D>& v) {
    double n = v.norm();
    if (!(n > 0.0)) throw parameter_error("Direction: zero vector");
    v_ = v / n;
  }
  const Vec<D>& vec() const { return v_; }
  double operator[](int i) const { return v_[i]; }

 private:
  Vec<D> v_;
};

// Angle between two unit vectors, in [0, pi].
template <int D>
inline double angle(const Direction<D>& a, const Direction<D>& b) {
  double c = a.vec().dot(b.vec());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

// Infinite line through `point` in direction `dir`.
template <int D>
struct Line {
  Vec<D> point;
  Direction<D> dir;
};

// Euclidean distance from y to the infinite line g.
template <int D>
inline double dist_point_line(const Vec<D>& y, const Line<D>& g) {
  Vec<D> u = y - g.point;
  double t = u.dot(g.dir.vec());
  double r2 = u.squaredNorm() - t * t;
  return r2 > 0.0 ? std::sqrt(r2) : 0.0;
}

// Solid tube of unit length and cross-sectional radius `radius` around the
// axis through `center` in direction `dir`.
template <int D>
class Tube {
 public:
  Tube(const Direction<D>& dir, const Vec<D>& center, double radius)
      : dir_(dir), center_(center), radius_(radius) {
    if (!(radius > 0.0)) throw parameter_error("Tube: radius must be positive");
  }
  const Direction<D>& direction() const { return dir_; }
  const Vec<D>& center() const { return center_; }
  double radius() const { return radius_; }
  Line<D> axis() const { return Line<D>{center_, dir_}; }
  Vec<D> endpoint(int sign) const { return center_ + 0.5 * sign * dir_.vec(); }

 private:
  Direction<D> dir_;
  Vec<D> center_;
  double radius_;
};

// Membership test straight from the defining inequalities:
// |(x-a).xi| <= 1/2 and |(x-a)^perp| <= radius.
// This is the single containment predicate used by every grid computation.
template <int D>
inline bool tube_contains(const Tube<D>& t, const Vec<D>& x) {
  Vec<D> u = x - t.center();
  double ax = u.dot(t.direction().vec());
  if (std::abs(ax) > 0.5) return false;
  double r2 = u.squaredNorm() - ax * ax;
  return r2 <= t.radius() * t.radius();
}

// Analytic Lebesgue measure: a 1 x 2r rectangle in d=2, a unit-length
// cylinder of radius r in d=3.
template <int D>
inline double tube_volume(const Tube<D>& t) {
  if constexpr (D == 2)
    return 2.0 * t.radius();
  else
    return kPi * t.radius() * t.radius();
}

namespace detail {

// Closest-point parameters (s, t) of two infinite lines; returns false when
// the lines are parallel within tol.
template <int D>
inline bool closest_line_params(const Line<D>& g1, const Line<D>& g2, double& s,
                                double& t, double ang_tol = 1e-9) {
  const Vec<D> u = g1.dir.vec(), v = g2.dir.vec();
  const Vec<D> w = g1.point - g2.point;
  double b = u.dot(v);
  double denom = 1.0 - b * b;  // sin^2 of the angle
  double a_tol = std::sin(ang_tol);
  if (denom <= a_tol * a_tol) return false;
  double d = u.dot(w), e = v.dot(w);
  s = (b * e - d) / denom;
  t = (e - b * d) / denom;
  return true;
}

}  // namespace detail

// The point minimizing dist(x,g1)+dist(x,g2). For intersecting lines this is
// the intersection; for skew lines every point of the common perpendicular
// segment is a minimizer and we return its midpoint.
template <int D>
inline Vec<D> wedge_point(const Line<D>& g1, const Line<D>& g2) {
  double s, t;
  if (!detail::closest_line_params(g1, g2, s, t))
    throw degenerate_geometry_error("wedge_point: parallel axes");
  Vec<D> p1 = g1.point + s * g1.dir.vec();
  Vec<D> p2 = g2.point + t * g2.dir.vec();
  return 0.5 * (p1 + p2);
}

// w^j_xi(y) = dist(y, wedge point)^{1/2}.
template <int D>
inline double wedge_weight(const Vec<D>& y, const Line<D>& g_j, const Line<D>& g_xi) {
  return std::sqrt((y - wedge_point(g_j, g_xi)).norm());
}

// Minimum distance between two segments, each given by endpoints.
// Sunday's parametric clamping method.
template <int D>
inline double segment_distance(const Vec<D>& p0, const Vec<D>& p1, const Vec<D>& q0,
                               const Vec<D>& q1) {
  const Vec<D> u = p1 - p0, v = q1 - q0, w = p0 - q0;
  const double a = u.squaredNorm(), b = u.dot(v), c = v.squaredNorm();
  const double d = u.dot(w), e = v.dot(w);
  const double den = a * c - b * b;
  const double small = 1e-14;
  double sN, sD = den, tN, tD = den;
  if (den < small * a * c + small) {
    sN = 0.0; sD = 1.0; tN = e; tD = c;
  } else {
    sN = b * e - c * d;
    tN = a * e - b * d;
    if (sN < 0.0) { sN = 0.0; tN = e; tD = c; }
    else if (sN > sD) { sN = sD; tN = e + b; tD = c; }
  }
  if (tN < 0.0) {
    tN = 0.0;
    if (-d < 0.0) sN = 0.0;
    else if (-d > a) sN = sD;
    else { sN = -d; sD = a; }
  } else if (tN > tD) {
    tN = tD;
    if (-d + b < 0.0) sN = 0.0;
    else if (-d + b > a) sN = sD;
    else { sN = -d + b; sD = a; }
  }
  double sc = std::abs(sN) < small ? 0.0 : sN / sD;
  double tc = std::abs(tN) < small ? 0.0 : tN / tD;
  return (w + sc * u - tc * v).norm();
}

// Two solid tubes share a point iff their axis segments come within the sum
// of the radii. Exact for the cylinder model up to end-cap rounding, which
// sits below grid resolution.
template <int D>
inline bool tubes_intersect(const Tube<D>& t1, const Tube<D>& t2) {
  double d = segment_distance<D>(t1.endpoint(-1), t1.endpoint(+1), t2.endpoint(-1),
                                 t2.endpoint(+1));
  return d <= t1.radius() + t2.radius();
}

// Maximal sep-separated subset of S^{d-1} with equal quadrature weights.
// Built greedily over a fixed-order dense candidate sequence (uniform order
// on S^1, Fibonacci-lattice order on S^2), so the result is deterministic
// for fixed (d, sep). Every candidate of the sequence lies within `sep` of
// some member; the candidate spacing is ~sep/8, so the whole sphere is
// covered at radius sep up to that spacing.
template <int D>
class DirectionNet {
 public:
  static DirectionNet build(double sep) {
    if (!(sep > 0.0) || !(sep < kPi / 2))
      throw parameter_error("DirectionNet: sep must lie in (0, pi/2)");
    DirectionNet net;
    net.sep_ = sep;
    if constexpr (D == 2) {
      const int k = std::max(64, static_cast<int>(std::ceil(2.0 * kPi / (sep / 16.0))));
      net.greedy_fill(candidates_s1(k), sep);
    } else {
      const int n = static_cast<int>(std::ceil(180.0 / (sep * sep)));
      net.greedy_fill(candidates_s2(n), sep);
    }
    net.weight_ = sphere_measure<D>() / static_cast<double>(net.dirs_.size());
    return net;
  }

  // Candidate sequence used by build(); exposed so tests can verify the
  // covering property exhaustively over it.
  static std::vector<Vec<D>> candidate_sequence(double sep) {
    if constexpr (D == 2) {
      const int k = std::max(64, static_cast<int>(std::ceil(2.0 * kPi / (sep / 16.0))));
      return candidates_s1(k);
    } else {
      const int n = static_cast<int>(std::ceil(180.0 / (sep * sep)));
      return candidates_s2(n);
    }
  }

  std::size_t size() const { return dirs_.size(); }
  const Direction<D>& dir(std::size_t i) const { return dirs_[i]; }
  const std::vector<Direction<D>>& dirs() const { return dirs_; }
  double sep() const { return sep_; }
  double weight(std::size_t) const { return weight_; }
  double total_weight() const { return weight_ * static_cast<double>(dirs_.size()); }

  // Index of the nearest member to v.
  std::size_t nearest(const Vec<D>& v) const {
    std::size_t best = 0;
    double bc = -2.0;
    Vec<D> u = v.normalized();
    for (std::size_t i = 0; i < dirs_.size(); ++i) {
      double c = dirs_[i].vec().dot(u);
      if (c > bc) { bc = c; best = i; }
    }
    return best;
  }

 private:
  static std::vector<Vec<D>> candidates_s1(int k) {
    std::vector<Vec<D>> out;
    if constexpr (D == 2) {
      out.reserve(k);
      for (int i = 0; i < k; ++i) {
        double a = 2.0 * kPi * i / k;
        Vec<2> v; v << std::cos(a), std::sin(a);
        out.push_back(v);
      }
    }
    return out;
  }

  static std::vector<Vec<D>> candidates_s2(int n) {
    std::vector<Vec<D>> out;
    if constexpr (D == 3) {
      out.reserve(n);
      const double ga = kPi * (3.0 - std::sqrt(5.0));  // golden angle
      for (int i = 0; i < n; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / n;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double th = ga * i;
        Vec<3> v; v << r * std::cos(th), r * std::sin(th), z;
        out.push_back(v);
      }
    }
    return out;
  }

  void greedy_fill(const std::vector<Vec<D>>& cand, double sep) {
    // chord-length threshold equivalent to the angular separation
    const double chord2 = 2.0 - 2.0 * std::cos(sep);
    const double cell = std::sqrt(chord2);
    auto key = [&](const Vec<D>& v) {
      std::int64_t k = 0;
      for (int i = 0; i < D; ++i) {
        auto c = static_cast<std::int64_t>(std::floor(v[i] / cell)) + 512;
        k = k * 2048 + c;
      }
      return k;
    };
    std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets;
    auto far_from_all = [&](const Vec<D>& v) {
      std::array<std::int64_t, D> base;
      for (int i = 0; i < D; ++i)
        base[i] = static_cast<std::int64_t>(std::floor(v[i] / cell)) + 512;
      std::array<int, D> off{};
      // scan the 3^D neighborhood of v's bucket
      int total = 1;
      for (int i = 0; i < D; ++i) total *= 3;
      for (int t = 0; t < total; ++t) {
        int rem = t;
        std::int64_t k = 0;
        for (int i = 0; i < D; ++i) {
          off[i] = rem % 3 - 1;
          rem /= 3;
          k = k * 2048 + base[i] + off[i];
        }
        auto it = buckets.find(k);
        if (it == buckets.end()) continue;
        for (std::size_t j : it->second)
          if ((dirs_[j].vec() - v).squaredNorm() < chord2) return false;
      }
      return true;
    };
    for (const auto& v : cand) {
      if (far_from_all(v)) {
        dirs_.emplace_back(Direction<D>(v));
        buckets[key(v)].push_back(dirs_.size() - 1);
      }
    }
  }

  std::vector<Direction<D>> dirs_;
  double sep_ = 0.0;
  double weight_ = 0.0;
};

template <int D>
inline DirectionNet<D> make_direction_net(double sep) {
  return DirectionNet<D>::build(sep);
}

}  // namespace kakeya
