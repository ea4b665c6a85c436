#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kakeya/common.hpp"
#include "kakeya/geometry.hpp"
#include "kakeya/grid.hpp"
#include "kakeya/inequalities.hpp"
#include "kakeya/multiplicity.hpp"
#include "kakeya/rng.hpp"

namespace kakeya {

enum class ConstructionKind {
  ball,
  slab,
  hollow_cylinder,
  disjoint_tubes,
  bush,
  brush,
  random_family,
  perron_tree,
};

inline const char* to_string(ConstructionKind k) {
  switch (k) {
    case ConstructionKind::ball: return "ball";
    case ConstructionKind::slab: return "slab";
    case ConstructionKind::hollow_cylinder: return "hollow_cylinder";
    case ConstructionKind::disjoint_tubes: return "disjoint_tubes";
    case ConstructionKind::bush: return "bush";
    case ConstructionKind::brush: return "brush";
    case ConstructionKind::random_family: return "random_family";
    case ConstructionKind::perron_tree: return "perron_tree";
  }
  return "?";
}

inline ConstructionKind construction_from_string(const std::string& s) {
  for (auto k : {ConstructionKind::ball, ConstructionKind::slab,
                 ConstructionKind::hollow_cylinder, ConstructionKind::disjoint_tubes,
                 ConstructionKind::bush, ConstructionKind::brush,
                 ConstructionKind::random_family, ConstructionKind::perron_tree})
    if (s == to_string(k)) return k;
  throw parameter_error("unknown construction: " + s);
}

// Named construction plus a numeric parameter record and a seed. Identical
// spec, grid and delta produce bit-identical output.
struct ConstructionSpec {
  ConstructionKind kind = ConstructionKind::ball;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  double get(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

template <int D>
struct BuiltSet {
  SetMask<D> mask;
  std::optional<TubeFamily<D>> family;
};

namespace detail {

// All members of the separated net inside the cap of radius cap_r around
// `center`, in net order; throws if fewer than `need` are available.
template <int D>
inline std::vector<Direction<D>> cap_subnet(double sep, const Vec<D>& center, double cap_r,
                                            std::size_t need, const DirectionNet<D>* net) {
  std::vector<Direction<D>> out;
  const Direction<D> c(center);
  auto take_from = [&](const std::vector<Direction<D>>& dirs) {
    for (const auto& d : dirs)
      if (angle(d, c) <= cap_r) out.push_back(d);
  };
  if (net != nullptr) {
    take_from(net->dirs());
  } else {
    const auto full = make_direction_net<D>(sep);
    take_from(full.dirs());
  }
  if (out.size() < need)
    throw parameter_error("construction: cap holds only " + std::to_string(out.size()) +
                          " of " + std::to_string(need) + " requested delta-separated directions");
  return out;
}

template <int D>
inline SetMask<D> union_of_tubes(std::shared_ptr<const VoxelGrid<D>> grid,
                                 const std::vector<Tube<D>>& tubes) {
  std::vector<std::uint64_t> bits(static_cast<std::size_t>((grid->size() + 63) / 64), 0);
  for (const auto& t : tubes)
    visit_tube(*grid, t, [&](std::int64_t k, const Vec<D>&) {
      bits[static_cast<std::size_t>(k >> 6)] |= std::uint64_t(1) << (k & 63);
    });
  return SetMask<D>(std::move(grid), std::move(bits));
}

inline Vec<2> rot2(const Vec<2>& v, double ang) {
  const double c = std::cos(ang), s = std::sin(ang);
  return Vec<2>(c * v[0] - s * v[1], s * v[0] + c * v[1]);
}

struct Triangle2 {
  std::array<Vec<2>, 3> v;
  bool contains(const Vec<2>& p) const {
    auto side = [](const Vec<2>& a, const Vec<2>& b, const Vec<2>& c) {
      return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    };
    const double d1 = side(v[0], v[1], p);
    const double d2 = side(v[1], v[2], p);
    const double d3 = side(v[2], v[0], p);
    const bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    const bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(neg && pos);
  }
  void translate(const Vec<2>& t) {
    for (auto& p : v) p += t;
  }
};

// Bisection-and-overlap tree over the fan of 2^levels wedges of the triangle
// with base [x0, x1] at y = ybase and common apex. At each merge the right
// half slides left by a third of the pair width, overlapping the halves in a
// 2/3-scale copy of the pair.
inline std::vector<Triangle2> perron_pieces(double x0, double x1, double ybase,
                                            const Vec<2>& apex, int levels) {
  if (levels == 0) {
    Triangle2 t;
    t.v = {Vec<2>(x0, ybase), Vec<2>(x1, ybase), apex};
    return {t};
  }
  const double mid = 0.5 * (x0 + x1);
  auto left = perron_pieces(x0, mid, ybase, apex, levels - 1);
  auto right = perron_pieces(mid, x1, ybase, apex, levels - 1);
  const Vec<2> shift(-(x1 - x0) / 3.0, 0.0);
  for (auto& t : right) t.translate(shift);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

}  // namespace detail

// Union of translated triangle pieces from iterated bisection-and-overlap of
// two 90-degree-rotated triangles; every direction keeps a full-height
// segment inside some piece while the union area shrinks with the level.
inline SetMask<2> perron_tree_2d(std::shared_ptr<const VoxelGrid<2>> grid, double delta,
                                 int levels) {
  if (levels < 1) throw parameter_error("perron_tree_2d: levels must be >= 1");
  (void)delta;
  const double c = 0.30, w = 2.0 * c;  // apex half-height and base half-width
  auto pieces = detail::perron_pieces(-w, w, -c, Vec<2>(0.0, c), levels);
  // recenter the tree bounding box at the origin
  double lo = 1e30, hi = -1e30;
  for (const auto& t : pieces)
    for (const auto& p : t.v) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
  const Vec<2> center(-0.5 * (lo + hi), 0.0);
  std::vector<detail::Triangle2> all;
  for (auto t : pieces) {
    t.translate(center);
    all.push_back(t);
  }
  // second copy rotated by 90 degrees covers the remaining directions
  for (auto t : pieces) {
    t.translate(center);
    for (auto& p : t.v) p = detail::rot2(p, kPi / 2.0);
    all.push_back(t);
  }
  return SetMask<2>::from_predicate(std::move(grid), [all](const Vec<2>& p) {
    for (const auto& t : all)
      if (t.contains(p)) return true;
    return false;
  });
}

// Build the named construction on the given grid. `net`, when supplied, must
// be make_direction_net<D>(delta); it only short-circuits that computation.
template <int D>
inline BuiltSet<D> build_construction(const ConstructionSpec& spec,
                                      std::shared_ptr<const VoxelGrid<D>> grid, double delta,
                                      const DirectionNet<D>* net = nullptr) {
  const auto axis1 = [] {
    Vec<D> v = Vec<D>::Zero();
    v[0] = 1.0;
    return v;
  }();
  const auto axis_last = [] {
    Vec<D> v = Vec<D>::Zero();
    v[D - 1] = 1.0;
    return v;
  }();

  switch (spec.kind) {
    case ConstructionKind::ball: {
      const double r = spec.get("r", 1.0);
      if (!(r > 0.0)) throw parameter_error("ball: r must be positive");
      auto mask = SetMask<D>::from_predicate(
          grid, [r](const Vec<D>& x) { return x.squaredNorm() <= r * r; });
      return {std::move(mask), std::nullopt};
    }
    case ConstructionKind::slab: {
      const double t = spec.get("thickness", delta);
      auto mask = SetMask<D>::from_predicate(grid, [t](const Vec<D>& x) {
        return std::abs(x[D - 1]) <= t && x.squaredNorm() <= 1.0;
      });
      return {std::move(mask), std::nullopt};
    }
    case ConstructionKind::hollow_cylinder: {
      const double sigma = spec.get("sigma", 0.4);
      const double hl = spec.get("half_length", 1.0);
      auto mask = SetMask<D>::from_predicate(grid, [sigma, hl](const Vec<D>& x) {
        double yp2 = 0.0;
        for (int i = 1; i < D; ++i) yp2 += x[i] * x[i];
        return std::abs(x[0]) <= hl && yp2 >= sigma * sigma / 4.0 && yp2 <= sigma * sigma;
      });
      return {std::move(mask), std::nullopt};
    }
    case ConstructionKind::bush: {
      const auto m = static_cast<std::size_t>(spec.get("m", 20));
      const double cap_r = spec.get("cap", 0.4);
      const double lambda = spec.get("lambda", 1.0);
      auto dirs = detail::cap_subnet<D>(delta, axis1, cap_r, m, net);
      dirs.resize(m);
      std::vector<Tube<D>> tubes;
      tubes.reserve(m);
      const Vec<D> origin = Vec<D>::Zero();
      for (const auto& d : dirs) tubes.emplace_back(d, origin, delta);
      auto mask = detail::union_of_tubes<D>(grid, tubes);
      auto fam = TubeFamily<D>::validated(std::move(tubes), lambda, mask);
      return {std::move(mask), std::move(fam)};
    }
    case ConstructionKind::brush: {
      const auto m = static_cast<std::size_t>(spec.get("m", 20));
      const double cap_r = spec.get("cap", 0.4);
      const double lambda = spec.get("lambda", 1.0);
      const double span = spec.get("span", 0.3);
      auto dirs = detail::cap_subnet<D>(delta, axis_last, cap_r, m, net);
      dirs.resize(m);
      std::vector<Tube<D>> tubes;
      tubes.reserve(m);
      for (std::size_t j = 0; j < m; ++j) {
        const double u = m == 1 ? 0.0
                                : -span + 2.0 * span * static_cast<double>(j) /
                                              static_cast<double>(m - 1);
        tubes.emplace_back(dirs[j], (u * axis1).eval(), delta);
      }
      auto mask = detail::union_of_tubes<D>(grid, tubes);
      auto fam = TubeFamily<D>::validated(std::move(tubes), lambda, mask);
      return {std::move(mask), std::move(fam)};
    }
    case ConstructionKind::random_family: {
      const auto m = static_cast<std::size_t>(spec.get("m", 20));
      const double cap_r = spec.get("cap", 0.5);
      const double lambda = spec.get("lambda", 1.0);
      auto pool = detail::cap_subnet<D>(delta, axis1, cap_r, m, net);
      CounterRng rng(spec.seed, 17);
      // partial Fisher-Yates over the pool
      std::vector<std::size_t> perm(pool.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      for (std::size_t i = 0; i < m; ++i) {
        const auto k = i + static_cast<std::size_t>(rng.next_below(perm.size() - i));
        std::swap(perm[i], perm[k]);
      }
      std::vector<Tube<D>> tubes;
      tubes.reserve(m);
      for (std::size_t j = 0; j < m; ++j) {
        Vec<D> cvec;
        for (;;) {
          for (int i = 0; i < D; ++i) cvec[i] = rng.uniform(-0.42, 0.42);
          if (cvec.squaredNorm() <= 0.42 * 0.42) break;
        }
        tubes.emplace_back(pool[perm[j]], cvec, delta);
      }
      auto mask = detail::union_of_tubes<D>(grid, tubes);
      auto fam = TubeFamily<D>::validated(std::move(tubes), lambda, mask);
      return {std::move(mask), std::move(fam)};
    }
    case ConstructionKind::disjoint_tubes: {
      const auto m = static_cast<std::size_t>(spec.get("m", D == 3 ? 10 : 5));
      const double lambda = spec.get("lambda", 1.0);
      const double h = grid->h();
      std::vector<Tube<D>> tubes;
      if constexpr (D == 3) {
        // horizontal layers; within a layer, tubes tilt in-plane so that
        // directions stay delta-separated while axes remain at layer height
        const double gap_z = 2.0 * delta + h * 2.0 + 0.02;
        const std::size_t per_layer = 2;
        const auto nlayers = (m + per_layer - 1) / per_layer;
        const double z0 = -0.5 * static_cast<double>(nlayers - 1) * gap_z;
        const double phi_step = std::max(0.4, 3.6 * delta);
        std::size_t placed = 0;
        for (std::size_t l = 0; l < nlayers && placed < m; ++l) {
          const double phi = phi_step * static_cast<double>(l);
          const double z = z0 + static_cast<double>(l) * gap_z;
          for (std::size_t i = 0; i < per_layer && placed < m; ++i, ++placed) {
            const double tilt = (i == 0 ? -1.0 : 1.0) * 0.8 * delta;
            Vec<3> dir(std::cos(phi + tilt), std::sin(phi + tilt), 0.0);
            const Vec<3> norm(-std::sin(phi), std::cos(phi), 0.0);
            const double off = (i == 0 ? -1.0 : 1.0) * (0.26 + 0.55 * delta);
            tubes.emplace_back(Direction<3>(dir), (off * norm + z * Vec<3>(0, 0, 1)).eval(),
                               delta);
          }
        }
      } else {
        const double gap_y = 2.0 * delta + h * 2.0 + 0.6 * delta * static_cast<double>(m) + 0.01;
        const double y0 = -0.5 * static_cast<double>(m - 1) * gap_y;
        for (std::size_t j = 0; j < m; ++j) {
          const double tilt =
              (j % 2 == 0 ? 1.0 : -1.0) * (1.0 + static_cast<double>(j / 2)) * 1.05 * delta;
          Vec<2> dir(std::cos(tilt), std::sin(tilt));
          tubes.emplace_back(Direction<2>(dir),
                             Vec<2>(0.0, y0 + static_cast<double>(j) * gap_y), delta);
        }
      }
      auto mask = detail::union_of_tubes<D>(grid, tubes);
      // placement contract: rasterized tubes pairwise disjoint
      std::vector<std::vector<std::int64_t>> vox(tubes.size());
      for (std::size_t j = 0; j < tubes.size(); ++j) vox[j] = rasterize_tube(*grid, tubes[j]);
      for (std::size_t i = 0; i < tubes.size(); ++i)
        for (std::size_t j = i + 1; j < tubes.size(); ++j) {
          std::vector<std::int64_t> inter;
          std::set_intersection(vox[i].begin(), vox[i].end(), vox[j].begin(), vox[j].end(),
                                std::back_inserter(inter));
          if (!inter.empty())
            throw parameter_error("disjoint_tubes: placement produced intersecting tubes");
        }
      auto fam = TubeFamily<D>::validated(std::move(tubes), lambda, mask);
      return {std::move(mask), std::move(fam)};
    }
    case ConstructionKind::perron_tree: {
      if constexpr (D == 2) {
        const int levels = static_cast<int>(
            spec.get("levels", std::ceil(log2_inv(delta))));
        return {perron_tree_2d(grid, delta, levels), std::nullopt};
      } else {
        throw parameter_error("perron_tree: only d = 2 is supported");
      }
    }
  }
  throw parameter_error("build_construction: unhandled kind");
}

// ---------------------------------------------------------------------------
// Delta sweep: per-delta norms of the maximal field of the construction and
// the log-log exponent fit of ||f*||_q / ||chi_E||_p against delta.
// ---------------------------------------------------------------------------

struct SweepOptions {
  double grid_factor = 8.0;  // h = delta / grid_factor
  double eps = 0.1;          // epsilon in the discrete inequality
  bool family_checks = true; // evaluate the volume-bound / chain ratios for families
};

template <int D>
inline SweepOutcome delta_sweep(const ConstructionSpec& spec,
                                const std::vector<double>& deltas, ExponentPair ex,
                                SweepOptions opt = {}) {
  if (deltas.size() < 3) throw parameter_error("delta_sweep: need at least 3 scales");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (!(deltas[i] < deltas[i - 1]))
      throw parameter_error("delta_sweep: scales must be strictly decreasing");

  SweepOutcome out;
  std::vector<double> ratios;
  for (double delta : deltas) {
    auto grid = std::make_shared<const VoxelGrid<D>>(
        VoxelGrid<D>::standard(delta, delta / opt.grid_factor));
    const auto net = make_direction_net<D>(delta);
    auto built = build_construction<D>(spec, grid, delta, &net);
    const auto field = kakeya_maximal(built.mask, delta, net);

    SweepRecord rec;
    rec.delta = delta;
    rec.measure_e = built.mask.measure();
    rec.lp = std::pow(rec.measure_e, 1.0 / ex.p);
    rec.lq = lp_norm_sphere(field, ex.q);
    rec.ratio = rec.lp > 0.0 ? rec.lq / rec.lp : 0.0;

    double best_ratio = 0.0;
    std::int64_t best_m = 0;
    for (double lam = delta; lam <= 1.0 + 1e-12; lam += delta) {
      const auto di = check_discrete_inequality<D>(field, rec.measure_e, lam, opt.eps, ex);
      if (di.ratio > best_ratio) {
        best_ratio = di.ratio;
        best_m = di.m_lambda;
      }
    }
    rec.discrete_ratio = best_ratio;
    rec.m_lambda = best_m;

    if (opt.family_checks && built.family.has_value()) {
      const auto ctx = FamilyContext<D>::build(*built.family);
      const auto n_min = minimal_low_n(ctx);
      const auto vb = check_low_multiplicity_volume_bound(ctx, n_min);
      rec.lemma41_ratio = vb.rhs > 0.0 ? vb.lhs / vb.rhs : 0.0;
      if constexpr (D == 3) {
        const auto rep = find_high_pair(ctx);
        if (rep.found && !rep.scenario2_witnesses.empty()) {
          const auto chain = check_sigma_tube_chain(ctx, rep.scenario2_witnesses.front(),
                                                    rep.nu, rep.nu_prime, rep.n_min, opt.eps);
          rec.lemma51_min_ratio =
              std::min(std::min(chain.m0_ratio, chain.avg_min_ratio),
                       std::min(chain.l2_ratio, chain.mass_ratio));
        }
      }
    }
    out.records.push_back(rec);
    ratios.push_back(rec.ratio);
  }
  out.fit = fit_exponent(deltas, ratios);
  return out;
}

}  // namespace kakeya
