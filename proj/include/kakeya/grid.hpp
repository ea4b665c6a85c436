#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "kakeya/common.hpp"
#include "kakeya/geometry.hpp"
#include "kakeya/parallel.hpp"

namespace kakeya {

// Axis-aligned voxelization of a box. Voxel (i_0,...,i_{D-1}) has its center
// at origin + (i+1/2)h per axis; linear indices run with axis 0 fastest.
template <int D>
class VoxelGrid {
 public:
  VoxelGrid(const Vec<D>& origin, double h, const IVec<D>& extents)
      : origin_(origin), h_(h), extents_(extents) {
    if (!(h > 0.0)) throw parameter_error("VoxelGrid: h must be positive");
    std::int64_t stride = 1;
    for (int i = 0; i < D; ++i) {
      if (extents[i] <= 0 || extents[i] > (std::int64_t(1) << 31))
        throw parameter_error("VoxelGrid: bad extent");
      strides_[i] = stride;
      stride *= extents[i];
    }
    size_ = stride;
  }

  // Cube [-W,W]^d sized for maximal-function sweeps at tube radius `delta`:
  // W is a multiple of the translation-lattice spacing and the box covers
  // every tube whose translate can meet a set supported in B(0,1).
  static VoxelGrid standard(double delta, double h) {
    std::int64_t r = lattice_refinement(delta, h);
    double s = static_cast<double>(r) * h;
    double need = 2.0 + 2.0 * delta + 4.0 * s + 6.0 * h;
    auto ncells = static_cast<std::int64_t>(std::ceil(need / s));
    double w = static_cast<double>(ncells) * s;
    Vec<D> origin;
    IVec<D> ext;
    for (int i = 0; i < D; ++i) {
      origin[i] = -w;
      ext[i] = 2 * ncells * r;
    }
    return VoxelGrid(origin, h, ext);
  }

  // Voxels per translation-lattice step: the nearest grid multiple of
  // delta/2 (never below one voxel).
  static std::int64_t lattice_refinement(double delta, double h) {
    return std::max<std::int64_t>(1, std::llround(delta / (2.0 * h)));
  }

  double h() const { return h_; }
  const Vec<D>& origin() const { return origin_; }
  const IVec<D>& extents() const { return extents_; }
  std::int64_t size() const { return size_; }
  double cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= h_;
    return v;
  }

  std::int64_t linear(const IVec<D>& idx) const {
    std::int64_t k = 0;
    for (int i = D - 1; i >= 0; --i) k = k * extents_[i] + idx[i];
    return k;
  }
  IVec<D> unlinear(std::int64_t k) const {
    IVec<D> idx;
    for (int i = 0; i < D; ++i) {
      idx[i] = k % extents_[i];
      k /= extents_[i];
    }
    return idx;
  }
  Vec<D> center(const IVec<D>& idx) const {
    Vec<D> x;
    for (int i = 0; i < D; ++i) x[i] = origin_[i] + (idx[i] + 0.5) * h_;
    return x;
  }
  Vec<D> center(std::int64_t k) const { return center(unlinear(k)); }

  bool covers_ball(double radius) const {
    for (int i = 0; i < D; ++i) {
      if (origin_[i] > -radius) return false;
      if (origin_[i] + extents_[i] * h_ < radius) return false;
    }
    return true;
  }

  bool operator==(const VoxelGrid& o) const {
    return h_ == o.h_ && origin_ == o.origin_ && extents_ == o.extents_;
  }

 private:
  Vec<D> origin_;
  double h_;
  IVec<D> extents_;
  std::array<std::int64_t, D> strides_;
  std::int64_t size_ = 0;
};

using GridPtr2 = std::shared_ptr<const VoxelGrid<2>>;
using GridPtr3 = std::shared_ptr<const VoxelGrid<3>>;

// Immutable voxel membership bitset over a shared grid. The measure is the
// exact bit count times h^d.
template <int D>
class SetMask {
 public:
  using Grid = VoxelGrid<D>;

  SetMask(std::shared_ptr<const Grid> grid, std::vector<std::uint64_t> bits)
      : grid_(std::move(grid)), bits_(std::move(bits)) {
    const auto nw = static_cast<std::size_t>((grid_->size() + 63) / 64);
    if (bits_.size() != nw) throw parameter_error("SetMask: bit storage size mismatch");
    trim_tail();
    count_ = 0;
    for (auto w : bits_) count_ += std::popcount(w);
  }

  static SetMask empty(std::shared_ptr<const Grid> grid) {
    auto nw = static_cast<std::size_t>((grid->size() + 63) / 64);
    return SetMask(std::move(grid), std::vector<std::uint64_t>(nw, 0));
  }

  // Center-point sampling: voxel is set iff pred(center).
  static SetMask from_predicate(std::shared_ptr<const Grid> grid,
                                const std::function<bool(const Vec<D>&)>& pred) {
    const std::int64_t n = grid->size();
    const auto nw = static_cast<std::size_t>((n + 63) / 64);
    std::vector<std::uint64_t> bits(nw, 0);
    const Grid* g = grid.get();
    constexpr std::size_t kChunk = 1024;  // words per task
    parallel_for((nw + kChunk - 1) / kChunk, [&](std::size_t ci) {
      for (std::size_t w = ci * kChunk; w < std::min(nw, (ci + 1) * kChunk); ++w) {
        std::uint64_t word = 0;
        const std::int64_t base = static_cast<std::int64_t>(w) * 64;
        const int hi = static_cast<int>(std::min<std::int64_t>(64, n - base));
        for (int b = 0; b < hi; ++b)
          if (pred(g->center(base + b))) word |= std::uint64_t(1) << b;
        bits[w] = word;
      }
    });
    return SetMask(std::move(grid), std::move(bits));
  }

  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  const Grid& grid() const { return *grid_; }
  const std::vector<std::uint64_t>& words() const { return bits_; }
  std::int64_t popcount() const { return count_; }
  double measure() const { return static_cast<double>(count_) * grid_->cell_volume(); }

  bool test(std::int64_t k) const {
    return (bits_[static_cast<std::size_t>(k >> 6)] >> (k & 63)) & 1;
  }

  // Calls fn(linear_index) for every set voxel, in ascending index order.
  template <class F>
  void for_each(F&& fn) const {
    for (std::size_t w = 0; w < bits_.size(); ++w) {
      std::uint64_t word = bits_[w];
      while (word) {
        int b = std::countr_zero(word);
        fn(static_cast<std::int64_t>(w) * 64 + b);
        word &= word - 1;
      }
    }
  }

  // New mask keeping the set voxels whose centers satisfy keep().
  SetMask filter(const std::function<bool(const Vec<D>&)>& keep) const {
    std::vector<std::uint64_t> out(bits_.size(), 0);
    const Grid* g = grid_.get();
    constexpr std::size_t kChunk = 1024;
    parallel_for((bits_.size() + kChunk - 1) / kChunk, [&](std::size_t ci) {
      for (std::size_t w = ci * kChunk; w < std::min(bits_.size(), (ci + 1) * kChunk); ++w) {
        std::uint64_t word = bits_[w], res = 0;
        while (word) {
          int b = std::countr_zero(word);
          word &= word - 1;
          const std::int64_t k = static_cast<std::int64_t>(w) * 64 + b;
          if (keep(g->center(k))) res |= std::uint64_t(1) << b;
        }
        out[w] = res;
      }
    });
    return SetMask(grid_, std::move(out));
  }

  SetMask set_and(const SetMask& o) const {
    require_same_grid(o);
    std::vector<std::uint64_t> out(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] & o.bits_[i];
    return SetMask(grid_, std::move(out));
  }
  SetMask set_or(const SetMask& o) const {
    require_same_grid(o);
    std::vector<std::uint64_t> out(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] | o.bits_[i];
    return SetMask(grid_, std::move(out));
  }

  bool subset_of(const SetMask& o) const {
    require_same_grid(o);
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] & ~o.bits_[i]) return false;
    return true;
  }

 private:
  void require_same_grid(const SetMask& o) const {
    if (!(grid() == o.grid())) throw parameter_error("SetMask: grid mismatch");
  }
  void trim_tail() {
    const int tail = static_cast<int>(grid_->size() & 63);
    if (tail && !bits_.empty()) bits_.back() &= (std::uint64_t(1) << tail) - 1;
  }

  std::shared_ptr<const Grid> grid_;
  std::vector<std::uint64_t> bits_;
  std::int64_t count_ = 0;
};

namespace detail {

// Visits the grid voxels of one axis-0 column that lie inside the tube.
// A conservative interval comes from the axial/radial quadratics; each voxel
// in it is confirmed with the canonical predicate, so the visited set is
// exactly {centers satisfying tube_contains}.
template <int D, class F>
inline void visit_tube_column(const VoxelGrid<D>& g, const Tube<D>& t,
                              const IVec<D>& col, F&& fn) {
  const Vec<D>& xi = t.direction().vec();
  const Vec<D>& a = t.center();
  Vec<D> p = g.center(col);  // x-coordinate will be overwritten
  double w0 = 0.0, c2 = 0.0;
  for (int i = 1; i < D; ++i) {
    double di = p[i] - a[i];
    w0 += di * xi[i];
    c2 += di * di;
  }
  const double r = t.radius();
  double lo = -1e30, hi = 1e30;  // in t = x - a_x
  // axial window
  if (std::abs(xi[0]) > 1e-14) {
    double t1 = (-0.5 - w0) / xi[0], t2 = (0.5 - w0) / xi[0];
    lo = std::max(lo, std::min(t1, t2));
    hi = std::min(hi, std::max(t1, t2));
  } else if (std::abs(w0) > 0.5) {
    return;
  }
  // radial window: (1-xi0^2) t^2 - 2 xi0 w0 t + c2 - w0^2 - r^2 <= 0
  const double A = 1.0 - xi[0] * xi[0];
  const double B = -2.0 * xi[0] * w0;
  const double C = c2 - w0 * w0 - r * r;
  if (A > 1e-14) {
    double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) return;
    double sq = std::sqrt(disc);
    lo = std::max(lo, (-B - sq) / (2.0 * A));
    hi = std::min(hi, (-B + sq) / (2.0 * A));
  } else if (C > 0.0) {
    return;
  }
  if (lo > hi) return;
  const double x0 = g.origin()[0], h = g.h();
  auto ilo = static_cast<std::int64_t>(std::floor((a[0] + lo - x0) / h - 0.5)) - 1;
  auto ihi = static_cast<std::int64_t>(std::ceil((a[0] + hi - x0) / h - 0.5)) + 1;
  ilo = std::max<std::int64_t>(ilo, 0);
  ihi = std::min<std::int64_t>(ihi, g.extents()[0] - 1);
  if (ilo > ihi) return;
  const std::int64_t base = g.linear(col);
  for (std::int64_t i = ilo; i <= ihi; ++i) {
    p[0] = x0 + (i + 0.5) * h;
    if (tube_contains(t, p)) fn(base + (i - col[0]), p);
  }
}

template <int D, class F>
inline void visit_tube(const VoxelGrid<D>& g, const Tube<D>& t, F&& fn) {
  // AABB of the tube, clamped to the grid
  IVec<D> lo, hi;
  for (int i = 0; i < D; ++i) {
    double reach = 0.5 * std::abs(t.direction()[i]) + t.radius() + g.h();
    auto l = static_cast<std::int64_t>(
        std::floor((t.center()[i] - reach - g.origin()[i]) / g.h()));
    auto u = static_cast<std::int64_t>(
        std::ceil((t.center()[i] + reach - g.origin()[i]) / g.h()));
    lo[i] = std::max<std::int64_t>(l, 0);
    hi[i] = std::min<std::int64_t>(u, g.extents()[i] - 1);
    if (lo[i] > hi[i]) return;
  }
  IVec<D> col = lo;
  col[0] = 0;
  for (;;) {
    visit_tube_column(g, t, col, fn);
    int ax = 1;
    while (ax < D) {
      if (++col[ax] <= hi[ax]) break;
      col[ax] = lo[ax];
      ++ax;
    }
    if (ax == D) break;
  }
}

}  // namespace detail

// Exactly the voxels whose centers satisfy tube_contains, as ascending
// linear indices (canonical order).
template <int D>
inline std::vector<std::int64_t> rasterize_tube(const VoxelGrid<D>& g, const Tube<D>& t) {
  std::vector<std::int64_t> out;
  detail::visit_tube(g, t, [&](std::int64_t k, const Vec<D>&) { out.push_back(k); });
  std::sort(out.begin(), out.end());
  return out;
}

// Number of grid voxel centers inside the tube.
template <int D>
inline std::int64_t tube_voxel_count(const VoxelGrid<D>& g, const Tube<D>& t) {
  std::int64_t n = 0;
  detail::visit_tube(g, t, [&](std::int64_t, const Vec<D>&) { ++n; });
  return n;
}

// Voxel count of m inside the tube.
template <int D>
inline std::int64_t intersection_count(const SetMask<D>& m, const Tube<D>& t) {
  std::int64_t n = 0;
  detail::visit_tube(m.grid(), t, [&](std::int64_t k, const Vec<D>&) {
    if (m.test(k)) ++n;
  });
  return n;
}

// |E ∩ T| at grid resolution.
template <int D>
inline double intersection_measure(const SetMask<D>& m, const Tube<D>& t) {
  return static_cast<double>(intersection_count(m, t)) * m.grid().cell_volume();
}

// Voxels of m whose centers y satisfy lo <= dist(y, g) < hi.
template <int D>
inline SetMask<D> annulus_restrict(const SetMask<D>& m, const Line<D>& line, double lo,
                                   double hi) {
  if (!(lo >= 0.0) || !(lo < hi)) throw parameter_error("annulus_restrict: need 0 <= lo < hi");
  return m.filter([&](const Vec<D>& y) {
    double d = dist_point_line(y, line);
    return d >= lo && d < hi;
  });
}

// Voxels of m with |center - a| >= r.
template <int D>
inline SetMask<D> ball_complement_restrict(const SetMask<D>& m, const Vec<D>& a, double r) {
  if (!(r >= 0.0)) throw parameter_error("ball_complement_restrict: r must be >= 0");
  const double r2 = r * r;
  return m.filter([&](const Vec<D>& y) { return (y - a).squaredNorm() >= r2; });
}

// Mask of one tube on the grid.
template <int D>
inline SetMask<D> tube_mask(std::shared_ptr<const VoxelGrid<D>> grid, const Tube<D>& t) {
  auto nw = static_cast<std::size_t>((grid->size() + 63) / 64);
  std::vector<std::uint64_t> bits(nw, 0);
  detail::visit_tube(*grid, t, [&](std::int64_t k, const Vec<D>&) {
    bits[static_cast<std::size_t>(k >> 6)] |= std::uint64_t(1) << (k & 63);
  });
  return SetMask<D>(std::move(grid), std::move(bits));
}

}  // namespace kakeya
