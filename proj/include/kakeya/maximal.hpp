#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "kakeya/common.hpp"
#include "kakeya/geometry.hpp"
#include "kakeya/grid.hpp"
#include "kakeya/parallel.hpp"

namespace kakeya {

// Values of a maximal operator sampled on a direction set, with the witness
// tube center realizing each value. tube_counts[i] is the voxel count of the
// direction's reference tube (the discrete normalizer).
template <int D>
struct MaximalField {
  std::vector<Direction<D>> dirs;
  std::vector<double> values;
  std::vector<Vec<D>> witnesses;
  std::vector<std::int64_t> tube_counts;
  double delta = 0.0;
  double quad_weight = 0.0;  // per-direction surface weight; 0 if not net-built

  std::size_t size() const { return dirs.size(); }
  double max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
};

namespace detail {

// Context for the translation sweep. Candidates live on the axis-aligned
// lattice of spacing s = r*h anchored at world zero, so every candidate tube
// meets the voxel lattice in a translate of one per-direction stencil and the
// voxel normalizer #T is a per-direction constant.
template <int D>
struct SweepContext {
  const SetMask<D>* mask = nullptr;
  double delta = 0.0;
  double cap = 2.0;          // |a| <= cap restriction
  std::int64_t r = 1;        // voxels per lattice step
  double s = 0.0;            // lattice spacing
  IVec<D> vox_lo, vox_hi;    // support bounding box (voxel indices)
  IVec<D> cell_lo, cell_hi;  // candidate cell range = support cells +- oext
  std::int64_t oext = 0;     // stencil reach in cells, per axis
  IVec<D> dims;              // candidate array dims, cell_hi-cell_lo+2
  bool empty = false;

  static SweepContext build(const SetMask<D>& m, double delta, double cap) {
    SweepContext c;
    c.mask = &m;
    c.delta = delta;
    c.cap = cap;
    const auto& g = m.grid();
    const double h = g.h();
    if (h > delta / 4.0 + 1e-12)
      throw configuration_error("maximal sweep: resolution violation (h > delta/4)");
    c.r = VoxelGrid<D>::lattice_refinement(delta, h);
    c.s = static_cast<double>(c.r) * h;
    for (int i = 0; i < D; ++i) {
      if (g.extents()[i] % c.r != 0)
        throw configuration_error("maximal sweep: grid extents not lattice-aligned");
      double q = g.origin()[i] / c.s;
      if (std::abs(q - std::llround(q)) > 1e-9)
        throw configuration_error("maximal sweep: grid origin off the translation lattice");
    }
    if (m.popcount() == 0) {
      c.empty = true;
      return c;
    }
    for (int i = 0; i < D; ++i) {
      c.vox_lo[i] = std::numeric_limits<std::int64_t>::max();
      c.vox_hi[i] = -1;
    }
    m.for_each([&](std::int64_t k) {
      IVec<D> idx = g.unlinear(k);
      for (int i = 0; i < D; ++i) {
        c.vox_lo[i] = std::min(c.vox_lo[i], idx[i]);
        c.vox_hi[i] = std::max(c.vox_hi[i], idx[i]);
      }
    });
    c.oext = static_cast<std::int64_t>(std::ceil((0.5 + delta) / c.s)) + 2;
    for (int i = 0; i < D; ++i) {
      c.cell_lo[i] = c.vox_lo[i] / c.r - c.oext;
      c.cell_hi[i] = c.vox_hi[i] / c.r + c.oext;
      c.dims[i] = c.cell_hi[i] - c.cell_lo[i] + 2;  // +1 fringe for run ends
      double alo = g.origin()[i] + c.s * static_cast<double>(c.cell_lo[i]);
      double ahi = g.origin()[i] + c.s * static_cast<double>(c.cell_hi[i]);
      if (alo - (0.5 + delta + h) < g.origin()[i] - 1e-12 ||
          ahi + (0.5 + delta + h) > g.origin()[i] + g.extents()[i] * h + 1e-12)
        throw configuration_error("maximal sweep: grid box too small for the translation lattice");
    }
    return c;
  }

  Vec<D> candidate_point(const IVec<D>& cell) const {
    Vec<D> a;
    for (int i = 0; i < D; ++i)
      a[i] = mask->grid().origin()[i] + s * static_cast<double>(cell[i]);
    return a;
  }

  IVec<D> reference_cell() const {
    IVec<D> z0;
    for (int i = 0; i < D; ++i) z0[i] = mask->grid().extents()[i] / r / 2;
    return z0;
  }
};

// Per-direction scatter stencil: for a voxel of class c (its position mod r),
// cls[c] lists (d0, d1) pairs meaning "+1 at diff[base+d0], -1 at
// diff[base+d1]" with base the voxel's cell index in the candidate array.
// Built by evaluating the canonical tube_contains predicate at a reference
// cell; den is the constant voxel count of every candidate tube.
template <int D>
struct DirStencil {
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> cls;
  std::array<std::int64_t, D> stride{};
  int kaxis = 0;
  std::int64_t den = 0;
};

template <int D>
inline DirStencil<D> build_stencil(const SweepContext<D>& c, const Direction<D>& dir) {
  const auto& g = c.mask->grid();
  const double delta = c.delta;
  DirStencil<D> st;
  st.kaxis = 0;
  for (int i = 1; i < D; ++i)
    if (std::abs(dir[i]) > std::abs(dir[st.kaxis])) st.kaxis = i;
  {
    std::int64_t acc = c.dims[st.kaxis];
    st.stride[st.kaxis] = 1;
    for (int i = 0; i < D; ++i) {
      if (i == st.kaxis) continue;
      st.stride[i] = acc;
      acc *= c.dims[i];
    }
  }
  const IVec<D> z0 = c.reference_cell();
  const std::int64_t oe = c.oext;
  std::size_t nclasses = 1;
  for (int i = 0; i < D; ++i) nclasses *= static_cast<std::size_t>(c.r);
  st.cls.resize(nclasses);

  std::array<int, D> perp_axes{};
  int np = 0;
  for (int i = 0; i < D; ++i)
    if (i != st.kaxis) perp_axes[np++] = i;

  IVec<D> cls_idx = IVec<D>::Zero();
  for (;;) {
    IVec<D> vidx;
    for (int i = 0; i < D; ++i) vidx[i] = z0[i] * c.r + cls_idx[i];
    const Vec<D> vref = g.center(vidx);
    std::size_t cl = 0;
    for (int i = D - 1; i >= 0; --i)
      cl = cl * static_cast<std::size_t>(c.r) + static_cast<std::size_t>(cls_idx[i]);
    auto& entries = st.cls[cl];

    std::array<std::int64_t, 2> pcur{};
    for (int p = 0; p < np; ++p) pcur[p] = -oe;
    IVec<D> off = IVec<D>::Zero();
    for (;;) {
      for (int p = 0; p < np; ++p) off[perp_axes[p]] = pcur[p];
      off[st.kaxis] = -oe;
      Vec<D> col0 = c.candidate_point(z0 + off);
      off[st.kaxis] = oe;
      Vec<D> col1 = c.candidate_point(z0 + off);
      double dseg = segment_distance<D>(col0, col1, vref - 0.5 * dir.vec(),
                                        vref + 0.5 * dir.vec());
      if (dseg <= delta + 2.0 * c.s) {
        std::int64_t run_start = 0;
        bool in_run = false;
        for (std::int64_t k = -oe; k <= oe + 1; ++k) {
          bool inside = false;
          if (k <= oe) {
            off[st.kaxis] = k;
            inside = tube_contains(Tube<D>(dir, c.candidate_point(z0 + off), delta), vref);
          }
          if (inside && !in_run) {
            run_start = k;
            in_run = true;
          } else if (!inside && in_run) {
            in_run = false;
            std::int64_t base = 0;
            for (int p = 0; p < np; ++p) base += pcur[p] * st.stride[perp_axes[p]];
            entries.emplace_back(
                static_cast<std::int32_t>(base + run_start * st.stride[st.kaxis]),
                static_cast<std::int32_t>(base + k * st.stride[st.kaxis]));
            st.den += k - run_start;
          }
        }
      }
      int p = 0;
      while (p < np) {
        if (++pcur[p] <= oe) break;
        pcur[p] = -oe;
        ++p;
      }
      if (p == np) break;
    }
    int ax = 0;
    while (ax < D) {
      if (++cls_idx[ax] < c.r) break;
      cls_idx[ax] = 0;
      ++ax;
    }
    if (ax == D) break;
  }
  return st;
}

template <int D>
struct SweepBest {
  std::int64_t count = 0;
  Vec<D> witness = Vec<D>::Zero();
  std::int64_t den = 1;
};

template <int D>
inline SweepBest<D> sweep_direction(const SweepContext<D>& c, const Direction<D>& dir) {
  SweepBest<D> out;
  if (c.empty) return out;
  const auto& g = c.mask->grid();
  const DirStencil<D> st = build_stencil(c, dir);
  out.den = st.den;

  std::int64_t total = 1;
  for (int i = 0; i < D; ++i) total *= c.dims[i];
  static thread_local std::vector<std::int32_t> diff;
  diff.assign(static_cast<std::size_t>(total), 0);

  // per-axis tables: voxel index -> cell contribution / class digit
  std::array<std::vector<std::int32_t>, D> cell_part;
  std::array<std::vector<std::int32_t>, D> cls_digit;
  for (int i = 0; i < D; ++i) {
    cell_part[i].resize(static_cast<std::size_t>(c.vox_hi[i] + 1));
    cls_digit[i].resize(static_cast<std::size_t>(c.vox_hi[i] + 1));
    for (std::int64_t v = c.vox_lo[i]; v <= c.vox_hi[i]; ++v) {
      cell_part[i][static_cast<std::size_t>(v)] =
          static_cast<std::int32_t>((v / c.r - c.cell_lo[i]) * st.stride[i]);
      cls_digit[i][static_cast<std::size_t>(v)] = static_cast<std::int32_t>(v % c.r);
    }
  }

  // scatter votes from all set voxels
  const auto& words = c.mask->words();
  IVec<D> row = c.vox_lo;
  for (;;) {
    std::int64_t rowbase = 0;
    std::int32_t cellbase = 0;
    std::size_t clsbase = 0;
    for (int i = D - 1; i >= 1; --i) rowbase = (rowbase + row[i]) * g.extents()[i - 1];
    for (int i = 1; i < D; ++i) cellbase += cell_part[i][static_cast<std::size_t>(row[i])];
    for (int i = D - 1; i >= 1; --i)
      clsbase = clsbase * static_cast<std::size_t>(c.r) +
                static_cast<std::size_t>(cls_digit[i][static_cast<std::size_t>(row[i])]);

    const std::int64_t k0 = rowbase + c.vox_lo[0], k1 = rowbase + c.vox_hi[0];
    for (std::int64_t w = k0 >> 6; w <= (k1 >> 6); ++w) {
      std::uint64_t word = words[static_cast<std::size_t>(w)];
      if (!word) continue;
      const std::int64_t wbase = w << 6;
      if (wbase < k0) word &= ~((std::uint64_t(1) << (k0 - wbase)) - 1);
      if (k1 - wbase + 1 < 64) word &= (std::uint64_t(1) << (k1 - wbase + 1)) - 1;
      while (word) {
        const int b = std::countr_zero(word);
        word &= word - 1;
        const auto x = static_cast<std::size_t>(wbase + b - rowbase);
        const std::int32_t base = cellbase + cell_part[0][x];
        const auto& entries =
            st.cls[clsbase * static_cast<std::size_t>(c.r) +
                   static_cast<std::size_t>(cls_digit[0][x])];
        for (const auto& e : entries) {
          ++diff[static_cast<std::size_t>(base + e.first)];
          --diff[static_cast<std::size_t>(base + e.second)];
        }
      }
    }
    int ax = 1;
    while (ax < D) {
      if (++row[ax] <= c.vox_hi[ax]) break;
      row[ax] = c.vox_lo[ax];
      ++ax;
    }
    if (ax == D) break;
  }

  // prefix along the k axis (unit stride)
  {
    const std::int64_t nk = c.dims[st.kaxis];
    for (std::int64_t r0 = 0; r0 < total / nk; ++r0) {
      std::int32_t acc = 0;
      std::int32_t* p = diff.data() + r0 * nk;
      for (std::int64_t k = 0; k < nk; ++k) {
        acc += p[k];
        p[k] = acc;
      }
    }
  }

  // canonical scan order (last axis slowest); strict > keeps the first
  // maximizer, so results do not depend on the thread count
  const double cap2 = c.cap * c.cap;
  IVec<D> cell = c.cell_lo;
  std::int64_t best = -1;
  IVec<D> bestcell = c.cell_lo;
  for (;;) {
    double a2 = 0.0;
    std::int64_t idx = 0;
    for (int i = 0; i < D; ++i) {
      const double ai = g.origin()[i] + c.s * static_cast<double>(cell[i]);
      a2 += ai * ai;
      idx += (cell[i] - c.cell_lo[i]) * st.stride[i];
    }
    if (a2 <= cap2) {
      const std::int32_t v = diff[static_cast<std::size_t>(idx)];
      if (v > best) {
        best = v;
        bestcell = cell;
      }
    }
    int ax = 0;
    while (ax < D) {
      if (++cell[ax] <= c.cell_hi[ax]) break;
      cell[ax] = c.cell_lo[ax];
      ++ax;
    }
    if (ax == D) break;
  }
  out.count = std::max<std::int64_t>(best, 0);
  if (out.count > 0) out.witness = c.candidate_point(bestcell);
  return out;
}

}  // namespace detail

// Spacing of the translation-candidate lattice on this grid.
template <int D>
inline double translation_lattice_spacing(const VoxelGrid<D>& g, double delta) {
  return static_cast<double>(VoxelGrid<D>::lattice_refinement(delta, g.h())) * g.h();
}

// Kakeya maximal values for an arbitrary direction list: per direction, the
// maximum over the translation lattice (spacing ~delta/2, |a| <= cap) of the
// discrete tube average #(E ∩ T) / #T.
template <int D>
inline MaximalField<D> kakeya_maximal_dirs(const SetMask<D>& m, double delta,
                                           const std::vector<Direction<D>>& dirs,
                                           double cap = 2.0) {
  const auto ctx = detail::SweepContext<D>::build(m, delta, cap);
  MaximalField<D> f;
  f.dirs = dirs;
  f.delta = delta;
  f.values.resize(dirs.size());
  f.witnesses.resize(dirs.size());
  f.tube_counts.resize(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) {
    const auto r = detail::sweep_direction(ctx, f.dirs[i]);
    f.values[i] = r.den > 0 ? static_cast<double>(r.count) / static_cast<double>(r.den) : 0.0;
    f.witnesses[i] = r.witness;
    f.tube_counts[i] = r.den;
  });
  return f;
}

template <int D>
inline MaximalField<D> kakeya_maximal(const SetMask<D>& m, double delta,
                                      const DirectionNet<D>& net, double cap = 2.0) {
  if (std::abs(net.sep() - delta) > 1e-12)
    throw parameter_error("kakeya_maximal: net separation must equal delta");
  auto f = kakeya_maximal_dirs(m, delta, net.dirs(), cap);
  f.quad_weight = net.weight(0);
  return f;
}

// Discrete tube average with the same normalizer convention as the sweep.
template <int D>
inline double tube_average(const SetMask<D>& m, const Tube<D>& t) {
  const std::int64_t den = tube_voxel_count(m.grid(), t);
  if (den == 0) return 0.0;
  return static_cast<double>(intersection_count(m, t)) / static_cast<double>(den);
}

// Brute-force reference for tests: same candidate lattice, counts taken with
// the canonical predicate per candidate.
template <int D>
inline MaximalField<D> kakeya_maximal_reference(const SetMask<D>& m, double delta,
                                                const std::vector<Direction<D>>& dirs,
                                                double cap = 2.0) {
  const auto ctx = detail::SweepContext<D>::build(m, delta, cap);
  MaximalField<D> f;
  f.dirs = dirs;
  f.delta = delta;
  f.values.resize(dirs.size());
  f.witnesses.resize(dirs.size());
  f.tube_counts.resize(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    std::int64_t best = 0;
    Vec<D> bw = Vec<D>::Zero();
    std::int64_t den = 1;
    if (!ctx.empty) {
      IVec<D> cell = ctx.cell_lo;
      for (;;) {
        const Vec<D> a = ctx.candidate_point(cell);
        if (a.squaredNorm() <= cap * cap) {
          const std::int64_t n = intersection_count(m, Tube<D>(dirs[i], a, delta));
          if (n > best) {
            best = n;
            bw = a;
          }
        }
        int ax = 0;
        while (ax < D) {
          if (++cell[ax] <= ctx.cell_hi[ax]) break;
          cell[ax] = ctx.cell_lo[ax];
          ++ax;
        }
        if (ax == D) break;
      }
      den = tube_voxel_count(m.grid(),
                             Tube<D>(dirs[i], ctx.candidate_point(ctx.reference_cell()), delta));
    }
    f.values[i] = static_cast<double>(best) / static_cast<double>(den);
    f.witnesses[i] = bw;
    f.tube_counts[i] = den;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Auxiliary maximal function: sup over tubes meeting ref_tube at angle in
// [theta/2, theta] of the (optionally wedge-weighted) tube average, zero for
// directions outside the angle window. Normalized by the analytic |T|.
// ---------------------------------------------------------------------------

struct AuxOptions {
  bool weighted = true;
  double cap = 2.0;
};

template <int D>
inline MaximalField<D> auxiliary_maximal(const SetMask<D>& m, double delta, double theta,
                                         const Tube<D>& ref_tube,
                                         const std::vector<Direction<D>>& dirs,
                                         AuxOptions opt = {}) {
  if (std::abs(ref_tube.radius() - delta) > 1e-12)
    throw parameter_error("auxiliary_maximal: ref tube radius must equal delta");
  const auto& g = m.grid();
  if (g.h() > delta / 4.0 + 1e-12)
    throw configuration_error("auxiliary_maximal: resolution violation (h > delta/4)");
  MaximalField<D> f;
  f.dirs = dirs;
  f.delta = delta;
  f.values.assign(dirs.size(), 0.0);
  f.witnesses.assign(dirs.size(), Vec<D>::Zero());
  f.tube_counts.assign(dirs.size(), 0);

  std::vector<Vec<D>> supp;
  supp.reserve(static_cast<std::size_t>(m.popcount()));
  m.for_each([&](std::int64_t k) { supp.push_back(g.center(k)); });
  if (supp.empty()) return f;

  const double vol = tube_volume(Tube<D>(Direction<D>(), Vec<D>::Zero(), delta));
  const double hd = g.cell_volume();
  const double lat = delta / 2.0;
  const Line<D> ref_axis = ref_tube.axis();

  parallel_for(dirs.size(), [&](std::size_t di) {
    const Direction<D>& xi = f.dirs[di];
    const double beta = angle(xi, ref_tube.direction());
    if (beta < theta / 2.0 - 1e-15 || beta > theta + 1e-15) return;

    std::array<Vec<D>, 2> perp;
    {
      int least = 0;
      for (int i = 1; i < D; ++i)
        if (std::abs(xi[i]) < std::abs(xi[least])) least = i;
      Vec<D> e = Vec<D>::Zero();
      e[least] = 1.0;
      perp[0] = (e - e.dot(xi.vec()) * xi.vec()).normalized();
      if constexpr (D == 3) perp[1] = xi.vec().cross(perp[0]);
    }
    const int nperp = D - 1;

    std::array<double, 2> plo{}, phi{};
    for (int p = 0; p < nperp; ++p) {
      plo[p] = std::numeric_limits<double>::max();
      phi[p] = -plo[p];
    }
    // proj[v] = (perp coords..., axial coord)
    std::vector<std::array<double, 3>> proj(supp.size());
    for (std::size_t v = 0; v < supp.size(); ++v) {
      for (int p = 0; p < nperp; ++p) {
        const double cpv = supp[v].dot(perp[p]);
        proj[v][static_cast<std::size_t>(p)] = cpv;
        plo[p] = std::min(plo[p], cpv);
        phi[p] = std::max(phi[p], cpv);
      }
      proj[v][2] = supp[v].dot(xi.vec());
    }

    std::array<std::int64_t, 2> clo{}, chi{};
    std::int64_t ncells = 1;
    for (int p = 0; p < nperp; ++p) {
      clo[p] = static_cast<std::int64_t>(std::floor((plo[p] - delta) / lat)) - 1;
      chi[p] = static_cast<std::int64_t>(std::ceil((phi[p] + delta) / lat)) + 1;
      ncells *= chi[p] - clo[p] + 1;
    }
    if (nperp == 1) {
      clo[1] = chi[1] = 0;
    }
    const std::int64_t nu = chi[0] - clo[0] + 1;

    const auto kmax = static_cast<std::int64_t>(std::ceil(opt.cap / lat)) + 1;
    const std::int64_t nk = 2 * kmax + 1;
    struct CellInfo {
      std::int32_t k0 = 1, k1 = 0;
      Vec<D> qw = Vec<D>::Zero();
      bool any = false;
    };
    std::vector<CellInfo> cells(static_cast<std::size_t>(ncells));
    auto cell_index = [&](std::int64_t iu, std::int64_t iw) {
      return (iw - clo[1]) * nu + (iu - clo[0]);
    };
    auto cell_point = [&](std::int64_t iu, std::int64_t iw) {
      Vec<D> q = static_cast<double>(iu) * lat * perp[0];
      if constexpr (D == 3) q += static_cast<double>(iw) * lat * perp[1];
      return q;
    };

    for (std::int64_t iw = clo[1]; iw <= chi[1]; ++iw) {
      for (std::int64_t iu = clo[0]; iu <= chi[0]; ++iu) {
        const Vec<D> q = cell_point(iu, iw);
        const Line<D> cand_line{q, xi};
        double s0 = 0.0, t0 = 0.0;
        double dll;
        if (detail::closest_line_params(ref_axis, cand_line, s0, t0)) {
          dll = (ref_axis.point + s0 * ref_axis.dir.vec() - cand_line.point -
                 t0 * cand_line.dir.vec())
                    .norm();
        } else {
          dll = dist_point_line(q, ref_axis);
        }
        if (dll > 2.0 * delta) continue;
        auto& ci = cells[static_cast<std::size_t>(cell_index(iu, iw))];
        for (std::int64_t k = -kmax; k <= kmax; ++k) {
          const Vec<D> a = q + static_cast<double>(k) * lat * xi.vec();
          if (a.squaredNorm() > opt.cap * opt.cap) continue;
          if (!tubes_intersect(ref_tube, Tube<D>(xi, a, delta))) continue;
          if (!ci.any) {
            ci.k0 = ci.k1 = static_cast<std::int32_t>(k);
            ci.any = true;
          } else {
            ci.k1 = static_cast<std::int32_t>(k);
          }
        }
        if (ci.any && opt.weighted) ci.qw = wedge_point(ref_axis, cand_line);
      }
    }

    std::vector<double> acc(static_cast<std::size_t>(ncells * nk), 0.0);
    const double inv_lat = 1.0 / lat;
    const double d2 = delta * delta;
    for (std::size_t v = 0; v < supp.size(); ++v) {
      const double tv = proj[v][2];
      const auto iu0 = static_cast<std::int64_t>(std::floor((proj[v][0] - delta) * inv_lat));
      const auto iu1 = static_cast<std::int64_t>(std::ceil((proj[v][0] + delta) * inv_lat));
      std::int64_t iw0 = 0, iw1 = 0;
      if constexpr (D == 3) {
        iw0 = static_cast<std::int64_t>(std::floor((proj[v][1] - delta) * inv_lat));
        iw1 = static_cast<std::int64_t>(std::ceil((proj[v][1] + delta) * inv_lat));
      }
      for (std::int64_t iw = std::max(iw0, clo[1]); iw <= std::min(iw1, chi[1]); ++iw) {
        for (std::int64_t iu = std::max(iu0, clo[0]); iu <= std::min(iu1, chi[0]); ++iu) {
          const double du = proj[v][0] - static_cast<double>(iu) * lat;
          double r2 = du * du;
          if constexpr (D == 3) {
            const double dw = proj[v][1] - static_cast<double>(iw) * lat;
            r2 += dw * dw;
          }
          if (r2 > d2) continue;
          const auto ciIdx = static_cast<std::size_t>(cell_index(iu, iw));
          const auto& ci = cells[ciIdx];
          if (!ci.any) continue;
          auto klo = static_cast<std::int64_t>(std::ceil((tv - 0.5) * inv_lat - 1e-12));
          auto khi = static_cast<std::int64_t>(std::floor((tv + 0.5) * inv_lat + 1e-12));
          klo = std::max<std::int64_t>(klo, ci.k0);
          khi = std::min<std::int64_t>(khi, ci.k1);
          if (klo > khi) continue;
          const double w = opt.weighted ? std::sqrt((supp[v] - ci.qw).norm()) : 1.0;
          const std::size_t base = ciIdx * static_cast<std::size_t>(nk);
          acc[base + static_cast<std::size_t>(klo + kmax)] += w;
          if (khi + kmax + 1 < nk) acc[base + static_cast<std::size_t>(khi + kmax + 1)] -= w;
        }
      }
    }

    double best = 0.0;
    std::int64_t bu = 0, bw = 0, bk = 0;
    bool have = false;
    for (std::int64_t iw = clo[1]; iw <= chi[1]; ++iw) {
      for (std::int64_t iu = clo[0]; iu <= chi[0]; ++iu) {
        const auto ciIdx = static_cast<std::size_t>(cell_index(iu, iw));
        const auto& ci = cells[ciIdx];
        if (!ci.any) continue;
        double run = 0.0;
        const std::size_t base = ciIdx * static_cast<std::size_t>(nk);
        for (std::int64_t k = -kmax; k <= kmax; ++k) {
          run += acc[base + static_cast<std::size_t>(k + kmax)];
          if (k < ci.k0 || k > ci.k1) continue;
          if (!have || run > best) {
            best = run;
            bu = iu;
            bw = iw;
            bk = k;
            have = true;
          }
        }
      }
    }
    if (have && best > 0.0) {
      f.values[di] = best * hd / vol;
      f.witnesses[di] = cell_point(bu, bw) + static_cast<double>(bk) * lat * xi.vec();
      f.tube_counts[di] = 1;
    }
  });
  return f;
}

// ---------------------------------------------------------------------------
// Angular sector decomposition of the annulus C_theta (relative to the
// reference axis e_1) and the overlap cylinders V_k.
// ---------------------------------------------------------------------------

template <int D>
struct SectorDecomposition {
  double delta = 0.0, theta = 0.0;
  std::vector<Eigen::Vector2d> normals;  // projective unit normals (d=3)
  double band_halfwidth = 0.0;           // threshold on |<xi', v_k>|
  double cyl_halfwidth = 0.0;            // 50*delta

  std::size_t sector_count() const { return D == 2 ? 1 : normals.size(); }

  // Disjointified sector of xi' (first matching band), or -1 outside C_theta.
  int sector_of(const Eigen::Matrix<double, D - 1, 1>& xi_prime) const {
    const double r = xi_prime.norm();
    if (r < std::sin(theta / 2.0) - 1e-15 || r > std::sin(theta) + 1e-15) return -1;
    if constexpr (D == 2) {
      return 0;
    } else {
      for (std::size_t k = 0; k < normals.size(); ++k)
        if (std::abs(xi_prime.dot(normals[k])) <= band_halfwidth) return static_cast<int>(k);
      return -1;
    }
  }

  bool in_cylinder(const Vec<D>& y, std::size_t k) const {
    if (std::abs(y[0]) > 1.0) return false;
    if constexpr (D == 2) {
      (void)k;
      return std::abs(y[1]) < cyl_halfwidth;
    } else {
      const Eigen::Vector2d yp(y[1], y[2]);
      return std::abs(yp.dot(normals[k])) < cyl_halfwidth;
    }
  }
};

template <int D>
inline SectorDecomposition<D> sector_decomposition(double delta, double theta) {
  if (!(theta >= delta)) throw parameter_error("sector_decomposition: need delta <= theta");
  if (!(theta <= 1.0)) throw parameter_error("sector_decomposition: need theta <= 1");
  SectorDecomposition<D> dec;
  dec.delta = delta;
  dec.theta = theta;
  dec.band_halfwidth = delta / 2.0;
  dec.cyl_halfwidth = 50.0 * delta;
  if constexpr (D == 3) {
    const double step = delta / theta;
    const int k = std::max(1, static_cast<int>(std::floor(kPi / step + 1e-12)));
    dec.normals.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const double phi = kPi * static_cast<double>(i) / static_cast<double>(k);
      dec.normals.emplace_back(std::cos(phi), std::sin(phi));
    }
  }
  return dec;
}

// Number of cylinders V_k containing y. Requires sigma/2 <= |y'| <= sigma.
template <int D>
inline int cylinder_overlap_count(const Vec<D>& y, const SectorDecomposition<D>& dec,
                                  double sigma) {
  double yp2 = 0.0;
  for (int i = 1; i < D; ++i) yp2 += y[i] * y[i];
  const double yp = std::sqrt(yp2);
  if (yp < sigma / 2.0 - 1e-12 || yp > sigma + 1e-12)
    throw parameter_error("cylinder_overlap_count: point outside the hollow cylinder");
  int n = 0;
  for (std::size_t k = 0; k < dec.sector_count(); ++k)
    if (dec.in_cylinder(y, k)) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Slice domination: the unweighted auxiliary average against delta^{-1} times
// the slice integral of the 2-dimensional maximal function.
// ---------------------------------------------------------------------------

struct SliceDomination {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline SetMask<2> extract_slice(const SetMask<3>& m, std::int64_t iz) {
  const auto& g = m.grid();
  const Vec<2> origin(g.origin()[0], g.origin()[1]);
  const IVec<2> ext(g.extents()[0], g.extents()[1]);
  auto g2 = std::make_shared<const VoxelGrid<2>>(origin, g.h(), ext);
  const std::int64_t plane = g.extents()[0] * g.extents()[1];
  const std::int64_t base = iz * plane;
  std::vector<std::uint64_t> bits(static_cast<std::size_t>((plane + 63) / 64), 0);
  for (std::int64_t k = 0; k < plane; ++k)
    if (m.test(base + k))
      bits[static_cast<std::size_t>(k >> 6)] |= std::uint64_t(1) << (k & 63);
  return SetMask<2>(std::move(g2), std::move(bits));
}

inline SliceDomination slice_domination_check(const SetMask<3>& m, double delta, double theta,
                                              const Tube<3>& ref_tube,
                                              const Direction<3>& xi) {
  SliceDomination out;
  AuxOptions opt;
  opt.weighted = false;
  const auto f = auxiliary_maximal<3>(m, delta, theta, ref_tube, {xi}, opt);
  out.lhs = f.values[0];

  const auto& g = m.grid();
  const double h = g.h();
  const Eigen::Vector2d p(xi[0], xi[1]);
  if (p.norm() < 1e-12) return out;
  const Direction<2> proj(Vec<2>(p[0], p[1]));
  double sum = 0.0;
  for (std::int64_t iz = 0; iz < g.extents()[2]; ++iz) {
    const double z = g.origin()[2] + (iz + 0.5) * h;
    if (std::abs(z) > 50.0 * delta) continue;
    const SetMask<2> slice = extract_slice(m, iz);
    if (slice.popcount() == 0) continue;
    const auto f2 = kakeya_maximal_dirs<2>(slice, delta, {proj});
    sum += h * f2.values[0];
  }
  out.rhs = sum / delta;
  return out;
}

// CSV export: config echo lines first ("# key=value"), then one row per
// direction: nu, xi_1..xi_d, value, witness_a_1..a_d.
template <int D>
inline void write_field_csv(std::ostream& os, const MaximalField<D>& f,
                            const std::vector<std::string>& config_lines = {}) {
  for (const auto& line : config_lines) os << "# " << line << "\n";
  os << "nu";
  for (int i = 1; i <= D; ++i) os << ",xi_" << i;
  os << ",value";
  for (int i = 1; i <= D; ++i) os << ",witness_a_" << i;
  os << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t n = 0; n < f.size(); ++n) {
    os << n;
    for (int i = 0; i < D; ++i) {
      os << ',';
      num(f.dirs[n][i]);
    }
    os << ',';
    num(f.values[n]);
    for (int i = 0; i < D; ++i) {
      os << ',';
      num(f.witnesses[n][i]);
    }
    os << "\n";
  }
}

}  // namespace kakeya
