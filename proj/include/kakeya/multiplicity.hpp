#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kakeya/common.hpp"
#include "kakeya/geometry.hpp"
#include "kakeya/grid.hpp"
#include "kakeya/maximal.hpp"
#include "kakeya/parallel.hpp"

namespace kakeya {

// The interlocking scenario constants, defaulting to the printed values.
// Thresholds read:
//   scenario I witness:  #(T_j∩E∩{mult<=N}) >= low_density_factor * lambda * #T_j
//   scenario I:          witnesses >= low_witness_fraction * M
//   incidence-set mass:  #(T_i∩E∩shell) >= lambda * #T_i / (iset_mass_div * L)
//   card threshold:      Card I >= N / (card_div * L^2)
//   scenario II witness: #(T_j∩E∩{Card I>=thr}) >= lambda * #T_j / (high_measure_div * (2L)^2)
//   scenario II:         witnesses >= M / (high_witness_div * L^2)
// with L = log2(1/delta).
struct ScenarioConstants {
  double low_density_factor = 0.25;
  double low_witness_fraction = 0.5;
  double iset_mass_div = 16.0;
  double card_div = 8.0;
  double high_measure_div = 8.0;
  double high_witness_div = 16.0;
  double claim_min_angle_factor = 1.0;
  std::string name = "printed";

  static ScenarioConstants printed() { return {}; }
  // Fallback set with all scenario-II thresholds loosened by `slack`.
  static ScenarioConstants relaxed(double slack, const std::string& nm) {
    ScenarioConstants c;
    c.iset_mass_div *= slack;
    c.card_div *= slack;
    c.high_measure_div *= slack;
    c.high_witness_div *= slack;
    c.name = nm;
    return c;
  }
};

// A family of equal-radius tubes with a validated density level: directions
// pairwise delta-separated and #(E ∩ T_j) >= (lambda/2) #T_j for every j.
template <int D>
class TubeFamily {
 public:
  static TubeFamily validated(std::vector<Tube<D>> tubes, double lambda, SetMask<D> mask) {
    TubeFamily f(std::move(tubes), lambda, std::move(mask));
    f.validate();
    return f;
  }
  // Skips validation; for counterexample tests only.
  static TubeFamily unchecked(std::vector<Tube<D>> tubes, double lambda, SetMask<D> mask) {
    return TubeFamily(std::move(tubes), lambda, std::move(mask));
  }

  std::size_t size() const { return tubes_.size(); }
  const Tube<D>& tube(std::size_t j) const { return tubes_[j]; }
  const std::vector<Tube<D>>& tubes() const { return tubes_; }
  double delta() const { return delta_; }
  double lambda() const { return lambda_; }
  const SetMask<D>& mask() const { return mask_; }

  std::int64_t tube_count(std::size_t j) const { return tube_cnt_[j]; }
  // sorted voxel indices of E ∩ T_j
  const std::vector<std::int64_t>& e_tube(std::size_t j) const { return e_tube_[j]; }

 private:
  TubeFamily(std::vector<Tube<D>> tubes, double lambda, SetMask<D> mask)
      : tubes_(std::move(tubes)), lambda_(lambda), mask_(std::move(mask)) {
    if (tubes_.empty()) throw parameter_error("TubeFamily: empty");
    delta_ = tubes_[0].radius();
    tube_cnt_.resize(tubes_.size());
    e_tube_.resize(tubes_.size());
    parallel_for(tubes_.size(), [&](std::size_t j) {
      std::vector<std::int64_t> evox;
      std::int64_t cnt = 0;
      detail::visit_tube(mask_.grid(), tubes_[j], [&](std::int64_t k, const Vec<D>&) {
        ++cnt;
        if (mask_.test(k)) evox.push_back(k);
      });
      std::sort(evox.begin(), evox.end());
      tube_cnt_[j] = cnt;
      e_tube_[j] = std::move(evox);
    });
  }

  void validate() const {
    for (std::size_t j = 0; j < tubes_.size(); ++j)
      if (std::abs(tubes_[j].radius() - delta_) > 1e-12)
        throw parameter_error("TubeFamily: radii differ");
    for (std::size_t i = 0; i < tubes_.size(); ++i)
      for (std::size_t j = i + 1; j < tubes_.size(); ++j)
        if (angle(tubes_[i].direction(), tubes_[j].direction()) < delta_ * (1.0 - 1e-9))
          throw parameter_error("TubeFamily: directions not delta-separated");
    for (std::size_t j = 0; j < tubes_.size(); ++j)
      if (static_cast<double>(e_tube_[j].size()) <
          0.5 * lambda_ * static_cast<double>(tube_cnt_[j]))
        throw parameter_error("TubeFamily: density invariant violated at tube " +
                              std::to_string(j));
  }

  std::vector<Tube<D>> tubes_;
  double delta_ = 0.0;
  double lambda_ = 0.0;
  SetMask<D> mask_;
  std::vector<std::int64_t> tube_cnt_;
  std::vector<std::vector<std::int64_t>> e_tube_;
};

// Number of tubes (excluding `exclude`, pass -1 for none) containing x.
template <int D>
inline int pointwise_multiplicity(const Vec<D>& x, const TubeFamily<D>& fam,
                                  std::int64_t exclude = -1) {
  int n = 0;
  for (std::size_t l = 0; l < fam.size(); ++l) {
    if (static_cast<std::int64_t>(l) == exclude) continue;
    if (tube_contains(fam.tube(l), x)) ++n;
  }
  return n;
}

// Precomputed incidence data for the scenario machinery: the multiplicity of
// every voxel of E ∩ (∪T_j), pairwise direction angles, and dyadic-shell
// masses shells[j](i,v) = #(T_i ∩ E ∩ {dist(.,gamma_j) in [2^{v-1}d, 2^v d)}).
template <int D>
struct FamilyContext {
  const TubeFamily<D>* fam = nullptr;
  int nu_max = 0;        // dyadic angle levels, theta = 2^nu * delta <= 2
  int nu_prime_max = 0;  // dyadic distance levels, sigma = 2^nu' * delta <= 2
  std::vector<std::int64_t> mult_idx;
  std::vector<std::int32_t> mult_val;
  Eigen::MatrixXd ang;
  std::vector<Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>> shells;

  static FamilyContext build(const TubeFamily<D>& fam) {
    FamilyContext c;
    c.fam = &fam;
    const double delta = fam.delta();
    c.nu_max = static_cast<int>(std::min(std::ceil(log2_inv(delta)) + 1.0,
                                         std::floor(std::log2(2.0 / delta) + 1e-9)));
    c.nu_prime_max = static_cast<int>(std::floor(std::log2(2.0 / delta) + 1e-9));
    const std::size_t m = fam.size();

    // multiplicity of each voxel of E ∩ (∪ T_j)
    std::vector<std::int64_t> all;
    for (std::size_t j = 0; j < m; ++j)
      all.insert(all.end(), fam.e_tube(j).begin(), fam.e_tube(j).end());
    std::sort(all.begin(), all.end());
    c.mult_idx.reserve(all.size() / 2);
    c.mult_val.reserve(all.size() / 2);
    for (std::size_t i = 0; i < all.size();) {
      std::size_t k = i;
      while (k < all.size() && all[k] == all[i]) ++k;
      c.mult_idx.push_back(all[i]);
      c.mult_val.push_back(static_cast<std::int32_t>(k - i));
      i = k;
    }

    c.ang.resize(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        c.ang(i, j) = angle(fam.tube(i).direction(), fam.tube(j).direction());

    const auto& grid = fam.mask().grid();
    c.shells.resize(m);
    parallel_for(m, [&](std::size_t j) {
      auto& sh = c.shells[j];
      sh.setZero(m, c.nu_prime_max + 1);
      const Line<D> axis = fam.tube(j).axis();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::int64_t k : fam.e_tube(i)) {
          const double d = dist_point_line(grid.center(k), axis);
          if (d < delta) continue;
          const int v = static_cast<int>(std::floor(std::log2(d / delta))) + 1;
          if (v >= 1 && v <= c.nu_prime_max) ++sh(i, v);
        }
      }
    });
    return c;
  }

  std::int32_t mult_of(std::int64_t vox) const {
    auto it = std::lower_bound(mult_idx.begin(), mult_idx.end(), vox);
    if (it == mult_idx.end() || *it != vox) return 0;
    return mult_val[static_cast<std::size_t>(it - mult_idx.begin())];
  }
};

struct ScenarioResult {
  bool holds = false;
  std::vector<std::size_t> witnesses;
};

// Scenario I at threshold N.
template <int D>
inline ScenarioResult scenario_low(const FamilyContext<D>& c, std::int64_t n_thr,
                                   const ScenarioConstants& k = {}) {
  const auto& fam = *c.fam;
  ScenarioResult r;
  for (std::size_t j = 0; j < fam.size(); ++j) {
    std::int64_t cnt = 0;
    for (std::int64_t vox : fam.e_tube(j))
      if (c.mult_of(vox) - 1 <= n_thr) ++cnt;
    if (static_cast<double>(cnt) >=
        k.low_density_factor * fam.lambda() * static_cast<double>(fam.tube_count(j)))
      r.witnesses.push_back(j);
  }
  r.holds = static_cast<double>(r.witnesses.size()) >=
            k.low_witness_fraction * static_cast<double>(fam.size());
  return r;
}

// Least N making scenario I hold; scenario_low is monotone in N, so binary
// search over [0, M] is exact.
template <int D>
inline std::int64_t minimal_low_n(const FamilyContext<D>& c, const ScenarioConstants& k = {}) {
  std::int64_t lo = 0, hi = static_cast<std::int64_t>(c.fam->size());
  if (scenario_low(c, 0, k).holds) return 0;
  while (hi - lo > 1) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (scenario_low(c, mid, k).holds)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Direct-scan oracle for tests.
template <int D>
inline std::int64_t minimal_low_n_bruteforce(const FamilyContext<D>& c,
                                             const ScenarioConstants& k = {}) {
  for (std::int64_t n = 0;; ++n)
    if (scenario_low(c, n, k).holds) return n;
}

// I_{theta,sigma}(x, j): tubes through x at angle in [theta/2, theta) from
// T_j whose E-mass in the distance-[sigma/2, sigma) annulus around gamma_j
// is at least lambda #T_i / (iset_mass_div * log2(1/delta)).
template <int D>
inline std::vector<std::size_t> incidence_set(const Vec<D>& x, std::size_t j, double theta,
                                              double sigma, const TubeFamily<D>& fam,
                                              const ScenarioConstants& k = {}) {
  if (!(theta >= fam.delta()) || !(theta <= 2.0) || !(sigma >= fam.delta()) || !(sigma <= 2.0))
    throw parameter_error("incidence_set: theta, sigma must lie in [delta, 2]");
  const double lg = log2_inv(fam.delta());
  const auto& grid = fam.mask().grid();
  const Line<D> axis = fam.tube(j).axis();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    if (!tube_contains(fam.tube(i), x)) continue;
    const double a = angle(fam.tube(i).direction(), fam.tube(j).direction());
    if (a < theta / 2.0 || a >= theta) continue;
    std::int64_t cnt = 0;
    for (std::int64_t vox : fam.e_tube(i)) {
      const double d = dist_point_line(grid.center(vox), axis);
      if (d >= sigma / 2.0 && d < sigma) ++cnt;
    }
    if (static_cast<double>(cnt) >=
        fam.lambda() * static_cast<double>(fam.tube_count(i)) / (k.iset_mass_div * lg))
      out.push_back(i);
  }
  return out;
}

// Scenario II at angle theta and distance sigma. The angle and annulus-mass
// conditions do not depend on x, so they are hoisted out of the voxel loop.
template <int D>
inline ScenarioResult scenario_high(const FamilyContext<D>& c, double theta, double sigma,
                                    std::int64_t n_thr, const ScenarioConstants& k = {}) {
  const auto& fam = *c.fam;
  const double lg = log2_inv(fam.delta());
  const double card_thr = static_cast<double>(n_thr) / (k.card_div * lg * lg);
  ScenarioResult r;
  std::vector<std::int64_t> qualifying(fam.size(), 0);
  parallel_for(fam.size(), [&](std::size_t j) {
    const auto& grid = fam.mask().grid();
    const Line<D> axis = fam.tube(j).axis();
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      const double a = c.ang(i, j);
      if (i == j || a < theta / 2.0 || a >= theta) continue;
      std::int64_t cnt = 0;
      for (std::int64_t vox : fam.e_tube(i)) {
        const double d = dist_point_line(grid.center(vox), axis);
        if (d >= sigma / 2.0 && d < sigma) ++cnt;
      }
      if (static_cast<double>(cnt) >=
          fam.lambda() * static_cast<double>(fam.tube_count(i)) / (k.iset_mass_div * lg))
        cand.push_back(i);
    }
    std::int64_t cnt = 0;
    for (std::int64_t vox : fam.e_tube(j)) {
      const Vec<D> x = grid.center(vox);
      int card = 0;
      for (std::size_t i : cand)
        if (tube_contains(fam.tube(i), x)) ++card;
      if (static_cast<double>(card) >= card_thr) ++cnt;
    }
    qualifying[j] = cnt;
  });
  for (std::size_t j = 0; j < fam.size(); ++j)
    if (static_cast<double>(qualifying[j]) >=
        fam.lambda() * static_cast<double>(fam.tube_count(j)) /
            (k.high_measure_div * 4.0 * lg * lg))
      r.witnesses.push_back(j);
  r.holds = static_cast<double>(r.witnesses.size()) >=
            static_cast<double>(fam.size()) / (k.high_witness_div * lg * lg);
  return r;
}

// Outcome of the dyadic pigeonhole search.
struct MultiplicityReport {
  bool found = false;
  std::int64_t n_min = 0;
  int nu = 0, nu_prime = 0;
  double theta = 0.0, sigma = 0.0;
  std::vector<std::size_t> scenario1_witnesses;
  std::vector<std::size_t> scenario2_witnesses;
  // first (nu, nu') passing the per-j pigeonhole bound, for each high-mass j
  std::vector<std::array<std::int64_t, 3>> per_j_choice;
  ScenarioConstants constants;
  std::string diagnostic;
};

namespace detail {

// Bitset over tube indices.
struct TubeSet {
  std::vector<std::uint64_t> w;
  explicit TubeSet(std::size_t m) : w((m + 63) / 64, 0) {}
  void set(std::size_t i) { w[i >> 6] |= std::uint64_t(1) << (i & 63); }
  bool test(std::size_t i) const { return (w[i >> 6] >> (i & 63)) & 1; }
};

inline int and_popcount(const TubeSet& a, const TubeSet& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.w.size(); ++i) n += std::popcount(a.w[i] & b.w[i]);
  return n;
}

}  // namespace detail

// Dyadic pigeonhole: with N = minimal_low_n, find the lexicographically first
// (nu, nu') whose scenario II holds. Falls back through `constant_sets` in
// order; report.constants records the set that succeeded.
template <int D>
inline MultiplicityReport find_high_pair(
    const FamilyContext<D>& c,
    const std::vector<ScenarioConstants>& constant_sets = {ScenarioConstants::printed()}) {
  const auto& fam = *c.fam;
  const std::size_t m = fam.size();
  const double delta = fam.delta();
  const double lg = log2_inv(delta);
  if (delta > 0.2 + 1e-12)
    throw parameter_error("find_high_pair: needs delta <= 0.2 for the dyadic bookkeeping");

  MultiplicityReport rep;
  rep.n_min = minimal_low_n(c, constant_sets.at(0));
  rep.scenario1_witnesses = scenario_low(c, rep.n_min, constant_sets.at(0)).witnesses;

  const int nv = c.nu_max, nvp = c.nu_prime_max;

  for (const auto& consts : constant_sets) {
    const double card_thr = static_cast<double>(rep.n_min) / (consts.card_div * lg * lg);

    // candidate masks per (j, nu, nu'): angle shell && shell-mass condition
    std::vector<detail::TubeSet> angmask;   // [j*nv + (nu-1)]
    std::vector<detail::TubeSet> massmask;  // [j*nvp + (nu'-1)]
    angmask.reserve(m * nv);
    massmask.reserve(m * nvp);
    for (std::size_t j = 0; j < m; ++j) {
      for (int v = 1; v <= nv; ++v) {
        detail::TubeSet s(m);
        for (std::size_t i = 0; i < m; ++i) {
          const double a = c.ang(i, j);
          if (i != j && a >= std::ldexp(delta, v - 1) && a < std::ldexp(delta, v)) s.set(i);
        }
        angmask.push_back(std::move(s));
      }
      for (int v = 1; v <= nvp; ++v) {
        detail::TubeSet s(m);
        for (std::size_t i = 0; i < m; ++i)
          if (static_cast<double>(c.shells[j](i, v)) >=
              fam.lambda() * static_cast<double>(fam.tube_count(i)) / (consts.iset_mass_div * lg))
            s.set(i);
        massmask.push_back(std::move(s));
      }
    }

    // one membership pass, accumulating qualifying-voxel counts per (j, pair)
    std::vector<std::vector<std::int64_t>> sjc(m);
    parallel_for(m, [&](std::size_t j) {
      auto& rows = sjc[j];
      rows.assign(static_cast<std::size_t>(nv) * nvp, 0);
      const auto& grid = fam.mask().grid();
      detail::TubeSet member(m);
      for (std::int64_t vox : fam.e_tube(j)) {
        const Vec<D> x = grid.center(vox);
        std::fill(member.w.begin(), member.w.end(), 0);
        for (std::size_t i = 0; i < m; ++i)
          if (tube_contains(fam.tube(i), x)) member.set(i);
        for (int v = 1; v <= nv; ++v) {
          const auto& am = angmask[j * nv + (v - 1)];
          detail::TubeSet both(m);
          for (std::size_t wdi = 0; wdi < member.w.size(); ++wdi)
            both.w[wdi] = member.w[wdi] & am.w[wdi];
          for (int vp = 1; vp <= nvp; ++vp) {
            const int card = detail::and_popcount(both, massmask[j * nvp + (vp - 1)]);
            if (static_cast<double>(card) >= card_thr)
              ++rows[static_cast<std::size_t>(v - 1) * nvp + (vp - 1)];
          }
        }
      }
    });

    auto measure_thr = [&](std::size_t j) {
      return fam.lambda() * static_cast<double>(fam.tube_count(j)) /
             (consts.high_measure_div * 4.0 * lg * lg);
    };
    const double witness_thr = static_cast<double>(m) / (consts.high_witness_div * lg * lg);

    for (int v = 1; v <= nv && !rep.found; ++v) {
      for (int vp = 1; vp <= nvp && !rep.found; ++vp) {
        std::vector<std::size_t> wit;
        for (std::size_t j = 0; j < m; ++j)
          if (static_cast<double>(sjc[j][static_cast<std::size_t>(v - 1) * nvp + (vp - 1)]) >=
              measure_thr(j))
            wit.push_back(j);
        if (static_cast<double>(wit.size()) >= witness_thr) {
          rep.found = true;
          rep.nu = v;
          rep.nu_prime = vp;
          rep.theta = std::ldexp(delta, v);
          rep.sigma = std::ldexp(delta, vp);
          rep.scenario2_witnesses = std::move(wit);
          rep.constants = consts;
        }
      }
    }
    if (rep.found) {
      // per-j first (nu, nu') choice for the high-mass tubes
      for (std::size_t j = 0; j < m; ++j) {
        std::int64_t qmass = 0;
        for (std::int64_t vox : fam.e_tube(j))
          if (c.mult_of(vox) - 1 >= rep.n_min) ++qmass;
        if (static_cast<double>(qmass) <
            consts.low_density_factor * fam.lambda() * static_cast<double>(fam.tube_count(j)))
          continue;
        for (int v = 1; v <= nv; ++v) {
          bool done = false;
          for (int vp = 1; vp <= nvp; ++vp)
            if (static_cast<double>(sjc[j][static_cast<std::size_t>(v - 1) * nvp + (vp - 1)]) >=
                measure_thr(j)) {
              rep.per_j_choice.push_back({static_cast<std::int64_t>(j), v, vp});
              done = true;
              break;
            }
          if (done) break;
        }
      }
      return rep;
    }
  }
  rep.diagnostic =
      "no dyadic pair satisfies scenario II with N = " + std::to_string(rep.n_min) +
      "; this contradicts the pigeonhole guarantee and indicates a bug or a constant mismatch";
  return rep;
}

// Shell covering behind the dyadic distance decomposition: every k != j
// (all at angle >= c*delta from T_j) must put 1/(16 log2(1/delta)) of its
// density mass into some dyadic distance shell around gamma_j.
template <int D>
struct ShellCoveringResult {
  bool holds = true;
  std::vector<std::size_t> failing;
  double min_angle = 0.0;
};

template <int D>
inline ShellCoveringResult<D> verify_shell_covering(const FamilyContext<D>& c, std::size_t j,
                                                    const ScenarioConstants& k = {}) {
  const auto& fam = *c.fam;
  const double lg = log2_inv(fam.delta());
  ShellCoveringResult<D> r;
  r.min_angle = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < fam.size(); ++i) {
    if (i == j) continue;
    r.min_angle = std::min(r.min_angle, c.ang(i, j));
    if (c.ang(i, j) < k.claim_min_angle_factor * fam.delta() * (1.0 - 1e-9)) {
      r.holds = false;
      r.failing.push_back(i);
      continue;
    }
    bool any = false;
    for (int v = 1; v <= c.nu_prime_max && !any; ++v)
      if (static_cast<double>(c.shells[j](i, v)) >=
          fam.lambda() * static_cast<double>(fam.tube_count(i)) / (k.iset_mass_div * lg))
        any = true;
    if (!any) {
      r.holds = false;
      r.failing.push_back(i);
    }
  }
  return r;
}

}  // namespace kakeya
