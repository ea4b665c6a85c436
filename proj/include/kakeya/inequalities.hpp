#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "kakeya/common.hpp"
#include "kakeya/geometry.hpp"
#include "kakeya/grid.hpp"
#include "kakeya/maximal.hpp"
#include "kakeya/multiplicity.hpp"

namespace kakeya {

// Lebesgue exponent pair (p, q) with q = (d-1) p / (p-1); p = (d+2)/2 gives
// the scale of interest, (5/2, 10/3) in d = 3.
struct ExponentPair {
  double p = 0.0, q = 0.0;
  static ExponentPair standard(int d) {
    ExponentPair e;
    e.p = (d + 2.0) / 2.0;
    e.q = (d - 1.0) * e.p / (e.p - 1.0);
    return e;
  }
};

// Step-function distribution profile: levels ascending, measures[i] is the
// quadrature mass of {g >= levels[i]}.
struct DistributionProfile {
  std::vector<double> levels;
  std::vector<double> measures;
};

// Profile of a sampled nonnegative function with per-sample weights, built at
// the distinct sample values.
inline DistributionProfile build_profile(const std::vector<double>& values, double weight) {
  DistributionProfile p;
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  p.levels.reserve(v.size());
  p.measures.reserve(v.size());
  const auto n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size();) {
    std::size_t k = i;
    while (k < v.size() && v[k] == v[i]) ++k;
    if (v[i] > 0.0) {
      p.levels.push_back(v[i]);
      p.measures.push_back(weight * (n - static_cast<double>(i)));
    }
    i = k;
  }
  return p;
}

template <int D>
inline DistributionProfile build_profile(const MaximalField<D>& f) {
  if (!(f.quad_weight > 0.0))
    throw parameter_error("build_profile: field carries no quadrature weights");
  return build_profile(f.values, f.quad_weight);
}

// Quadrature measure of {value >= lambda}.
template <int D>
inline double superlevel_measure(const MaximalField<D>& f, double lambda) {
  if (!(lambda >= 0.0)) throw parameter_error("superlevel_measure: lambda must be >= 0");
  if (!(f.quad_weight > 0.0))
    throw parameter_error("superlevel_measure: field carries no quadrature weights");
  std::int64_t n = 0;
  for (double v : f.values)
    if (v >= lambda) ++n;
  return f.quad_weight * static_cast<double>(n);
}

// Quadrature p-norm of the field values.
template <int D>
inline double lp_norm_sphere(const MaximalField<D>& f, double p) {
  if (!(p >= 1.0)) throw parameter_error("lp_norm_sphere: p must be >= 1");
  if (!(f.quad_weight > 0.0))
    throw parameter_error("lp_norm_sphere: field carries no quadrature weights");
  double s = 0.0;
  for (double v : f.values) s += std::pow(v, p);
  return std::pow(f.quad_weight * s, 1.0 / p);
}

// p * ∫ λ^{p-1} ν(λ) dλ, integrated exactly over the step profile; agrees
// with the direct quadrature p-norm.
inline double layer_cake_lp(const DistributionProfile& pr, double p) {
  if (!(p >= 1.0)) throw parameter_error("layer_cake_lp: p must be >= 1");
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < pr.levels.size(); ++i) {
    // on (prev, levels[i]] the distribution function equals measures[i]
    acc += pr.measures[i] * (std::pow(pr.levels[i], p) - std::pow(prev, p));
    prev = pr.levels[i];
  }
  return std::pow(acc, 1.0 / p);
}

struct LorentzNorms {
  double weak = 0.0;   // L^{p,∞} = sup_λ λ ν(λ)^{1/p}
  double l_q1 = 0.0;   // ∫_0^∞ ν(λ)^{1/q} dλ
};

inline LorentzNorms lorentz_norms(const DistributionProfile& pr, double p, double q) {
  if (!(p > 1.0) || !(q > 1.0)) throw parameter_error("lorentz_norms: p, q must be > 1");
  LorentzNorms out;
  double prev = 0.0;
  for (std::size_t i = 0; i < pr.levels.size(); ++i) {
    out.weak = std::max(out.weak, pr.levels[i] * std::pow(pr.measures[i], 1.0 / p));
    out.l_q1 += std::pow(pr.measures[i], 1.0 / q) * (pr.levels[i] - prev);
    prev = pr.levels[i];
  }
  return out;
}

// LHS/RHS of the discrete distributional inequality at level lambda:
// M delta^{d-1} against (delta^{-eps} |E| lambda^{-p} / delta^{d-p})^{q/p},
// with M the number of net directions in the superlevel set A_lambda (any
// subset of the net is already delta-separated, so the maximal separated
// subset of A_lambda is A_lambda itself).
template <int D>
struct DiscreteInequality {
  std::int64_t m_lambda = 0;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

template <int D>
inline DiscreteInequality<D> check_discrete_inequality(const MaximalField<D>& f,
                                                       double measure_e, double lambda,
                                                       double eps,
                                                       ExponentPair ex = ExponentPair::standard(D)) {
  DiscreteInequality<D> r;
  for (double v : f.values)
    if (v >= lambda) ++r.m_lambda;
  if (r.m_lambda == 0) return r;
  const double delta = f.delta;
  r.lhs = static_cast<double>(r.m_lambda) * std::pow(delta, D - 1);
  r.rhs = std::pow(std::pow(delta, -eps) * measure_e * std::pow(lambda, -ex.p) /
                       std::pow(delta, static_cast<double>(D) - ex.p),
                   ex.q / ex.p);
  r.ratio = r.lhs / r.rhs;
  return r;
}

// |E| >= lambda M delta^{d-1} / (16 max(N,1)), guaranteed whenever scenario I
// holds at N. The max(N,1) guard covers the disjoint case N = 0.
struct VolumeBoundCheck {
  double lhs = 0.0, rhs = 0.0;
  bool holds = false;
};

template <int D>
inline VolumeBoundCheck check_low_multiplicity_volume_bound(const FamilyContext<D>& c,
                                                            std::int64_t n_thr,
                                                            const ScenarioConstants& k = {}) {
  if (!scenario_low(c, n_thr, k).holds)
    throw parameter_error("volume bound: scenario I does not hold at this N");
  const auto& fam = *c.fam;
  VolumeBoundCheck r;
  r.lhs = fam.mask().measure();
  const double n_eff = static_cast<double>(std::max<std::int64_t>(n_thr, 1));
  r.rhs = fam.lambda() * static_cast<double>(fam.size()) *
          std::pow(fam.delta(), D - 1) / (16.0 * n_eff);
  r.holds = r.lhs >= r.rhs;
  return r;
}

// Angular-separation volume bound: gamma-separated sigma-tubes with the
// escape-mass hypothesis rho|T| <= |T ∩ E ∩ B(a, sigma/gamma)^c| for at
// least M0 tubes at every lattice point a imply |E| >= rho sigma^{d-1}
// sqrt(M0) / 2.
template <int D>
struct SeparatedVolumeCheck {
  bool hypothesis_ok = false;
  std::int64_t m0_measured = 0;  // min over lattice a of qualifying tube count
  double lhs = 0.0, rhs = 0.0;
  bool holds = false;
  std::int64_t failing_tube = -1;
  Vec<D> failing_point = Vec<D>::Zero();
};

template <int D>
inline SeparatedVolumeCheck<D> check_separated_volume_bound(
    const std::vector<Tube<D>>& tubes, const SetMask<D>& e_mask, double gamma, double rho,
    std::int64_t m0_required) {
  if (tubes.empty()) throw parameter_error("separated volume bound: no tubes");
  const double sigma = tubes[0].radius();
  for (std::size_t i = 0; i < tubes.size(); ++i)
    for (std::size_t j = i + 1; j < tubes.size(); ++j)
      if (tubes_intersect(tubes[i], tubes[j]) &&
          angle(tubes[i].direction(), tubes[j].direction()) < gamma * (1.0 - 1e-9))
        throw parameter_error("separated volume bound: intersecting pair below gamma");

  // candidate points: translation lattice at tube scale, plus the centroid
  const auto& g = e_mask.grid();
  const double s = translation_lattice_spacing(g, sigma);
  std::vector<Vec<D>> points;
  {
    const auto klim = static_cast<std::int64_t>(std::floor(2.0 / s));
    IVec<D> kv;
    for (int i = 0; i < D; ++i) kv[i] = -klim;
    for (;;) {
      Vec<D> a;
      for (int i = 0; i < D; ++i) a[i] = s * static_cast<double>(kv[i]);
      if (a.squaredNorm() <= 4.0) points.push_back(a);
      int ax = 0;
      while (ax < D) {
        if (++kv[ax] <= klim) break;
        kv[ax] = -klim;
        ++ax;
      }
      if (ax == D) break;
    }
    Vec<D> centroid = Vec<D>::Zero();
    std::int64_t n = 0;
    e_mask.for_each([&](std::int64_t k) {
      centroid += g.center(k);
      ++n;
    });
    if (n > 0) points.push_back(centroid / static_cast<double>(n));
  }

  std::vector<std::vector<std::int64_t>> e_tube(tubes.size());
  std::vector<std::int64_t> tc(tubes.size(), 0);
  parallel_for(tubes.size(), [&](std::size_t j) {
    detail::visit_tube(g, tubes[j], [&](std::int64_t k, const Vec<D>&) {
      ++tc[j];
      if (e_mask.test(k)) e_tube[j].push_back(k);
    });
  });

  SeparatedVolumeCheck<D> r;
  r.m0_measured = static_cast<std::int64_t>(tubes.size());
  const double ball_r2 = (sigma / gamma) * (sigma / gamma);
  std::vector<std::int64_t> counts(points.size(), 0);
  parallel_for(points.size(), [&](std::size_t pi) {
    const Vec<D>& a = points[pi];
    std::int64_t cnt = 0;
    for (std::size_t j = 0; j < tubes.size(); ++j) {
      std::int64_t esc = 0;
      for (std::int64_t k : e_tube[j])
        if ((g.center(k) - a).squaredNorm() >= ball_r2) ++esc;
      if (static_cast<double>(esc) >= rho * static_cast<double>(tc[j])) ++cnt;
    }
    counts[pi] = cnt;
  });
  for (std::size_t pi = 0; pi < points.size(); ++pi)
    r.m0_measured = std::min(r.m0_measured, counts[pi]);

  r.hypothesis_ok = r.m0_measured >= m0_required;
  if (!r.hypothesis_ok) {
    // report one failing (j, a) pair for diagnostics
    for (std::size_t pi = 0; pi < points.size() && r.failing_tube < 0; ++pi) {
      if (counts[pi] >= m0_required) continue;
      for (std::size_t j = 0; j < tubes.size(); ++j) {
        std::int64_t esc = 0;
        for (std::int64_t k : e_tube[j])
          if ((g.center(k) - points[pi]).squaredNorm() >= ball_r2) ++esc;
        if (static_cast<double>(esc) < rho * static_cast<double>(tc[j])) {
          r.failing_tube = static_cast<std::int64_t>(j);
          r.failing_point = points[pi];
          break;
        }
      }
    }
  }
  r.lhs = e_mask.measure();
  r.rhs = rho * std::pow(sigma, D - 1) *
          std::sqrt(static_cast<double>(std::max<std::int64_t>(m0_required, 0))) / 2.0;
  r.holds = r.lhs >= r.rhs;
  return r;
}

// Escape-mass condition at scale sigma: per scenario-II tube j, the measure
// |E ∩ B(a, delta^eps lambda^{d-2})^c ∩ T^sigma_j| against
// lambda^3 sigma delta^{d-2+eps} N (fitted constant 1).
template <int D>
struct EscapeMassCheck {
  std::vector<double> measured;
  std::vector<double> ratios;
  double bound = 0.0;
  double min_ratio = 0.0;
};

template <int D>
inline EscapeMassCheck<D> check_escape_mass_condition(const FamilyContext<D>& c,
                                                      const std::vector<std::size_t>& js,
                                                      const Vec<D>& a, double eps,
                                                      std::int64_t n_thr, double sigma) {
  const auto& fam = *c.fam;
  const auto& g = fam.mask().grid();
  EscapeMassCheck<D> r;
  const double ball_r = std::pow(fam.delta(), eps) * std::pow(fam.lambda(), D - 2);
  r.bound = std::pow(fam.lambda(), 3.0) * sigma *
            std::pow(fam.delta(), static_cast<double>(D) - 2.0 + eps) *
            static_cast<double>(std::max<std::int64_t>(n_thr, 1));
  for (std::size_t j : js) {
    Tube<D> fat(fam.tube(j).direction(), fam.tube(j).center(), sigma);
    std::int64_t cnt = 0;
    detail::visit_tube(g, fat, [&](std::int64_t k, const Vec<D>& x) {
      if (fam.mask().test(k) && (x - a).squaredNorm() >= ball_r * ball_r) ++cnt;
    });
    const double meas = static_cast<double>(cnt) * g.cell_volume();
    r.measured.push_back(meas);
    r.ratios.push_back(meas / r.bound);
  }
  r.min_ratio = r.ratios.empty() ? 0.0 : *std::min_element(r.ratios.begin(), r.ratios.end());
  return r;
}

// The four-stage sigma-tube mass chain behind the d=3 endgame. Constants are
// reported as fitted ratios; only their existence is guaranteed, so the
// instance check asserts positivity and stability, not specific values.
struct SigmaTubeChainReport {
  std::size_t j = 0;
  double theta = 0.0, sigma = 0.0;
  // (i) subcollection size against the pigeonhole lower bound
  std::int64_t m0 = 0;
  double m0_bound = 0.0;
  double m0_ratio = 0.0;
  // (ii) weighted averages against (sigma/theta)^{1/2} lambda / (16 log2(1/d))
  double avg_min = 0.0, avg_bound = 0.0, avg_min_ratio = 0.0;
  // (iii) summed squares against log2(1/delta) |E ∩ T^sigma_j|
  double l2_sum = 0.0, l2_reference = 0.0, l2_ratio = 0.0;
  // (iv) |E ∩ T^sigma_j| against lambda^3 sigma delta^{1+eps} N
  double mass = 0.0, mass_bound = 0.0, mass_ratio = 0.0;
  bool nonempty = false;
  std::vector<std::size_t> subcollection;
};

template <int D>
inline SigmaTubeChainReport check_sigma_tube_chain(const FamilyContext<D>& c, std::size_t j,
                                                   int nu, int nu_prime, std::int64_t n_thr,
                                                   double eps,
                                                   const ScenarioConstants& k = {}) {
  static_assert(D == 3, "the sigma-tube chain is a d=3 computation");
  const auto& fam = *c.fam;
  const auto& g = fam.mask().grid();
  const double delta = fam.delta();
  const double lg = log2_inv(delta);
  SigmaTubeChainReport rep;
  rep.j = j;
  rep.theta = std::ldexp(delta, nu);
  rep.sigma = std::ldexp(delta, nu_prime);

  // (i) subcollection: tubes meeting the angle window and shell-mass
  // condition that contain some qualifying voxel of S_j
  const double card_thr = static_cast<double>(n_thr) / (k.card_div * lg * lg);
  std::vector<std::size_t> pre;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    if (i == j) continue;
    const double a = c.ang(i, j);
    if (a < rep.theta / 2.0 || a >= rep.theta) continue;
    if (static_cast<double>(c.shells[j](i, nu_prime)) >=
        fam.lambda() * static_cast<double>(fam.tube_count(i)) / (k.iset_mass_div * lg))
      pre.push_back(i);
  }
  std::vector<char> in_sub(fam.size(), 0);
  for (std::int64_t vox : fam.e_tube(j)) {
    const Vec<D> x = g.center(vox);
    int card = 0;
    for (std::size_t i : pre)
      if (tube_contains(fam.tube(i), x)) ++card;
    if (static_cast<double>(card) >= card_thr)
      for (std::size_t i : pre)
        if (tube_contains(fam.tube(i), x)) in_sub[i] = 1;
  }
  std::vector<std::size_t> sub;
  for (std::size_t i = 0; i < fam.size(); ++i)
    if (in_sub[i]) sub.push_back(i);
  rep.subcollection = sub;
  rep.m0 = static_cast<std::int64_t>(sub.size());
  rep.m0_bound = std::pow(2.0, -10.0) * rep.theta / delta *
                 static_cast<double>(std::max<std::int64_t>(n_thr, 1)) * fam.lambda() /
                 std::pow(lg, 4.0);
  rep.m0_ratio = static_cast<double>(rep.m0) / rep.m0_bound;
  rep.nonempty = !sub.empty();
  if (!rep.nonempty) return rep;

  // restriction of E to the fat tube around gamma_j
  const Tube<D> fat(fam.tube(j).direction(), fam.tube(j).center(), rep.sigma);
  SetMask<D> e_sigma = fam.mask().set_and(tube_mask(fam.mask().grid_ptr(), fat));
  rep.mass = e_sigma.measure();
  rep.mass_bound = std::pow(fam.lambda(), 3.0) * rep.sigma * std::pow(delta, 1.0 + eps) *
                   static_cast<double>(std::max<std::int64_t>(n_thr, 1));
  rep.mass_ratio = rep.mass / rep.mass_bound;

  // (ii) per-tube weighted averages over E ∩ annulus, with the wedge weight
  const Line<D> axis = fam.tube(j).axis();
  rep.avg_bound = std::sqrt(rep.sigma / rep.theta) * fam.lambda() / (k.iset_mass_div * lg);
  rep.avg_min = std::numeric_limits<double>::max();
  // (iii) auxiliary values at the subcollection directions
  std::vector<Direction<D>> sub_dirs;
  sub_dirs.reserve(sub.size());
  for (std::size_t i : sub) sub_dirs.push_back(fam.tube(i).direction());
  const auto aux = auxiliary_maximal<D>(e_sigma, delta, rep.theta, fam.tube(j), sub_dirs);
  rep.l2_sum = 0.0;
  for (double v : aux.values) rep.l2_sum += v * v * delta * delta;
  rep.l2_reference = lg * rep.mass;
  rep.l2_ratio = rep.l2_reference > 0.0 ? rep.l2_sum / rep.l2_reference : 0.0;

  for (std::size_t i : sub) {
    const Line<D> gi = fam.tube(i).axis();
    double wsum = 0.0;
    const Vec<D> qw = wedge_point(axis, gi);
    for (std::int64_t vox : fam.e_tube(i)) {
      const Vec<D> x = g.center(vox);
      const double d = dist_point_line(x, axis);
      if (d >= rep.sigma / 2.0 && d < rep.sigma) wsum += std::sqrt((x - qw).norm());
    }
    const double avg = wsum * g.cell_volume() / tube_volume(fam.tube(i));
    rep.avg_min = std::min(rep.avg_min, avg);
  }
  rep.avg_min_ratio = rep.avg_min / rep.avg_bound;
  return rep;
}

// Band split f = f1 + f2 + f3 at level lambda with alpha = 2q/(d+1) - 1:
// f1 below lambda/3, f2 above A^alpha lambda, f3 the middle band.
struct LayerCakeSplit {
  std::vector<double> f1, f2, f3;
  double alpha = 0.0;
};

inline double layer_cake_alpha(int d, double q) { return 2.0 * q / (d + 1.0) - 1.0; }

inline LayerCakeSplit layer_cake_split(const std::vector<double>& f, double lambda, double a,
                                       double q, int d) {
  if (!(a > 1.0)) throw parameter_error("layer_cake_split: need A > 1");
  if (!(q > (d + 1.0) / 2.0)) throw parameter_error("layer_cake_split: need q > (d+1)/2");
  LayerCakeSplit s;
  s.alpha = layer_cake_alpha(d, q);
  const double hi = std::pow(a, s.alpha) * lambda;
  const double lo = lambda / 3.0;
  s.f1.resize(f.size());
  s.f2.resize(f.size());
  s.f3.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = f[i], av = std::abs(v);
    s.f1[i] = av < lo ? v : 0.0;
    s.f2[i] = av > hi ? v : 0.0;
    s.f3[i] = (av >= lo && av <= hi) ? v : 0.0;
  }
  return s;
}

// The low band contributes nothing to the superlevel set at lambda/3: for
// f1 = c*chi_E with c < lambda/3, sup (f1)*_delta <= c by the exact sup-norm
// contraction, so the strict superlevel measure at lambda/3 vanishes.
template <int D>
inline bool low_band_superlevel_vanishes(const MaximalField<D>& mask_field, double scale,
                                         double lambda) {
  const double c = scale < lambda / 3.0 ? scale : 0.0;  // band keeps c*chi_E only if below
  std::int64_t n = 0;
  for (double v : mask_field.values)
    if (c * v > lambda / 3.0) ++n;
  return n == 0;
}

// Per-delta record of a sweep plus the fitted log-log exponent.
struct SweepRecord {
  double delta = 0.0;
  double measure_e = 0.0;
  std::int64_t m_lambda = 0;
  double lp = 0.0, lq = 0.0, ratio = 0.0;
  double lemma41_ratio = 0.0;
  double lemma51_min_ratio = 0.0;
  double discrete_ratio = 0.0;
};

struct LogLogFit {
  double exponent = 0.0, intercept = 0.0, residual = 0.0;
};

struct SweepOutcome {
  std::vector<SweepRecord> records;
  LogLogFit fit;
};

// Ordinary least squares of log(ratio) against log(delta).
inline LogLogFit fit_exponent(const std::vector<double>& deltas,
                              const std::vector<double>& ratios) {
  if (deltas.size() != ratios.size() || deltas.size() < 3)
    throw parameter_error("fit_exponent: need at least 3 scales");
  const auto n = static_cast<double>(deltas.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double x = std::log(deltas[i]), y = std::log(ratios[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  LogLogFit f;
  f.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.exponent * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double r = std::log(ratios[i]) - (f.intercept + f.exponent * std::log(deltas[i]));
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

// SweepResult CSV with the fixed header; config echo lines go first.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& recs,
                            const std::vector<std::string>& config_lines = {}) {
  for (const auto& line : config_lines) os << "# " << line << "\n";
  os << "delta,measure_E,M_lambda,lp_norm,lq_norm,ratio,lemma41_ratio,"
        "lemma51_min_ratio,discrete_ratio\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (const auto& r : recs) {
    num(r.delta);
    os << ',';
    num(r.measure_e);
    os << ',' << r.m_lambda << ',';
    num(r.lp);
    os << ',';
    num(r.lq);
    os << ',';
    num(r.ratio);
    os << ',';
    num(r.lemma41_ratio);
    os << ',';
    num(r.lemma51_min_ratio);
    os << ',';
    num(r.discrete_ratio);
    os << "\n";
  }
}

}  // namespace kakeya
