// Batch front-end: build corpora, evaluate maximal fields, run the scenario
// and volume-bound checks, sweep over delta, and emit CSV/JSON files.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kakeya/constructions.hpp"
#include "kakeya/inequalities.hpp"
#include "kakeya/mask_io.hpp"
#include "kakeya/maximal.hpp"
#include "kakeya/multiplicity.hpp"
#include "kakeya/parallel.hpp"
#include "kakeya/reports.hpp"

using namespace kakeya;
using nlohmann::json;

namespace {

struct CommonOpts {
  int dim = 3;
  std::string set = "ball";
  std::vector<std::string> params;
  std::uint64_t seed = 0;
  double grid_factor = 8.0;
  double cap = 2.0;
  double eps = 0.1;
  int threads = 0;
  std::string out_csv, out_json, out_mask;
};

ConstructionSpec parse_spec(const CommonOpts& o) {
  ConstructionSpec spec;
  spec.kind = construction_from_string(o.set);
  spec.seed = o.seed;
  for (const auto& kv : o.params) {
    auto pos = kv.find('=');
    if (pos == std::string::npos)
      throw parameter_error("--param expects key=value, got: " + kv);
    spec.params[kv.substr(0, pos)] = std::stod(kv.substr(pos + 1));
  }
  return spec;
}

std::vector<std::string> config_lines(const CommonOpts& o, const std::string& cmd,
                                      const std::string& deltas) {
  std::vector<std::string> lines;
  lines.push_back("tool=kakeya " + std::string(kVersion));
  lines.push_back("command=" + cmd);
  lines.push_back("dim=" + std::to_string(o.dim));
  lines.push_back("delta=" + deltas);
  lines.push_back("set=" + o.set);
  for (const auto& kv : o.params) lines.push_back("param=" + kv);
  lines.push_back("seed=" + std::to_string(o.seed));
  {
    std::ostringstream ss;
    ss << "grid_factor=" << o.grid_factor << " cap=" << o.cap << " eps=" << o.eps;
    lines.push_back(ss.str());
  }
  return lines;
}

json config_json(const std::vector<std::string>& lines) {
  json j = json::array();
  for (const auto& l : lines) j.push_back(l);
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw parameter_error("cannot open output file " + path);
  os << content;
}

template <int D>
int run_maximal(const CommonOpts& o, double delta) {
  auto spec = parse_spec(o);
  auto grid = std::make_shared<const VoxelGrid<D>>(
      VoxelGrid<D>::standard(delta, delta / o.grid_factor));
  const auto net = make_direction_net<D>(delta);
  auto built = build_construction<D>(spec, grid, delta, &net);
  const auto field = kakeya_maximal(built.mask, delta, net, o.cap);
  const auto lines = config_lines(o, "maximal", std::to_string(delta));

  if (!o.out_mask.empty()) write_mask_file(o.out_mask, built.mask);
  if (!o.out_csv.empty()) {
    std::ostringstream os;
    write_field_csv(os, field, lines);
    write_text_file(o.out_csv, os.str());
  }
  if (!o.out_json.empty()) {
    const auto ex = ExponentPair::standard(D);
    const auto prof = build_profile(field);
    json j;
    j["config"] = config_json(lines);
    j["directions"] = field.size();
    j["measure_E"] = built.mask.measure();
    j["max_value"] = field.max_value();
    j["l2_norm"] = lp_norm_sphere(field, 2.0);
    j["lq_norm"] = lp_norm_sphere(field, ex.q);
    j["profile"] = {{"levels", prof.levels}, {"measures", prof.measures}};
    write_text_file(o.out_json, j.dump(2) + "\n");
  }
  std::cout << "maximal: " << field.size() << " directions, max value "
            << field.max_value() << "\n";
  return 0;
}

template <int D>
int run_sweep(const CommonOpts& o, const std::vector<double>& deltas, double p, double q) {
  auto spec = parse_spec(o);
  ExponentPair ex = ExponentPair::standard(D);
  if (p > 0) ex.p = p;
  if (q > 0) ex.q = q;
  SweepOptions sopt;
  sopt.grid_factor = o.grid_factor;
  sopt.eps = o.eps;
  const auto out = delta_sweep<D>(spec, deltas, ex, sopt);

  std::ostringstream dl;
  for (std::size_t i = 0; i < deltas.size(); ++i) dl << (i ? "," : "") << deltas[i];
  const auto lines = config_lines(o, "sweep", dl.str());
  if (!o.out_csv.empty()) {
    std::ostringstream os;
    write_sweep_csv(os, out.records, lines);
    write_text_file(o.out_csv, os.str());
  }
  if (!o.out_json.empty()) {
    json j;
    j["config"] = config_json(lines);
    j["fit"] = to_json(out.fit);
    write_text_file(o.out_json, j.dump(2) + "\n");
  }
  std::cout << "sweep: fitted exponent " << out.fit.exponent << " (residual "
            << out.fit.residual << ")\n";
  return 0;
}

template <int D>
int run_multiplicity(const CommonOpts& o, double delta, const std::string& constants_mode) {
  auto spec = parse_spec(o);
  auto grid = std::make_shared<const VoxelGrid<D>>(
      VoxelGrid<D>::standard(delta, delta / o.grid_factor));
  auto built = build_construction<D>(spec, grid, delta);
  if (!built.family.has_value())
    throw parameter_error("multiplicity: construction '" + o.set +
                          "' does not produce a tube family");
  const auto ctx = FamilyContext<D>::build(*built.family);

  std::vector<ScenarioConstants> sets;
  if (constants_mode == "printed") {
    sets = {ScenarioConstants::printed()};
  } else if (constants_mode == "all") {
    sets = {ScenarioConstants::printed(), ScenarioConstants::relaxed(4.0, "relaxed4"),
            ScenarioConstants::relaxed(16.0, "relaxed16")};
  } else if (constants_mode == "relaxed4") {
    sets = {ScenarioConstants::relaxed(4.0, "relaxed4")};
  } else if (constants_mode == "relaxed16") {
    sets = {ScenarioConstants::relaxed(16.0, "relaxed16")};
  } else {
    throw parameter_error("unknown --constants mode: " + constants_mode);
  }

  const auto rep = find_high_pair(ctx, sets);
  const auto lines = config_lines(o, "multiplicity", std::to_string(delta));

  std::ostringstream csv;
  for (const auto& l : lines) csv << "# " << l << "\n";
  csv << "check,index,value,bound,ratio\n";
  bool all_ok = rep.found;
  {
    const auto vb = check_low_multiplicity_volume_bound(ctx, rep.n_min);
    csv << "lemma41,-1," << vb.lhs << ',' << vb.rhs << ',' << vb.lhs / vb.rhs << "\n";
    all_ok = all_ok && vb.holds;
  }
  if (rep.found) {
    const Vec<D> origin = Vec<D>::Zero();
    const auto em = check_escape_mass_condition(ctx, rep.scenario2_witnesses, origin, o.eps,
                                                rep.n_min, rep.sigma);
    for (std::size_t i = 0; i < em.measured.size(); ++i)
      csv << "condition47," << rep.scenario2_witnesses[i] << ',' << em.measured[i] << ','
          << em.bound << ',' << em.ratios[i] << "\n";
    if constexpr (D == 3) {
      const std::size_t n_chain = std::min<std::size_t>(rep.scenario2_witnesses.size(), 3);
      for (std::size_t i = 0; i < n_chain; ++i) {
        const auto chain = check_sigma_tube_chain(ctx, rep.scenario2_witnesses[i], rep.nu,
                                                  rep.nu_prime, rep.n_min, o.eps);
        csv << "lemma51_m0," << chain.j << ',' << chain.m0 << ',' << chain.m0_bound << ','
            << chain.m0_ratio << "\n";
        csv << "lemma51_avg," << chain.j << ',' << chain.avg_min << ',' << chain.avg_bound
            << ',' << chain.avg_min_ratio << "\n";
        csv << "lemma51_l2," << chain.j << ',' << chain.l2_sum << ',' << chain.l2_reference
            << ',' << chain.l2_ratio << "\n";
        csv << "lemma51_mass," << chain.j << ',' << chain.mass << ',' << chain.mass_bound
            << ',' << chain.mass_ratio << "\n";
        // at N = 0 the pigeonhole bound is trivial and the chain is vacuous
        if (rep.n_min >= 1) all_ok = all_ok && chain.nonempty && chain.mass_ratio > 0.0;
      }
    }
  }
  if (!o.out_csv.empty()) write_text_file(o.out_csv, csv.str());
  if (!o.out_json.empty()) {
    json j = to_json(rep);
    j["config"] = config_json(lines);
    write_text_file(o.out_json, j.dump(2) + "\n");
  }
  if (!rep.found) {
    std::cerr << "invariant violation: " << rep.diagnostic << "\n";
    return 1;
  }
  std::cout << "multiplicity: N_min=" << rep.n_min << " theta=" << rep.theta
            << " sigma=" << rep.sigma << " witnesses=" << rep.scenario2_witnesses.size()
            << " constants=" << rep.constants.name << "\n";
  return all_ok ? 0 : 1;
}

int run_verify();

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kakeya: discretized Kakeya maximal function laboratory"};
  app.require_subcommand(1);

  CommonOpts o;
  double delta = 0.1;
  std::vector<double> deltas;
  double p = 0, q = 0;
  std::string constants_mode = "all";

  auto add_common = [&](CLI::App* cmd, bool needs_set) {
    cmd->add_option("--dim", o.dim, "dimension (2 or 3)")->check(CLI::IsMember({2, 3}));
    if (needs_set) cmd->add_option("--set", o.set, "construction name")->required();
    cmd->add_option("--param", o.params, "construction parameter key=value");
    cmd->add_option("--seed", o.seed, "construction seed");
    cmd->add_option("--grid-factor", o.grid_factor, "delta/h ratio (default 8)");
    cmd->add_option("--cap", o.cap, "translation candidate radius (default 2)");
    cmd->add_option("--eps", o.eps, "epsilon exponent for the instance checks");
    cmd->add_option("--threads", o.threads, "worker thread cap (or env KKY_THREADS)");
    cmd->add_option("--out-csv", o.out_csv, "CSV output path");
    cmd->add_option("--out-json", o.out_json, "JSON output path");
  };

  auto* cmd_max = app.add_subcommand("maximal", "evaluate the Kakeya maximal field");
  add_common(cmd_max, true);
  cmd_max->add_option("--delta", delta, "tube radius")->required();
  cmd_max->add_option("--out-mask", o.out_mask, "write the mask in KKYM format");

  auto* cmd_sweep = app.add_subcommand("sweep", "delta sweep with exponent fit");
  add_common(cmd_sweep, true);
  cmd_sweep->add_option("--deltas", deltas, "strictly decreasing scales")
      ->required()
      ->delimiter(',');
  cmd_sweep->add_option("--p", p, "Lebesgue exponent p (default (d+2)/2)");
  cmd_sweep->add_option("--q", q, "sphere exponent q (default (d-1)p/(p-1))");

  auto* cmd_mult = app.add_subcommand("multiplicity", "scenario classification and checks");
  add_common(cmd_mult, true);
  cmd_mult->add_option("--delta", delta, "tube radius")->required();
  cmd_mult->add_option("--constants", constants_mode,
                       "printed | relaxed4 | relaxed16 | all (fallback order)");

  auto* cmd_verify = app.add_subcommand("verify", "run the invariant suite");
  cmd_verify->add_option("--threads", o.threads, "worker thread cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  if (o.threads > 0) set_thread_cap(o.threads);

  try {
    if (app.got_subcommand(cmd_max))
      return o.dim == 2 ? run_maximal<2>(o, delta) : run_maximal<3>(o, delta);
    if (app.got_subcommand(cmd_sweep)) {
      if (deltas.size() < 3) throw parameter_error("sweep: need at least 3 deltas");
      for (std::size_t i = 1; i < deltas.size(); ++i)
        if (!(deltas[i] < deltas[i - 1]))
          throw parameter_error("sweep: deltas must be strictly decreasing");
      return o.dim == 2 ? run_sweep<2>(o, deltas, p, q) : run_sweep<3>(o, deltas, p, q);
    }
    if (app.got_subcommand(cmd_mult))
      return o.dim == 2 ? run_multiplicity<2>(o, delta, constants_mode)
                        : run_multiplicity<3>(o, delta, constants_mode);
    if (app.got_subcommand(cmd_verify)) return run_verify();
  } catch (const parameter_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

namespace {

// Compact invariant battery used by `kakeya verify`. The full acceptance
// suite lives in the test tree; this covers the same ground at small scale.
int run_verify() {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  // direction nets
  {
    auto net = make_direction_net<3>(0.3);
    bool sep_ok = true;
    for (std::size_t i = 0; i < net.size() && sep_ok; ++i)
      for (std::size_t j = i + 1; j < net.size(); ++j)
        if (angle(net.dir(i), net.dir(j)) < 0.3 - 1e-12) {
          sep_ok = false;
          break;
        }
    report("direction net separation", sep_ok);
    report("direction net quadrature mass",
           std::abs(net.total_weight() - 4 * kPi) < 1e-9);
  }

  // rasterization oracle
  {
    const double delta = 0.1;
    auto g = std::make_shared<const VoxelGrid<3>>(VoxelGrid<3>::standard(delta, delta / 8));
    CounterRng rng(1);
    bool ok = true;
    for (int it = 0; it < 10; ++it) {
      Vec<3> v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      if (v.norm() < 0.2) continue;
      Tube<3> t(Direction<3>(v), Vec<3>(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                                        rng.uniform(-0.2, 0.2)),
                delta);
      const double vol = static_cast<double>(tube_voxel_count(*g, t)) * g->cell_volume();
      if (std::abs(vol / tube_volume(t) - 1.0) > 0.05) ok = false;
    }
    report("rasterized tube volume within 5%", ok);
  }

  // maximal invariants on a small corpus
  {
    const double delta = 0.1;
    auto g = std::make_shared<const VoxelGrid<3>>(VoxelGrid<3>::standard(delta, delta / 4));
    auto ball = SetMask<3>::from_predicate(
        g, [](const Vec<3>& x) { return x.squaredNorm() <= 1.0; });
    auto half = ball.filter([](const Vec<3>& x) { return x[0] > -0.1; });
    auto net = make_direction_net<3>(delta);
    const auto fb = kakeya_maximal(ball, delta, net);
    const auto fh = kakeya_maximal(half, delta, net);
    bool linf = true, mono = true, ballv = true;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (fb.values[i] > 1.0) linf = false;
      if (fh.values[i] > fb.values[i]) mono = false;
      if (fb.values[i] < 0.98) ballv = false;
    }
    report("sup-norm contraction", linf);
    report("monotonicity in E", mono);
    report("ball maximal values in [0.98, 1]", ballv);
  }

  // multiplicity pipeline on a bush
  {
    const double delta = 0.1;
    auto g = std::make_shared<const VoxelGrid<3>>(VoxelGrid<3>::standard(delta, delta / 8));
    ConstructionSpec spec;
    spec.kind = ConstructionKind::bush;
    spec.params["m"] = 15;
    auto b = build_construction<3>(spec, g, delta);
    const auto ctx = FamilyContext<3>::build(*b.family);
    report("minimal low-multiplicity threshold matches brute force",
           minimal_low_n(ctx) == minimal_low_n_bruteforce(ctx));
    const auto rep = find_high_pair(ctx);
    report("dyadic pigeonhole pair found", rep.found);
    if (rep.found) {
      const auto vb = check_low_multiplicity_volume_bound(ctx, rep.n_min);
      report("volume bound under scenario I", vb.holds);
    }
  }

  // norm identities
  {
    CounterRng rng(5);
    std::vector<double> v(64);
    for (auto& x : v) x = rng.uniform(0, 1);
    MaximalField<3> f;
    f.values = v;
    f.quad_weight = 0.13;
    f.dirs.assign(v.size(), Direction<3>(Vec<3>(1, 0, 0)));
    f.witnesses.assign(v.size(), Vec<3>::Zero());
    f.tube_counts.assign(v.size(), 1);
    bool ok = true;
    for (double p : {1.5, 2.0, 10.0 / 3.0}) {
      const double a = lp_norm_sphere(f, p);
      const double b2 = layer_cake_lp(build_profile(f), p);
      if (std::abs(a - b2) > 1e-9 * std::max(1.0, a)) ok = false;
    }
    report("layer-cake identity", ok);
  }

  // perron tree guarantee at delta = 0.1
  {
    const double delta = 0.1;
    auto g = std::make_shared<const VoxelGrid<2>>(VoxelGrid<2>::standard(delta, delta / 8));
    auto m = perron_tree_2d(g, delta, static_cast<int>(std::ceil(log2_inv(delta))));
    auto net = make_direction_net<2>(delta);
    const auto f = kakeya_maximal(m, delta, net);
    std::size_t good = 0;
    for (double v : f.values)
      if (v >= 0.25) ++good;
    report("perron tree keeps half the directions above 1/4",
           static_cast<double>(good) >= 0.5 * static_cast<double>(net.size()));
  }

  std::cout << (failures == 0 ? "verify: all checks passed\n"
                              : "verify: " + std::to_string(failures) + " failures\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace
