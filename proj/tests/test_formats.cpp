#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kakeya/constructions.hpp"
#include "kakeya/mask_io.hpp"
#include "kakeya/reports.hpp"

using namespace kakeya;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(KKY_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}
}  // namespace

TEST_CASE("field csv layout") {
  MaximalField<2> f;
  f.delta = 0.1;
  f.quad_weight = 1.0;
  f.dirs = {Direction<2>(Vec<2>(1, 0)), Direction<2>(Vec<2>(0, 1))};
  f.values = {0.5, 0.25};
  f.witnesses = {Vec<2>(0.1, 0.2), Vec<2>(-0.3, 0.0)};
  f.tube_counts = {10, 10};
  std::ostringstream os;
  write_field_csv(os, f, {"command=test"});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# command=test");
  std::getline(is, line);
  CHECK(line == "nu,xi_1,xi_2,value,witness_a_1,witness_a_2");
  std::getline(is, line);
  CHECK(line.substr(0, 4) == "0,1,");
}

TEST_CASE("sweep csv header is pinned") {
  std::ostringstream os;
  write_sweep_csv(os, {});
  CHECK(os.str() ==
        "delta,measure_E,M_lambda,lp_norm,lq_norm,ratio,lemma41_ratio,"
        "lemma51_min_ratio,discrete_ratio\n");
}

TEST_CASE("multiplicity report json carries the contract fields") {
  MultiplicityReport r;
  r.found = true;
  r.n_min = 3;
  r.nu = 1;
  r.nu_prime = 2;
  r.theta = 0.2;
  r.sigma = 0.4;
  r.scenario1_witnesses = {0, 1};
  r.scenario2_witnesses = {2};
  r.per_j_choice.push_back({0, 1, 2});
  auto j = to_json(r);
  for (const char* key : {"N_min", "theta", "sigma", "nu", "nu_prime", "scenarioI_witnesses",
                          "scenarioII_witnesses", "constants"})
    CHECK(j.contains(key));
  CHECK(j["N_min"] == 3);
  CHECK(j["constants"]["name"] == "printed");
}

TEST_CASE("cli: missing required flag exits with code 2 and bad set is rejected") {
  CHECK(run_cli("maximal") == 2);
  CHECK(run_cli("maximal --set ball") == 2);  // missing --delta
  CHECK(run_cli("maximal --set nope --delta 0.2") == 2);
  CHECK(run_cli("sweep --set ball --deltas 0.2,0.2,0.1") == 2);
}

TEST_CASE("cli maximal produces deterministic files") {
  const std::string csv1 = "/tmp/kky_field1.csv", csv2 = "/tmp/kky_field2.csv";
  const std::string js = "/tmp/kky_field1.json";
  const std::string base = "maximal --dim 2 --delta 0.2 --set ball --grid-factor 4";
  REQUIRE(run_cli(base + " --out-csv " + csv1 + " --out-json " + js) == 0);
  REQUIRE(run_cli(base + " --out-csv " + csv2) == 0);
  CHECK(slurp(csv1) == slurp(csv2));

  auto j = nlohmann::json::parse(slurp(js));
  CHECK(j.contains("config"));
  CHECK(j.contains("profile"));
  CHECK(j["max_value"].get<double>() <= 1.0);
  std::remove(csv1.c_str());
  std::remove(csv2.c_str());
  std::remove(js.c_str());
}

TEST_CASE("cli multiplicity emits report and lemma csv") {
  const std::string js = "/tmp/kky_mult.json", csv = "/tmp/kky_mult.csv";
  REQUIRE(run_cli("multiplicity --dim 3 --delta 0.1 --set disjoint_tubes --param m=6 "
                  "--grid-factor 8 --out-json " +
                  js + " --out-csv " + csv) == 0);
  auto j = nlohmann::json::parse(slurp(js));
  CHECK(j["found"] == true);
  CHECK(j["N_min"] == 0);
  const auto csvtext = slurp(csv);
  CHECK(csvtext.find("check,index,value,bound,ratio") != std::string::npos);
  CHECK(csvtext.find("lemma41") != std::string::npos);
  std::remove(js.c_str());
  std::remove(csv.c_str());
}

TEST_CASE("cli maximal on the perron tree keeps half the directions high") {
  const std::string js = "/tmp/kky_perron.json";
  REQUIRE(run_cli("maximal --dim 2 --delta 0.1 --set perron_tree --out-json " + js) == 0);
  auto j = nlohmann::json::parse(slurp(js));
  const auto levels = j["profile"]["levels"].get<std::vector<double>>();
  const auto measures = j["profile"]["measures"].get<std::vector<double>>();
  // mass of {f* >= 1/4} is at least half the circle
  double mass_quarter = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] >= 0.25) {
      mass_quarter = measures[i];
      break;
    }
  CHECK(mass_quarter >= 0.5 * 2 * 3.14159265358979);
  std::remove(js.c_str());
}

TEST_CASE("cli mask output round-trips") {
  const std::string mp = "/tmp/kky_mask.kkym";
  REQUIRE(run_cli("maximal --dim 2 --delta 0.2 --set ball --grid-factor 4 --out-mask " + mp) ==
          0);
  CHECK(peek_mask_dimension(mp) == 2);
  auto m = read_mask_file<2>(mp);
  CHECK(m.popcount() > 0);
  std::remove(mp.c_str());
}

TEST_CASE("cli sweep fits a flat exponent on a ball") {
  const std::string js = "/tmp/kky_sweep.json", csv = "/tmp/kky_sweep.csv";
  REQUIRE(run_cli("sweep --dim 2 --deltas 0.3,0.2,0.15 --set ball --grid-factor 4 "
                  "--out-json " + js + " --out-csv " + csv) == 0);
  auto j = nlohmann::json::parse(slurp(js));
  CHECK(std::abs(j["fit"]["exponent"].get<double>()) < 0.05);
  const auto text = slurp(csv);
  CHECK(text.find("delta,measure_E,M_lambda") != std::string::npos);
  std::remove(js.c_str());
  std::remove(csv.c_str());
}
