#pragma once

#include <json.hpp>

#include "kakeya/inequalities.hpp"
#include "kakeya/multiplicity.hpp"

namespace kakeya {

inline nlohmann::json to_json(const ScenarioConstants& c) {
  return nlohmann::json{{"low_density_factor", c.low_density_factor},
                        {"low_witness_fraction", c.low_witness_fraction},
                        {"iset_mass_div", c.iset_mass_div},
                        {"card_div", c.card_div},
                        {"high_measure_div", c.high_measure_div},
                        {"high_witness_div", c.high_witness_div},
                        {"claim_min_angle_factor", c.claim_min_angle_factor},
                        {"name", c.name}};
}

inline nlohmann::json to_json(const MultiplicityReport& r) {
  nlohmann::json per_j = nlohmann::json::array();
  for (const auto& t : r.per_j_choice)
    per_j.push_back({{"j", t[0]}, {"nu", t[1]}, {"nu_prime", t[2]}});
  nlohmann::json j{{"found", r.found},
                   {"N_min", r.n_min},
                   {"theta", r.theta},
                   {"sigma", r.sigma},
                   {"nu", r.nu},
                   {"nu_prime", r.nu_prime},
                   {"scenarioI_witnesses", r.scenario1_witnesses},
                   {"scenarioII_witnesses", r.scenario2_witnesses},
                   {"per_j", per_j},
                   {"constants", to_json(r.constants)}};
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

inline nlohmann::json to_json(const LogLogFit& f) {
  return nlohmann::json{
      {"exponent", f.exponent}, {"intercept", f.intercept}, {"residual", f.residual}};
}

inline nlohmann::json to_json(const SigmaTubeChainReport& r) {
  return nlohmann::json{{"j", r.j},
                        {"theta", r.theta},
                        {"sigma", r.sigma},
                        {"m0", r.m0},
                        {"m0_bound", r.m0_bound},
                        {"m0_ratio", r.m0_ratio},
                        {"avg_min", r.avg_min},
                        {"avg_bound", r.avg_bound},
                        {"avg_min_ratio", r.avg_min_ratio},
                        {"l2_sum", r.l2_sum},
                        {"l2_reference", r.l2_reference},
                        {"l2_ratio", r.l2_ratio},
                        {"mass", r.mass},
                        {"mass_bound", r.mass_bound},
                        {"mass_ratio", r.mass_ratio},
                        {"nonempty", r.nonempty}};
}

}  // namespace kakeya
