#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kgxk/kg.hpp"

namespace kgxk {

// Knowledge graph with planted two-hop rules: for each rule i the fact
// rule_i(h, t) holds exactly when rule_i_a(h, x) and rule_i_b(x, t) do, and
// every rule head has a single such path. Noise edges and non-completing
// distractor hops surround the paths.
struct PlantedKgConfig {
  std::size_t num_entities = 150;
  int num_rules = 3;
  int facts_per_rule = 50;
  int noise_relations = 4;
  std::size_t noise_edges = 300;
  int distractors_per_rule = 15;
  double valid_fraction = 0.15;
  double test_fraction = 0.15;
  std::uint64_t seed = 0;
};

struct PlantedPath {
  Triple fact;
  Triple first_hop;   // (h, rule_a, x)
  Triple second_hop;  // (x, rule_b, t)
};

struct PlantedKg {
  Dataset dataset;
  std::vector<PlantedPath> paths;

  // The planted path behind a rule fact, if any.
  std::optional<PlantedPath> path_for(const Triple& fact) const;
};

PlantedKg make_planted_kg(const PlantedKgConfig& config);

}  // namespace kgxk
