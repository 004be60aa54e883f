#include "kgxk/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "kgxk/error.hpp"
#include "kgxk/rng.hpp"

namespace kgxk {

std::optional<PlantedPath> PlantedKg::path_for(const Triple& fact) const {
  for (const auto& p : paths)
    if (p.fact == fact) return p;
  return std::nullopt;
}

PlantedKg make_planted_kg(const PlantedKgConfig& c) {
  const auto n = c.num_entities;
  if (n < 4) throw ConfigError("planted KG needs at least 4 entities");
  if (c.num_rules < 1 || c.facts_per_rule < 1) throw ConfigError("planted KG needs rules and facts");
  if (static_cast<std::size_t>(c.facts_per_rule) > n / 2)
    throw ConfigError("facts_per_rule must be at most num_entities / 2");
  if (c.valid_fraction < 0 || c.test_fraction < 0 || c.valid_fraction + c.test_fraction >= 1.0)
    throw ConfigError("split fractions must be non-negative and sum below 1");

  PlantedKg out;
  auto& vocab = out.dataset.vocab;
  for (std::size_t i = 0; i < n; ++i) vocab.add_entity("e" + std::to_string(i));
  std::vector<RelationId> rule_rel, hop_a, hop_b, noise_rel;
  for (int i = 0; i < c.num_rules; ++i) {
    const auto tag = std::to_string(i);
    rule_rel.push_back(vocab.add_relation("rule" + tag));
    hop_a.push_back(vocab.add_relation("rule" + tag + "_a"));
    hop_b.push_back(vocab.add_relation("rule" + tag + "_b"));
  }
  for (int j = 0; j < c.noise_relations; ++j) noise_rel.push_back(vocab.add_relation("noise" + std::to_string(j)));

  Rng rng = make_rng(c.seed, {0x91a7});
  std::vector<Triple> background;
  std::unordered_set<Triple, TripleHash> seen;
  auto add_background = [&](const Triple& t) {
    if (seen.insert(t).second) background.push_back(t);
  };
  auto random_entity = [&]() { return static_cast<EntityId>(uniform_index(rng, n)); };

  std::vector<EntityId> perm(n);
  for (int i = 0; i < c.num_rules; ++i) {
    // Heads and intermediates are disjoint, so each head has one hop_a edge
    // and each intermediate one hop_b edge for this rule.
    std::iota(perm.begin(), perm.end(), EntityId{0});
    shuffle(std::span<EntityId>(perm), rng);
    const auto f = static_cast<std::size_t>(c.facts_per_rule);
    std::unordered_set<EntityId> heads(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(f));
    std::unordered_set<EntityId> mids(perm.begin() + static_cast<std::ptrdiff_t>(f),
                                      perm.begin() + static_cast<std::ptrdiff_t>(2 * f));
    for (std::size_t k = 0; k < f; ++k) {
      const EntityId h = perm[k], x = perm[f + k];
      EntityId t = random_entity();
      while (t == h || t == x) t = random_entity();
      PlantedPath p{{h, rule_rel[i], t}, {h, hop_a[i], x}, {x, hop_b[i], t}};
      add_background(p.first_hop);
      add_background(p.second_hop);
      out.paths.push_back(p);
    }
    // Distractor hops that never complete a path: hop_b out of non-mids and
    // hop_a from non-heads into entities without a hop_b edge.
    std::unordered_set<EntityId> b_sources, a_targets;
    for (int k = 0; k < c.distractors_per_rule; ++k) {
      EntityId y = random_entity(), z = random_entity();
      while (mids.contains(y) || a_targets.contains(y) || y == z) {
        y = random_entity();
        z = random_entity();
      }
      b_sources.insert(y);
      add_background({y, hop_b[i], z});
      EntityId a = random_entity(), b = random_entity();
      while (heads.contains(a) || mids.contains(b) || b_sources.contains(b) || a == b) {
        a = random_entity();
        b = random_entity();
      }
      a_targets.insert(b);
      add_background({a, hop_a[i], b});
    }
  }
  for (std::size_t k = 0; k < c.noise_edges && !noise_rel.empty(); ++k) {
    EntityId a = random_entity(), b = random_entity();
    while (a == b) b = random_entity();
    add_background({a, noise_rel[uniform_index(rng, noise_rel.size())], b});
  }

  std::vector<std::size_t> fact_order(out.paths.size());
  std::iota(fact_order.begin(), fact_order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(fact_order), rng);
  const auto total = static_cast<double>(fact_order.size());
  const auto n_valid = static_cast<std::size_t>(c.valid_fraction * total);
  const auto n_test = static_cast<std::size_t>(c.test_fraction * total);
  for (std::size_t k = 0; k < fact_order.size(); ++k) {
    const Triple& fact = out.paths[fact_order[k]].fact;
    if (k < n_valid) {
      out.dataset.valid.push_back(fact);
    } else if (k < n_valid + n_test) {
      out.dataset.test.push_back(fact);
    } else {
      out.dataset.train.push_back(fact);
    }
  }
  out.dataset.train.insert(out.dataset.train.end(), background.begin(), background.end());
  return out;
}

}  // namespace kgxk
