#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "kgxk/kg.hpp"
#include "kgxk/model.hpp"
#include "kgxk/rng.hpp"

namespace testing {

using namespace kgxk;

inline Vocab make_vocab(std::size_t entities, std::size_t relations) {
  Vocab v;
  for (std::size_t i = 0; i < entities; ++i) v.add_entity("n" + std::to_string(i));
  for (std::size_t r = 0; r < relations; ++r) v.add_relation("r" + std::to_string(r));
  return v;
}

inline KnowledgeGraph make_graph(const std::vector<Triple>& triples, std::size_t entities, std::size_t relations,
                                 bool inverse = true) {
  return KnowledgeGraph::build(triples, make_vocab(entities, relations), inverse);
}

// Distinct triples without self loops.
inline std::vector<Triple> random_triples(Rng& rng, std::size_t entities, std::size_t relations, std::size_t count) {
  std::set<Triple> seen;
  std::vector<Triple> out;
  while (out.size() < count) {
    Triple t{static_cast<EntityId>(uniform_index(rng, entities)), static_cast<RelationId>(uniform_index(rng, relations)),
             static_cast<EntityId>(uniform_index(rng, entities))};
    if (t.head == t.tail || !seen.insert(t).second) continue;
    out.push_back(t);
  }
  return out;
}

inline ModelHandle small_model(const KnowledgeGraph& g, std::uint64_t seed, Aggregation agg = Aggregation::kSum,
                               MessageKind msg = MessageKind::kMultiplicative, int dim = 4, int layers = 2) {
  BackboneConfig c;
  c.embed_dim = dim;
  c.num_layers = layers;
  c.aggregation = agg;
  c.message = msg;
  return init_model(c, g, seed);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kgxk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
