#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>

#include "helpers.hpp"
#include "kgxk/error.hpp"
#include "kgxk/synthetic.hpp"

using namespace kgxk;
using namespace testing;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Undirected BFS by scanning every kept edge each round.
std::vector<std::uint32_t> slow_distances(const SubgraphView& view, EntityId seed) {
  const auto& g = view.graph();
  std::vector<std::uint32_t> d(g.num_entities(), kUnreachable);
  d[seed] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (EdgeId e : view.edge_ids()) {
      const auto& t = g.edge(e);
      for (auto [a, b] : {std::pair{t.head, t.tail}, std::pair{t.tail, t.head}})
        if (d[a] != kUnreachable && d[a] + 1 < d[b]) {
          d[b] = d[a] + 1;
          changed = true;
        }
    }
  }
  return d;
}

}  // namespace

TEST_CASE("triples load with first-appearance ids") {
  auto dir = scratch_dir("kg_load");
  write_file(dir / "t.txt", "a\tlikes\tb\r\n\nb\tlikes\tc\nc\thates\ta\n");
  auto loaded = load_triples(dir / "t.txt");
  REQUIRE(loaded.triples.size() == 3);
  CHECK(loaded.vocab.num_entities() == 3);
  CHECK(loaded.vocab.num_relations() == 2);
  CHECK(loaded.vocab.entity_name(2) == "c");
  CHECK(loaded.triples[2] == Triple{2, 1, 0});
}

TEST_CASE("malformed line reports its line number") {
  auto dir = scratch_dir("kg_parse");
  write_file(dir / "t.txt", "a\tr\tb\na\tr\n");
  try {
    load_triples(dir / "t.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("fixed vocabulary rejects unknown names") {
  auto dir = scratch_dir("kg_vocab");
  write_file(dir / "t.txt", "a\tr\tzzz\n");
  Vocab v;
  v.add_entity("a");
  v.add_relation("r");
  CHECK_THROWS_AS(load_triples(dir / "t.txt", &v), VocabError);
}

TEST_CASE("dataset vocabulary covers every split") {
  auto dir = scratch_dir("kg_dataset");
  write_file(dir / "train.txt", "a\tr\tb\n");
  write_file(dir / "valid.txt", "b\tr\tc\n");
  write_file(dir / "test.txt", "d\ts\ta\n");
  auto ds = load_dataset(dir);
  CHECK(ds.vocab.num_entities() == 4);
  CHECK(ds.vocab.num_relations() == 2);
  CHECK(ds.test[0] == Triple{3, 1, 0});

  save_triples(dir / "copy.txt", ds.train, ds.vocab);
  auto again = load_triples(dir / "copy.txt", &ds.vocab);
  CHECK(again.triples == ds.train);
}

TEST_CASE("build deduplicates and pairs inverse edges") {
  std::vector<Triple> t = {{0, 0, 1}, {1, 1, 2}, {0, 0, 1}};
  BuildStats stats;
  auto g = KnowledgeGraph::build(t, make_vocab(3, 2), true, &stats);
  CHECK(stats.input_triples == 3);
  CHECK(stats.duplicates_removed == 1);
  CHECK(g.num_edges() == 4);
  CHECK(g.num_relations() == 4);
  for (EdgeId e = 0; e < g.num_edges(); e += 2) {
    const auto& a = g.edge(e);
    const auto& b = g.edge(g.paired_edge(e));
    CHECK(b.head == a.tail);
    CHECK(b.tail == a.head);
    CHECK(b.relation == g.inverse(a.relation));
    CHECK(g.paired_edge(g.paired_edge(e)) == e);
  }
  CHECK(g.relation_label(2) == "r0^-1");
  CHECK(g.find_edge({1, 2, 0}).has_value());
  CHECK_FALSE(g.find_edge({1, 0, 0}).has_value());

  auto plain = KnowledgeGraph::build(t, make_vocab(3, 2), false);
  CHECK(plain.num_edges() == 2);
  CHECK(plain.paired_edge(1) == 1);
}

TEST_CASE("adjacency lists agree with the edge table") {
  Rng rng = make_rng(3);
  auto g = make_graph(random_triples(rng, 20, 3, 60), 20, 3);
  std::size_t out_total = 0, in_total = 0;
  for (EntityId v = 0; v < 20; ++v) {
    for (EdgeId e : g.out_edges(v)) CHECK(g.edge(e).head == v);
    for (EdgeId e : g.in_edges(v)) CHECK(g.edge(e).tail == v);
    out_total += g.out_edges(v).size();
    in_total += g.in_edges(v).size();
  }
  CHECK(out_total == g.num_edges());
  CHECK(in_total == g.num_edges());
}

TEST_CASE("subgraph views") {
  Rng rng = make_rng(4);
  auto g = make_graph(random_triples(rng, 10, 2, 15), 10, 2);
  auto full = SubgraphView::full(g);
  auto none = SubgraphView::empty(g);
  CHECK(full.size() == g.num_edges());
  CHECK(none.size() == 0);
  const EdgeId some[] = {5, 1, 3};
  auto v = SubgraphView::from_edges(g, some);
  CHECK(v.edge_ids() == std::vector<EdgeId>{1, 3, 5});
  CHECK(v.is_subset_of(full));
  CHECK_FALSE(full.is_subset_of(v));
  const EdgeId drop[] = {3};
  CHECK(v.without(drop).size() == 2);
  CHECK(v.intersect(none) == none);
  CHECK(full.intersect(v) == v);
}

TEST_CASE("hop distances and ego networks match brute force") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = make_rng(seed, {1});
    auto g = make_graph(random_triples(rng, 25, 3, 35), 25, 3);
    auto view = drop_edges_uniform(g, 0.2, seed);
    const EntityId anchor = static_cast<EntityId>(seed % 25);
    const EntityId seeds[] = {anchor};
    auto fast = hop_distances(view, seeds);
    auto slow = slow_distances(view, anchor);
    CHECK(fast == slow);
    for (int radius : {0, 1, 2, 3}) {
      auto ego = ego_network(view, seeds, radius);
      for (EdgeId e = 0; e < g.num_edges(); ++e) {
        const auto& t = g.edge(e);
        const bool inside = view.contains(e) && slow[t.head] != kUnreachable && slow[t.tail] != kUnreachable &&
                            slow[t.head] <= static_cast<std::uint32_t>(radius) &&
                            slow[t.tail] <= static_cast<std::uint32_t>(radius);
        CHECK(ego.contains(e) == inside);
      }
    }
  }
}

TEST_CASE("distance-decay schedule values") {
  auto s = DropSchedule::distance_decay();
  CHECK(s.drop_probability(0) == doctest::Approx(0.0));
  CHECK(s.drop_probability(1) == doctest::Approx(0.285).epsilon(1e-12));
  CHECK(s.drop_probability(3) == doctest::Approx(0.95 * (1 - 0.343)).epsilon(1e-12));
  CHECK(std::abs(s.drop_probability(3) - 0.624) < 1e-3);
  CHECK(s.drop_probability(kUnreachable) == doctest::Approx(0.95));
  for (std::uint32_t d = 0; d < 10; ++d) CHECK(s.drop_probability(d) <= s.drop_probability(d + 1));
  CHECK_THROWS_AS(DropSchedule::uniform(1.5).validate(), ConfigError);
  CHECK_THROWS_AS(DropSchedule::distance_decay(0.9, 1.2).validate(), ConfigError);
}

TEST_CASE("uniform drop keeps inverse pairs together at the expected rate") {
  Rng rng = make_rng(9);
  auto g = make_graph(random_triples(rng, 200, 4, 2000), 200, 4);
  CHECK(drop_edges_uniform(g, 0.0, 1).size() == g.num_edges());
  CHECK(drop_edges_uniform(g, 1.0, 1).size() == 0);
  auto v = drop_edges_uniform(g, 0.3, 5);
  for (EdgeId e = 0; e < g.num_edges(); ++e) CHECK(v.contains(e) == v.contains(g.paired_edge(e)));
  // Binomial(2000, 0.3) dropped base triples; 5 standard deviations.
  const double dropped = 2000.0 - static_cast<double>(v.size()) / 2.0;
  CHECK(std::abs(dropped - 600.0) < 5.0 * std::sqrt(2000 * 0.3 * 0.7));
  CHECK(drop_edges_uniform(g, 0.3, 5) == v);
  CHECK_FALSE(drop_edges_uniform(g, 0.3, 6) == v);
  CHECK_THROWS_AS(drop_edges_uniform(g, -0.1, 1), ConfigError);
}

TEST_CASE("distance drop never removes anchor edges and favours near edges") {
  Rng rng = make_rng(10);
  auto g = make_graph(random_triples(rng, 100, 3, 400), 100, 3);
  const EntityId anchor = 0;
  const EntityId seeds[] = {anchor};
  auto dist = hop_distances(SubgraphView::full(g), seeds);
  std::map<std::uint32_t, std::pair<int, int>> kept_by_d;  // d -> (kept, total)
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto v = drop_edges_distance(g, anchor, DropSchedule::distance_decay(), s);
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
      const auto& t = g.edge(e);
      const auto d = std::min(dist[t.head], dist[t.tail]);
      kept_by_d[d].first += v.contains(e);
      kept_by_d[d].second += 1;
      if (d == 0) CHECK(v.contains(e));
    }
  }
  for (auto [d, kt] : kept_by_d) {
    if (d == 0 || kt.second < 200) continue;
    const double expected = 1.0 - DropSchedule::distance_decay().drop_probability(d);
    CHECK(std::abs(static_cast<double>(kt.first) / kt.second - expected) < 0.06);
  }
}

TEST_CASE("queries, known triples and candidate filtering") {
  std::vector<Triple> t = {{0, 0, 1}, {0, 0, 2}, {3, 1, 1}};
  auto q = make_queries(t, 2);
  REQUIRE(q.size() == 6);
  CHECK(q[0] == Query{0, 0, 1});
  CHECK(q[1] == Query{1, 2, 0});
  KnownTriples known(2);
  known.add(t);
  CHECK(known.contains({0, 0, 2}));
  CHECK(known.contains({2, 2, 0}));
  CHECK_FALSE(known.contains({2, 0, 0}));

  Rng rng = make_rng(12);
  auto facts = random_triples(rng, 15, 2, 40);
  KnownTriples all(2);
  all.add(facts);
  for (const auto& query : make_queries(facts, 2)) {
    auto mask = filtered_candidates(query, all, 15);
    for (EntityId v = 0; v < 15; ++v) {
      const bool other_truth = v != query.answer && all.contains({query.head, query.relation, v});
      CHECK(mask[v] == !other_truth);
    }
  }
}

TEST_CASE("planted graph has exactly one completing path per fact") {
  PlantedKgConfig c;
  c.seed = 5;
  auto kg = make_planted_kg(c);
  const auto& ds = kg.dataset;
  CHECK(kg.paths.size() == static_cast<std::size_t>(c.num_rules * c.facts_per_rule));
  CHECK(ds.valid.size() + ds.test.size() > 0);
  auto g = KnowledgeGraph::build(ds.train, ds.vocab);
  std::map<std::pair<EntityId, RelationId>, std::vector<EntityId>> out;
  for (const auto& t : ds.train) out[{t.head, t.relation}].push_back(t.tail);
  for (const auto& p : kg.paths) {
    CHECK(g.find_edge(p.first_hop).has_value());
    CHECK(g.find_edge(p.second_hop).has_value());
    std::vector<EntityId> ends;
    for (EntityId x : out[{p.fact.head, p.first_hop.relation}])
      for (EntityId t : out[{x, p.second_hop.relation}]) ends.push_back(t);
    CHECK(ends == std::vector<EntityId>{p.fact.tail});
  }
  CHECK(make_planted_kg(c).dataset.train == ds.train);
}
