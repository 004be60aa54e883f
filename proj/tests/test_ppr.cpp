#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "kgxk/error.hpp"
#include "kgxk/ppr.hpp"

using namespace kgxk;
using namespace testing;

namespace {

EdgeMask random_mask(const SubgraphView& view, Rng& rng) {
  auto m = EdgeMask::constant(view, 0.0);
  for (auto& v : m.values) v = uniform01(rng);
  return m;
}

Matrix dense_transition(const StochasticAdjacency& adj) {
  const auto n = static_cast<Eigen::Index>(adj.num_entities);
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t s = 0; s < adj.num_entities; ++s) {
    for (std::size_t i = adj.offsets[s]; i < adj.offsets[s + 1]; ++i) m(s, adj.targets[i]) += adj.probs[i];
    for (EntityId t : adj.teleport_to) m(s, t) += adj.teleport[s] / static_cast<double>(adj.teleport_to.size());
  }
  return m;
}

// Stationary distribution of the row-stochastic matrix by a dense solve of
// pi (I - M) = 0 with sum(pi) = 1.
Vector dense_stationary(const Matrix& m) {
  const auto n = m.rows();
  Eigen::MatrixXd a = (Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd(m)).transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[n - 1] = 1.0;
  return a.fullPivLu().solve(b);
}

PPRConfig tight() {
  PPRConfig c;
  c.epsilon = 1e-13;
  c.max_iter = 100000;
  return c;
}

}  // namespace

TEST_CASE("relation collapse") {
  std::vector<Triple> t = {{0, 0, 1}, {0, 1, 1}, {1, 0, 2}};
  auto g = make_graph(t, 3, 2, false);
  EdgeMask m{{0, 1, 2}, {0.2, 0.8, 0.4}};
  auto mx = collapse_relations(m, g, Collapse::kMax);
  auto sm = collapse_relations(m, g, Collapse::kSum);
  auto mn = collapse_relations(m, g, Collapse::kMean);
  REQUIRE(mx.size() == 2);
  CHECK(mx.weight[0] == 0.8);
  CHECK(sm.weight[0] == doctest::Approx(1.0));
  CHECK(mn.weight[0] == doctest::Approx(0.5));
  for (const auto* pw : {&mx, &sm, &mn}) CHECK(pw->weight[1] == 0.4);
  CHECK(parse_collapse("sum") == Collapse::kSum);
  CHECK_THROWS_AS(parse_collapse("median"), ConfigError);
}

TEST_CASE("relation collapse matches a group-by oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, {1});
    auto g = make_graph(random_triples(rng, 8, 4, 40), 8, 4);
    auto mask = random_mask(SubgraphView::full(g), rng);
    std::map<std::pair<EntityId, EntityId>, std::vector<double>> groups;
    for (std::size_t i = 0; i < mask.edges.size(); ++i) {
      const auto& e = g.edge(mask.edges[i]);
      groups[{e.head, e.tail}].push_back(mask.values[i]);
    }
    for (auto method : {Collapse::kMax, Collapse::kSum, Collapse::kMean}) {
      auto pw = collapse_relations(mask, g, method);
      REQUIRE(pw.size() == groups.size());
      std::size_t i = 0;
      for (const auto& [key, vals] : groups) {
        CHECK(pw.source[i] == key.first);
        CHECK(pw.target[i] == key.second);
        double expect = method == Collapse::kMax ? *std::max_element(vals.begin(), vals.end()) : 0.0;
        if (method != Collapse::kMax) {
          for (double v : vals) expect += v;
          if (method == Collapse::kMean) expect /= static_cast<double>(vals.size());
        }
        CHECK(pw.weight[i] == doctest::Approx(expect).epsilon(1e-14));
        ++i;
      }
    }
  }
}

TEST_CASE("teleport set") {
  Vector s(5);
  s << 0.3, 0.9, 0.9, 0.1, 0.5;
  CHECK(teleport_set(s, 3, 0) == std::vector<EntityId>{3});
  CHECK(teleport_set(s, 3, 1) == std::vector<EntityId>{1, 3});
  CHECK(teleport_set(s, 3, 2) == std::vector<EntityId>{1, 2, 3});
  CHECK(teleport_set(s, 3, 3) == std::vector<EntityId>{1, 2, 3, 4});
  CHECK(teleport_set(s, 1, 2) == std::vector<EntityId>{1, 2});
  CHECK(teleport_set(s, 0, 5) == std::vector<EntityId>{0, 1, 2, 3, 4});
  CHECK(teleport_set(s, 0, 9).size() == 5);
  CHECK_THROWS_AS(teleport_set(s, 0, -1), ContractError);
}

TEST_CASE("stochastic adjacency edge cases") {
  std::vector<Triple> t = {{0, 0, 1}, {1, 0, 2}, {2, 0, 0}, {3, 0, 0}};
  auto g = make_graph(t, 5, 1, false);
  auto pw = collapse_relations(EdgeMask::constant(SubgraphView::full(g), 0.7), g, Collapse::kMax);
  const EntityId rho[] = {0, 4};
  auto pure = stochastic_adjacency(pw, rho, 1.0, 5);
  Matrix d = dense_transition(pure);
  for (Eigen::Index s = 0; s < 5; ++s) {
    CHECK(d(s, 0) == doctest::Approx(0.5));
    CHECK(d(s, 4) == doctest::Approx(0.5));
  }
  auto walk = stochastic_adjacency(pw, rho, 0.0, 5);
  d = dense_transition(walk);
  CHECK(d(0, 1) == 1.0);
  CHECK(d(3, 0) == 1.0);
  CHECK(d(4, 0) == doctest::Approx(0.5));  // dangling row teleports fully
  CHECK_THROWS_AS(stochastic_adjacency(pw, {}, 0.5, 5), ContractError);
  PairwiseWeights unsorted{{1, 0}, {2, 1}, {1.0, 1.0}};
  CHECK_THROWS_AS(stochastic_adjacency(unsorted, rho, 0.5, 5), ContractError);
}

TEST_CASE("every row sums to one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = make_rng(seed, {2});
    auto g = make_graph(random_triples(rng, 20, 3, 35), 20, 3);
    auto mask = random_mask(SubgraphView::full(g), rng);
    const EntityId rho[] = {static_cast<EntityId>(seed), 19};
    for (double alpha : {0.0, 0.15, 0.5, 1.0})
      for (auto method : {Collapse::kMax, Collapse::kSum, Collapse::kMean}) {
        auto adj = stochastic_adjacency(collapse_relations(mask, g, method), rho, alpha, 20);
        for (EntityId s = 0; s < 20; ++s) CHECK(std::abs(adj.row_sum(s) - 1.0) < 1e-9);
      }
  }
}

TEST_CASE("pure teleport converges in one step") {
  std::vector<Triple> t = {{0, 0, 1}, {1, 0, 2}};
  auto g = make_graph(t, 4, 1, false);
  auto pw = collapse_relations(EdgeMask::constant(SubgraphView::full(g), 1.0), g, Collapse::kMax);
  const EntityId rho[] = {1, 3};
  PPRConfig c;
  c.alpha = 1.0;
  auto pi = ppr(stochastic_adjacency(pw, rho, 1.0, 4), rho, c);
  CHECK(pi.converged);
  CHECK(pi.iterations == 1);
  CHECK(pi.pi[1] == doctest::Approx(0.5));
  CHECK(pi.pi[3] == doctest::Approx(0.5));
}

TEST_CASE("three-cycle matches the closed form") {
  std::vector<Triple> t = {{0, 0, 1}, {1, 0, 2}, {2, 0, 0}};
  auto g = make_graph(t, 3, 1, false);
  auto pw = collapse_relations(EdgeMask::constant(SubgraphView::full(g), 0.5), g, Collapse::kMax);
  const EntityId rho[] = {0};
  const double alpha = 0.15;
  auto pi = ppr(stochastic_adjacency(pw, rho, alpha, 3), rho, tight());
  Eigen::MatrixXd p(3, 3);
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  Eigen::RowVector3d s(1, 0, 0);
  Eigen::RowVector3d expect = alpha * s * (Eigen::Matrix3d::Identity() - (1 - alpha) * p).inverse();
  for (int i = 0; i < 3; ++i) CHECK(std::abs(pi.pi[i] - expect[i]) < 1e-8);
  CHECK(pi.converged);
}

TEST_CASE("power iteration matches a dense solve") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_rng(seed, {3});
    const std::size_t n = 2 + uniform_index(rng, 49);
    const std::size_t m = uniform_index(rng, 3 * n) + 1;
    auto g = make_graph(random_triples(rng, n, 2, std::min(m, n * (n - 1))), n, 2);
    auto mask = random_mask(SubgraphView::full(g), rng);
    std::vector<EntityId> rho = {static_cast<EntityId>(uniform_index(rng, n))};
    if (uniform01(rng) < 0.5) rho.push_back(static_cast<EntityId>(uniform_index(rng, n)));
    std::sort(rho.begin(), rho.end());
    rho.erase(std::unique(rho.begin(), rho.end()), rho.end());
    const double alpha = 0.05 + 0.9 * uniform01(rng);
    auto adj = stochastic_adjacency(collapse_relations(mask, g, Collapse::kMax), rho, alpha, n);
    auto pi = ppr(adj, rho, tight());
    auto expect = dense_stationary(dense_transition(adj));
    CHECK(pi.converged);
    CHECK((pi.pi - expect).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::abs(pi.pi.sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("components unreachable from the teleport set lose their mass") {
  std::vector<Triple> t = {{0, 0, 1}, {1, 0, 0}, {2, 0, 3}, {3, 0, 2}};
  auto g = make_graph(t, 4, 1, false);
  auto pw = collapse_relations(EdgeMask::constant(SubgraphView::full(g), 1.0), g, Collapse::kMax);
  const EntityId rho[] = {0};
  auto pi = ppr(stochastic_adjacency(pw, rho, 0.15, 4), rho, tight());
  CHECK(pi.pi[2] < 1e-12);
  CHECK(pi.pi[3] < 1e-12);
}

TEST_CASE("non-convergence is flagged, not thrown") {
  std::vector<Triple> t = {{0, 0, 1}, {1, 0, 0}};
  auto g = make_graph(t, 2, 1, false);
  auto pw = collapse_relations(EdgeMask::constant(SubgraphView::full(g), 1.0), g, Collapse::kMax);
  const EntityId rho[] = {0};
  PPRConfig c;
  c.max_iter = 3;
  c.epsilon = 1e-15;
  auto pi = ppr(stochastic_adjacency(pw, rho, 0.01, 2), rho, c);
  CHECK_FALSE(pi.converged);
  CHECK(pi.iterations == 3);
  CHECK(pi.pi.sum() == doctest::Approx(1.0));
}

TEST_CASE("more teleport puts more mass on the teleport set") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, {4});
    auto g = make_graph(random_triples(rng, 25, 2, 60), 25, 2);
    auto mask = random_mask(SubgraphView::full(g), rng);
    auto pw = collapse_relations(mask, g, Collapse::kMax);
    const EntityId rho[] = {static_cast<EntityId>(seed % 25)};
    double previous = -1.0;
    for (double alpha : {0.05, 0.15, 0.3, 0.5, 0.8}) {
      auto pi = ppr(stochastic_adjacency(pw, rho, alpha, 25), rho, tight());
      CHECK(pi.pi[rho[0]] > previous);
      previous = pi.pi[rho[0]];
    }
  }
}

TEST_CASE("edge partition matches set arithmetic") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, {5});
    auto g = make_graph(random_triples(rng, 15, 2, 30), 15, 2);
    auto view = drop_edges_uniform(g, 0.3, seed);
    NodeDistribution d;
    d.pi = Vector::Zero(15);
    for (Eigen::Index i = 0; i < 15; ++i) d.pi[i] = static_cast<double>(uniform_index(rng, 5));
    d.pi /= d.pi.sum() > 0 ? d.pi.sum() : 1.0;
    const int l = 1 + static_cast<int>(uniform_index(rng, 15));
    auto top = top_entities(d.pi, l);
    std::set<EntityId> top_set(top.begin(), top.end());
    CHECK(top_set.size() == static_cast<std::size_t>(l));
    for (EntityId v = 0; v < 15; ++v)
      if (!top_set.contains(v))
        for (EntityId u : top) CHECK((d.pi[u] > d.pi[v] || (d.pi[u] == d.pi[v] && u < v)));
    auto part = partition_edges(view, d, l);
    CHECK(part.inside.size() + part.outside.size() == view.size());
    for (EdgeId e : part.inside) CHECK((top_set.contains(g.edge(e).head) && top_set.contains(g.edge(e).tail)));
    for (EdgeId e : part.outside) CHECK_FALSE((top_set.contains(g.edge(e).head) && top_set.contains(g.edge(e).tail)));
    CHECK(partition_edges(view, d, 15).outside.empty());
  }
  Rng rng = make_rng(6);
  auto g = make_graph(random_triples(rng, 5, 1, 6), 5, 1);
  NodeDistribution d{Vector::Constant(5, 0.2), 1, true};
  CHECK(partition_edges(SubgraphView::full(g), d, 1).inside.empty());
  CHECK_THROWS_AS(partition_edges(SubgraphView::full(g), d, 0), ContractError);
}

TEST_CASE("ppr loss") {
  Rng rng = make_rng(7);
  auto g = make_graph(random_triples(rng, 10, 2, 12), 10, 2);
  auto view = SubgraphView::full(g);
  auto ones = EdgeMask::constant(view, 1.0);
  EdgePartition all_in{view.edge_ids(), {}};
  CHECK(ppr_loss(ones, all_in, 1.0, 1.0) == doctest::Approx(-static_cast<double>(view.size())));
  CHECK(ppr_loss(ones, all_in, 0.0, 0.0) == 0.0);

  auto mask = random_mask(view, rng);
  EdgePartition part;
  for (EdgeId e : view.edge_ids()) (uniform01(rng) < 0.4 ? part.inside : part.outside).push_back(e);
  double in = 0.0, out = 0.0;
  for (std::size_t i = 0; i < mask.edges.size(); ++i) {
    const bool inside = std::find(part.inside.begin(), part.inside.end(), mask.edges[i]) != part.inside.end();
    (inside ? in : out) += mask.values[i];
  }
  std::vector<double> grad;
  CHECK(ppr_loss(mask, part, 0.7, 1.3, &grad) == doctest::Approx(-0.7 * in + 1.3 * out).epsilon(1e-14));
  for (std::size_t i = 0; i < grad.size(); ++i) CHECK((grad[i] == -0.7 || grad[i] == 1.3));

  PPRConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(PPRConfig{}.top_nodes_for_budget(10) == 20);
}
