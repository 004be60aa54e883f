#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "kgxk/error.hpp"
#include "kgxk/metrics.hpp"

using namespace kgxk;
using namespace testing;

namespace {

// Averages the positions of every candidate tied with the answer after a
// full descending sort.
double sort_oracle(const Vector& s, EntityId answer, const CandidateMask& cand) {
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (cand[static_cast<std::size_t>(i)]) vals.push_back(s[i]);
  std::sort(vals.begin(), vals.end(), std::greater<>());
  double first = 0, last = 0;
  bool seen = false;
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i] == s[answer]) {
      if (!seen) first = static_cast<double>(i + 1);
      seen = true;
      last = static_cast<double>(i + 1);
    }
  return 0.5 * (first + last);
}

}  // namespace

TEST_CASE("rank examples") {
  Vector s(5);
  s << 0.1, 0.9, 0.3, 0.2, 0.0;
  CandidateMask all(5, true);
  auto r = rank_metrics(s, {0, 0, 1}, all);
  CHECK(r.rank == 1.0);
  CHECK(r.reciprocal == 1.0);
  Vector tied = Vector::Constant(5, 0.4);
  CHECK(rank_metrics(tied, {0, 0, 2}, all).rank == 3.0);
  CHECK(rank_metrics(tied, {0, 0, 2}, all).reciprocal == doctest::Approx(1.0 / 3.0));
  CandidateMask without_answer = all;
  without_answer[2] = false;
  CHECK_THROWS_AS(rank_metrics(tied, {0, 0, 2}, without_answer), ContractError);
  CandidateMask filtered = all;
  filtered[1] = false;
  CHECK(rank_metrics(s, {0, 0, 2}, filtered).rank == 1.0);
}

TEST_CASE("rank equals an exhaustive sort on random ties") {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 1 + uniform_index(rng, 60);
    Vector s(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = static_cast<double>(uniform_index(rng, 6));
    CandidateMask cand(n);
    for (std::size_t i = 0; i < n; ++i) cand[i] = uniform01(rng) < 0.8;
    const auto answer = static_cast<EntityId>(uniform_index(rng, n));
    cand[answer] = true;
    CHECK(rank_metrics(s, {0, 0, answer}, cand).rank == sort_oracle(s, answer, cand));
  }
}

TEST_CASE("aggregate metrics") {
  const double ranks[] = {1.0, 4.0};
  auto m = RankingMetrics::from_ranks(ranks);
  CHECK(m.mrr == doctest::Approx(0.625));
  CHECK(m.hits_at.at(1) == 0.5);
  CHECK(m.hits_at.at(3) == 0.5);
  CHECK(m.hits_at.at(10) == 1.0);
  CHECK(m.n_queries == 2);
  const double one[] = {1.0};
  CHECK(RankingMetrics::from_ranks(one).mrr == 1.0);
  CHECK_THROWS_AS(RankingMetrics::from_ranks({}), ContractError);

  Rng rng = make_rng(3);
  std::vector<double> many;
  for (int i = 0; i < 200; ++i) many.push_back(1.0 + static_cast<double>(uniform_index(rng, 30)) * 0.5);
  auto big = RankingMetrics::from_ranks(many);
  double expect = 0.0;
  for (double r : many) expect += 1.0 / r;
  CHECK(std::abs(big.mrr - expect / 200.0) < 1e-12);
  CHECK(big.hits_at.at(1) <= big.hits_at.at(3));
  CHECK(big.hits_at.at(3) <= big.hits_at.at(10));
  CHECK(big.mrr <= 1.0);
  CHECK(big.mrr >= big.hits_at.at(1));
}

TEST_CASE("evaluate_model agrees across view forms") {
  Rng rng = make_rng(4);
  auto triples = random_triples(rng, 20, 2, 40);
  auto g = make_graph(triples, 20, 2);
  auto m = small_model(g, 3);
  KnownTriples known(2);
  known.add(triples);
  auto queries = make_queries(std::span(triples).first(10), 2);
  auto full = SubgraphView::full(g);
  std::vector<SubgraphView> views(queries.size(), full);
  auto a = evaluate_model(m, full, queries, known);
  auto b = evaluate_model(m, views, queries, known);
  auto c = evaluate_model(m, [&](std::size_t, const Query&) { return full; }, queries, known);
  CHECK(a.mrr == b.mrr);
  CHECK(a.mrr == c.mrr);

  double total = 0.0;
  for (const auto& q : queries) {
    auto s = forward(m, full, q).scores;
    total += 1.0 / sort_oracle(s, q.answer, filtered_candidates(q, known, 20));
  }
  CHECK(std::abs(a.mrr - total / static_cast<double>(queries.size())) < 1e-12);
  CHECK_THROWS_AS(evaluate_model(m, full, {}, known), ContractError);
}
