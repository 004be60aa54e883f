#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "kgxk/error.hpp"
#include "kgxk/protocol.hpp"
#include "kgxk/robust_evaluator.hpp"
#include "kgxk/synthetic.hpp"

using namespace kgxk;
using namespace testing;

namespace {

struct Setup {
  PlantedKg kg;
  KnowledgeGraph g;
  ModelHandle backbone;
  std::vector<Query> valid, test;
};

Setup make_setup(std::uint64_t seed) {
  PlantedKgConfig pc;
  pc.num_entities = 50;
  pc.num_rules = 1;
  pc.facts_per_rule = 20;
  pc.noise_edges = 40;
  pc.distractors_per_rule = 5;
  pc.seed = seed;
  auto kg = make_planted_kg(pc);
  auto g = KnowledgeGraph::build(kg.dataset.train, kg.dataset.vocab);
  auto train = make_queries(kg.dataset.train, g.num_base_relations());
  TrainConfig tc;
  tc.epochs = 10;
  tc.learning_rate = 1e-2;
  auto backbone = train_backbone(small_model(g, seed, Aggregation::kSum, MessageKind::kMultiplicative, 8, 2), g,
                                 train, tc);
  auto valid = make_queries(kg.dataset.valid, g.num_base_relations());
  auto test = make_queries(kg.dataset.test, g.num_base_relations());
  return {std::move(kg), std::move(g), std::move(backbone), std::move(valid), std::move(test)};
}

class Greedy : public Explainer {
 public:
  std::string name() const override { return "greedy"; }
  Explanation explain(const SubgraphView& view, const Query& q, int budget) const override {
    Explanation e;
    e.query = q;
    e.budget = budget;
    e.edges = view.edge_ids();
    e.edges.resize(std::min<std::size_t>(e.edges.size(), static_cast<std::size_t>(budget) + 1));
    return e;
  }
};

}  // namespace

TEST_CASE("protocol reference arms bracket a real explainer") {
  auto s = make_setup(1);
  const auto before = s.backbone.checksum();
  FullGraphExplainer full;
  EmptyExplainer empty;
  auto eval = s.backbone;
  eval.role = ModelRole::kEvaluatorDistance;
  InstanceMaskConfig ic;
  ic.steps = 3;
  InstanceMaskExplainer inst(eval, ic);
  const Explainer* arms[] = {&full, &empty, &inst};
  const int budgets[] = {2, 6};
  ProtocolConfig pc;
  pc.fine_tune.epochs = 2;
  auto known = s.kg.dataset.known();
  auto rep = run_protocol(s.backbone, arms, s.g, known, s.valid, s.test, budgets, pc);
  CHECK(s.backbone.checksum() == before);
  CHECK(rep.budgets == std::vector<int>{2, 6});
  REQUIRE(rep.rows.size() == 4);
  const auto* f = rep.find("full", 0);
  const auto* e = rep.find("empty", 0);
  REQUIRE(f);
  REQUIRE(e);
  CHECK(rep.find("instance_mask", 2));
  CHECK(rep.find("instance_mask", 6));
  CHECK(e->metrics.mrr <= f->metrics.mrr);
  for (int k : budgets) {
    CHECK(e->metrics.mrr <= rep.find("instance_mask", k)->metrics.mrr + 1e-12);
  }
  CHECK(rep.find("instance_mask", 2)->components >= 1.0);

  auto csv = rep.to_csv();
  CHECK(csv.rfind("explainer,budget,mrr,hits1,hits3,hits10,seconds,components\n", 0) == 0);
  CHECK(csv.find("full,inf,") != std::string::npos);
  CHECK(rep.to_csv(false).find("seconds") == std::string::npos);
}

TEST_CASE("protocol aborts on over-budget explanations") {
  auto s = make_setup(2);
  Greedy greedy;
  const Explainer* arms[] = {&greedy};
  const int budgets[] = {3};
  ProtocolConfig pc;
  pc.fine_tune.epochs = 1;
  try {
    run_protocol(s.backbone, arms, s.g, s.kg.dataset.known(), s.valid, s.test, budgets, pc);
    FAIL("expected an abort");
  } catch (const ContractError& err) {
    CHECK(std::string(err.what()).find("greedy") != std::string::npos);
  }
  const int bad[] = {0};
  CHECK_THROWS_AS(run_protocol(s.backbone, arms, s.g, s.kg.dataset.known(), s.valid, s.test, bad, pc), ConfigError);
}

TEST_CASE("sweeps reproduce the unperturbed metrics at their limits") {
  auto s = make_setup(3);
  auto known = s.kg.dataset.known();
  const NamedModel models[] = {{"backbone", &s.backbone}};
  const double probs[] = {0.0, 0.5, 1.0};
  auto drop = edge_drop_sweep(models, s.g, known, s.test, probs, 7);
  auto full = SubgraphView::full(s.g);
  const double reference =
      evaluate_model(s.backbone, [&](std::size_t, const Query& q) { return without_query_edge(full, q); }, s.test,
                     known)
          .mrr;
  CHECK(drop.mrr("backbone", 0.0) == doctest::Approx(reference).epsilon(1e-12));
  CHECK(drop.mrr("backbone", 1.0) <= drop.mrr("backbone", 0.0));
  CHECK(drop.to_csv().rfind("model,x,mrr\n", 0) == 0);
  CHECK(drop.rows.size() == 3);
  CHECK(edge_drop_sweep(models, s.g, known, s.test, probs, 7).to_csv() == drop.to_csv());

  const int radii[] = {0, 1, 100};
  auto ego = ego_radius_sweep(models, s.g, known, s.test, radii);
  const double component =
      evaluate_model(s.backbone,
                     [&](std::size_t, const Query& q) {
                       const EntityId head[] = {q.head};
                       return ego_network(without_query_edge(full, q), head, static_cast<int>(s.g.num_entities()));
                     },
                     s.test, known)
          .mrr;
  CHECK(ego.mrr("backbone", 100) == doctest::Approx(component).epsilon(1e-12));
  CHECK_THROWS_AS(ego.mrr("nobody", 1), ContractError);
}

TEST_CASE("spearman correlation") {
  const double x[] = {1, 2, 3, 4};
  const double up[] = {10, 20, 30, 40};
  const double down[] = {4, 3, 2, 1};
  const double tied[] = {1, 1, 2, 2};
  CHECK(spearman(x, up) == doctest::Approx(1.0));
  CHECK(spearman(x, down) == doctest::Approx(-1.0));
  CHECK(spearman(x, tied) == doctest::Approx(0.894427191).epsilon(1e-8));
  const double flat[] = {5, 5, 5, 5};
  CHECK(spearman(x, flat) == 0.0);
  CHECK_THROWS_AS(spearman(std::span(x, 2), std::span(up, 3)), ContractError);
}
