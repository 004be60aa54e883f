#include "kgxk/robust_evaluator.hpp"

#include "kgxk/rng.hpp"
#include "kgxk/training.hpp"

namespace kgxk {

SubgraphView perturbed_view(const KnowledgeGraph& g, const DropSchedule& schedule, const Query& q,
                            std::size_t index, int epoch, std::uint64_t seed) {
  const auto view_epoch = schedule.resample_per_epoch ? static_cast<std::uint64_t>(epoch) : 0;
  const auto view_seed = derive_seed(seed, {0xd20b, view_epoch, index});
  auto base = without_query_edge(SubgraphView::full(g), q);
  if (schedule.kind == DropSchedule::Kind::kUniform) return drop_edges_uniform(base, schedule.p, view_seed);
  return drop_edges_distance(base, q.head, schedule, view_seed);
}

ModelHandle train_evaluator(const BackboneConfig& config, const KnowledgeGraph& g, const DropSchedule& schedule,
                            std::span<const Query> queries, const TrainConfig& train, std::uint64_t seed) {
  schedule.validate();
  ModelHandle model = init_model(config, g, seed);
  model.role = schedule.kind == DropSchedule::Kind::kUniform ? ModelRole::kEvaluatorUniform
                                                              : ModelRole::kEvaluatorDistance;
  return train_on_views(
      std::move(model), queries,
      [&](std::size_t i, int epoch) { return perturbed_view(g, schedule, queries[i], i, epoch, train.seed); },
      train);
}

}  // namespace kgxk
