#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kgxk/kg.hpp"
#include "kgxk/model.hpp"

namespace kgxk {

// Message-passing view for training query `index` at `epoch`.
using ViewProvider = std::function<SubgraphView(std::size_t index, int epoch)>;

// Removes the query's own fact (and its inverse) so training never sees the
// label as an edge.
SubgraphView without_query_edge(const SubgraphView& view, const Query& q);

// Binary cross-entropy against uniformly corrupted tails; Adam updates over
// mini-batches. Returns the updated copy with its per-epoch mean loss
// appended to `loss_history`.
ModelHandle train_on_views(ModelHandle model, std::span<const Query> queries, const ViewProvider& views,
                           const TrainConfig& train);

ModelHandle train_backbone(ModelHandle model, const KnowledgeGraph& g, std::span<const Query> queries,
                           const TrainConfig& train);

struct FineTuneExample {
  Query query;
  SubgraphView view;
};

// Continues training from `model` using only the supplied (query, view)
// pairs. `model` itself is left untouched.
ModelHandle fine_tune(const ModelHandle& model, std::span<const FineTuneExample> dataset, const TrainConfig& train);

// Loss of a single query against explicit negatives. `grad`, when given, must
// be sized like `scores` and is accumulated into.
double bce_loss(const Vector& scores, EntityId answer, std::span<const EntityId> negatives, Vector* grad);

}  // namespace kgxk
