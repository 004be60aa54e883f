#pragma once

#include <cstdint>
#include <span>

#include "kgxk/kg.hpp"
#include "kgxk/model.hpp"

namespace kgxk {

// Trains a model whose per-query message-passing views are perturbed by
// `schedule`: uniform edge drop, or distance-decay drop anchored at the query
// head. Initialization uses `seed`, the training loop `train.seed`, so a
// zero-probability schedule reproduces `train_backbone` exactly.
ModelHandle train_evaluator(const BackboneConfig& config, const KnowledgeGraph& g, const DropSchedule& schedule,
                            std::span<const Query> queries, const TrainConfig& train, std::uint64_t seed);

// The view an evaluator sees for a training query at a given epoch.
SubgraphView perturbed_view(const KnowledgeGraph& g, const DropSchedule& schedule, const Query& q,
                            std::size_t index, int epoch, std::uint64_t seed);

}  // namespace kgxk
