#pragma once

#include <cstdint>
#include <span>

#include "kgxk/explainer.hpp"

namespace kgxk {

struct InstanceMaskConfig {
  int steps = 30;
  double learning_rate = 0.05;
  double lambda_size = 0.05;
  double lambda_ent = 0.01;
  double init_scale = 0.1;  // stddev of the initial logits
  std::uint64_t seed = 0;

  void validate() const;
};

// Free logits per kept edge, optimized for this query alone with the masked
// cross-entropy plus size/entropy regularizers. Selects the top-k edges by
// mask value without any connectivity repair.
Explanation instance_mask_explain(const ModelHandle& eval_model, const SubgraphView& view, const Query& q,
                                  int budget, const InstanceMaskConfig& config);

// Trains a mask network with the PPR term switched off.
MaskNet train_parameterized_baseline(MaskNet net, const ModelHandle& eval_model, const KnowledgeGraph& g,
                                     std::span<const Query> train_queries, PPRConfig cfg,
                                     const ExplainerTrainConfig& train);

// Noise-free mask from `net`, then the top-k edges by mask value.
Explanation parameterized_mask_explain(const MaskNet& net, const ModelHandle& eval_model, const SubgraphView& view,
                                       const Query& q, int budget);

}  // namespace kgxk
