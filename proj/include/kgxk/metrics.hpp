#pragma once

#include <functional>
#include <map>
#include <span>
#include <vector>

#include "kgxk/kg.hpp"
#include "kgxk/model.hpp"

namespace kgxk {

struct Rank {
  double rank = 1.0;
  double reciprocal = 1.0;
};

// Filtered rank of the answer with mean-rank tie handling:
// 1 + #(strictly greater) + #(equal, excluding the answer) / 2.
Rank rank_metrics(const Vector& scores, const Query& q, const CandidateMask& candidates);

struct RankingMetrics {
  double mrr = 0.0;
  std::map<int, double> hits_at;  // K -> fraction with rank <= K, K in {1, 3, 10}
  std::size_t n_queries = 0;

  static RankingMetrics from_ranks(std::span<const double> ranks);
};

// Evaluates on one shared view, or on a per-query view when `views` is
// supplied (one per query).
RankingMetrics evaluate_model(const ModelHandle& model, const SubgraphView& view, std::span<const Query> queries,
                              const KnownTriples& known);
RankingMetrics evaluate_model(const ModelHandle& model, std::span<const SubgraphView> views,
                              std::span<const Query> queries, const KnownTriples& known);

// Per-query view factory used by the sweeps.
using QueryViewFn = std::function<SubgraphView(std::size_t index, const Query& q)>;
RankingMetrics evaluate_model(const ModelHandle& model, const QueryViewFn& view_for, std::span<const Query> queries,
                              const KnownTriples& known);

}  // namespace kgxk
