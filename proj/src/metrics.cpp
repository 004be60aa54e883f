#include "kgxk/metrics.hpp"

#include "kgxk/error.hpp"

namespace kgxk {

Rank rank_metrics(const Vector& scores, const Query& q, const CandidateMask& candidates) {
  if (q.answer >= static_cast<EntityId>(scores.size()) || q.answer >= candidates.size())
    throw ContractError("query answer outside the score vector");
  if (!candidates[q.answer]) throw ContractError("candidate mask excludes the answer");
  const double target = scores[q.answer];
  std::size_t greater = 0, equal = 0;
  for (Eigen::Index v = 0; v < scores.size(); ++v) {
    if (!candidates[static_cast<std::size_t>(v)] || static_cast<EntityId>(v) == q.answer) continue;
    if (scores[v] > target) {
      ++greater;
    } else if (scores[v] == target) {
      ++equal;
    }
  }
  Rank r;
  r.rank = 1.0 + static_cast<double>(greater) + 0.5 * static_cast<double>(equal);
  r.reciprocal = 1.0 / r.rank;
  return r;
}

RankingMetrics RankingMetrics::from_ranks(std::span<const double> ranks) {
  if (ranks.empty()) throw ContractError("cannot compute metrics over zero queries");
  RankingMetrics m;
  m.n_queries = ranks.size();
  for (int k : {1, 3, 10}) m.hits_at[k] = 0.0;
  for (double r : ranks) {
    m.mrr += 1.0 / r;
    for (auto& [k, h] : m.hits_at)
      if (r <= k) h += 1.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  for (auto& [k, h] : m.hits_at) h /= n;
  return m;
}

RankingMetrics evaluate_model(const ModelHandle& model, const QueryViewFn& view_for, std::span<const Query> queries,
                              const KnownTriples& known) {
  if (queries.empty()) throw ContractError("evaluation needs at least one query");
  std::vector<double> ranks;
  ranks.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Query& q = queries[i];
    SubgraphView view = view_for(i, q);
    auto scores = forward(model, view, q);
    auto candidates = filtered_candidates(q, known, view.graph().num_entities());
    ranks.push_back(rank_metrics(scores.scores, q, candidates).rank);
  }
  return RankingMetrics::from_ranks(ranks);
}

RankingMetrics evaluate_model(const ModelHandle& model, const SubgraphView& view, std::span<const Query> queries,
                              const KnownTriples& known) {
  return evaluate_model(model, [&](std::size_t, const Query&) { return view; }, queries, known);
}

RankingMetrics evaluate_model(const ModelHandle& model, std::span<const SubgraphView> views,
                              std::span<const Query> queries, const KnownTriples& known) {
  if (views.size() != queries.size()) throw ContractError("need exactly one view per query");
  return evaluate_model(model, [&](std::size_t i, const Query&) { return views[i]; }, queries, known);
}

}  // namespace kgxk
