#include "kgxk/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kgxk/error.hpp"

namespace kgxk {

std::string_view to_string(Collapse c) {
  switch (c) {
    case Collapse::kMax: return "max";
    case Collapse::kSum: return "sum";
    case Collapse::kMean: return "mean";
  }
  return "max";
}

Collapse parse_collapse(std::string_view s) {
  if (s == "max") return Collapse::kMax;
  if (s == "sum") return Collapse::kSum;
  if (s == "mean") return Collapse::kMean;
  throw ConfigError("unknown relation collapse '" + std::string(s) + "'");
}

void PPRConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("ppr alpha must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("ppr epsilon must be > 0");
  if (max_iter < 1) throw ConfigError("ppr max_iter must be >= 1");
  if (top_nodes < 0) throw ConfigError("ppr top_nodes must be >= 0 (0 couples it to the budget)");
  if (top_tails < 0) throw ConfigError("ppr top_tails must be >= 0");
  if (beta_in < 0.0 || beta_out < 0.0) throw ConfigError("ppr loss weights must be >= 0");
}

PairwiseWeights collapse_relations(const EdgeMask& mask, const KnowledgeGraph& g, Collapse method) {
  if (mask.edges.size() != mask.values.size()) throw ContractError("mask values do not align with its edges");
  std::vector<std::size_t> order(mask.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto pair_of = [&](std::size_t i) {
    const auto& t = g.edge(mask.edges[i]);
    return std::pair{t.head, t.tail};
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pair_of(a) < pair_of(b); });

  PairwiseWeights pw;
  for (std::size_t i = 0; i < order.size();) {
    const auto key = pair_of(order[i]);
    double acc = method == Collapse::kMax ? -std::numeric_limits<double>::infinity() : 0.0;
    std::size_t count = 0;
    for (; i < order.size() && pair_of(order[i]) == key; ++i, ++count) {
      const double w = mask.values[order[i]];
      acc = method == Collapse::kMax ? std::max(acc, w) : acc + w;
    }
    if (method == Collapse::kMean) acc /= static_cast<double>(count);
    pw.source.push_back(key.first);
    pw.target.push_back(key.second);
    pw.weight.push_back(acc);
  }
  return pw;
}

std::vector<EntityId> teleport_set(const Vector& scores, EntityId head, int m) {
  if (m < 0) throw ContractError("top-tail count must be non-negative");
  std::vector<EntityId> ids(static_cast<std::size_t>(scores.size()));
  std::iota(ids.begin(), ids.end(), EntityId{0});
  const auto take = std::min(ids.size(), static_cast<std::size_t>(m));
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](EntityId a, EntityId b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
  ids.resize(take);
  ids.push_back(head);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<EntityId> teleport_set(const ModelHandle& eval_model, const SubgraphView& view, const Query& q, int m) {
  return teleport_set(forward(eval_model, view, q).scores, q.head, m);
}

double StochasticAdjacency::row_sum(EntityId s) const {
  double total = teleport[s];
  for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) total += probs[i];
  return total;
}

StochasticAdjacency stochastic_adjacency(const PairwiseWeights& pw, std::span<const EntityId> teleport_to,
                                         double alpha, std::size_t num_entities) {
  if (teleport_to.empty()) throw ContractError("teleport set must be non-empty");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("alpha must lie in [0, 1]");
  for (EntityId t : teleport_to)
    if (t >= num_entities) throw BoundsError("teleport entity out of range");

  StochasticAdjacency adj;
  adj.num_entities = num_entities;
  adj.alpha = alpha;
  adj.teleport_to.assign(teleport_to.begin(), teleport_to.end());
  adj.offsets.assign(num_entities + 1, 0);
  for (std::size_t i = 0; i < pw.size(); ++i) {
    const EntityId s = pw.source[i];
    if (s >= num_entities || pw.target[i] >= num_entities) throw BoundsError("pair endpoint out of range");
    if (i > 0 && s < pw.source[i - 1]) throw ContractError("pairwise weights must be sorted by source");
    ++adj.offsets[s + 1];
  }
  for (std::size_t v = 0; v < num_entities; ++v) adj.offsets[v + 1] += adj.offsets[v];
  adj.targets.resize(pw.size());
  adj.probs.resize(pw.size());
  adj.teleport.assign(num_entities, 1.0);

  // Pairs arrive sorted by source, so each source's pairs are contiguous.
  for (std::size_t v = 0; v < num_entities; ++v) {
    const std::size_t begin = adj.offsets[v], end = adj.offsets[v + 1];
    if (begin == end) continue;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < end; ++i) peak = std::max(peak, pw.weight[i]);
    double z = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      adj.targets[i] = pw.target[i];
      adj.probs[i] = std::exp(pw.weight[i] - peak);
      z += adj.probs[i];
    }
    for (std::size_t i = begin; i < end; ++i) adj.probs[i] *= (1.0 - alpha) / z;
    adj.teleport[v] = alpha;
  }
  return adj;
}

NodeDistribution ppr(const StochasticAdjacency& adj, std::span<const EntityId> seeds, const PPRConfig& cfg) {
  if (seeds.empty()) throw ContractError("ppr needs at least one seed");
  if (!(cfg.epsilon > 0.0)) throw ContractError("ppr epsilon must be > 0");
  const auto n = static_cast<Eigen::Index>(adj.num_entities);
  NodeDistribution out;
  out.pi = Vector::Zero(n);
  for (EntityId s : seeds) out.pi[s] += 1.0 / static_cast<double>(seeds.size());

  const double share = 1.0 / static_cast<double>(adj.teleport_to.size());
  Vector next(n);
  for (int it = 0; it < cfg.max_iter; ++it) {
    next.setZero();
    double teleported = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) {
      const double mass = out.pi[s];
      if (mass == 0.0) continue;
      teleported += mass * adj.teleport[static_cast<std::size_t>(s)];
      for (std::size_t i = adj.offsets[static_cast<std::size_t>(s)]; i < adj.offsets[static_cast<std::size_t>(s) + 1]; ++i)
        next[adj.targets[i]] += mass * adj.probs[i];
    }
    for (EntityId t : adj.teleport_to) next[t] += teleported * share;
    const double change = (next - out.pi).lpNorm<1>();
    out.pi.swap(next);
    out.iterations = it + 1;
    if (change < cfg.epsilon) {
      out.converged = true;
      break;
    }
  }
  const double total = out.pi.sum();
  if (total > 0.0) out.pi /= total;
  return out;
}

std::vector<EntityId> top_entities(const Vector& pi, int l) {
  std::vector<EntityId> ids(static_cast<std::size_t>(pi.size()));
  std::iota(ids.begin(), ids.end(), EntityId{0});
  const auto take = std::min(ids.size(), static_cast<std::size_t>(std::max(l, 0)));
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](EntityId a, EntityId b) { return pi[a] != pi[b] ? pi[a] > pi[b] : a < b; });
  ids.resize(take);
  return ids;
}

EdgePartition partition_edges(const SubgraphView& view, const NodeDistribution& dist, int l) {
  if (l < 1) throw ContractError("top-node count must be >= 1");
  const auto& g = view.graph();
  std::vector<bool> top(g.num_entities(), false);
  for (EntityId v : top_entities(dist.pi, l)) top[v] = true;
  EdgePartition part;
  for (EdgeId e : view.edge_ids()) {
    const auto& t = g.edge(e);
    (top[t.head] && top[t.tail] ? part.inside : part.outside).push_back(e);
  }
  return part;
}

double ppr_loss(const EdgeMask& mask, const EdgePartition& part, double beta_in, double beta_out,
                std::vector<double>* grad) {
  if (grad) grad->assign(mask.edges.size(), 0.0);
  auto position = [&](EdgeId e) {
    auto it = std::lower_bound(mask.edges.begin(), mask.edges.end(), e);
    if (it == mask.edges.end() || *it != e) throw ContractError("partition edge missing from the mask");
    return static_cast<std::size_t>(it - mask.edges.begin());
  };
  double in_sum = 0.0, out_sum = 0.0;
  for (EdgeId e : part.inside) {
    const auto i = position(e);
    in_sum += mask.values[i];
    if (grad) (*grad)[i] -= beta_in;
  }
  for (EdgeId e : part.outside) {
    const auto i = position(e);
    out_sum += mask.values[i];
    if (grad) (*grad)[i] += beta_out;
  }
  return -beta_in * in_sum + beta_out * out_sum;
}

}  // namespace kgxk
