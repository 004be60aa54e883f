#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "kgxk/kg.hpp"
#include "kgxk/model.hpp"

namespace kgxk {

enum class Collapse { kMax, kSum, kMean };
std::string_view to_string(Collapse c);
Collapse parse_collapse(std::string_view s);

struct PPRConfig {
  double alpha = 0.15;     // teleport weight
  double epsilon = 1e-6;   // L1 convergence tolerance
  int max_iter = 100;
  int top_nodes = 0;       // l; 0 couples it to the budget as 2k
  int top_tails = 1;       // m
  Collapse collapse = Collapse::kMax;
  double beta_in = 1.0;
  double beta_out = 1.0;

  void validate() const;
  int top_nodes_for_budget(int budget) const { return top_nodes > 0 ? top_nodes : 2 * budget; }
};

// One weight per ordered entity pair joined by at least one masked edge,
// sorted by (source, target).
struct PairwiseWeights {
  std::vector<EntityId> source;
  std::vector<EntityId> target;
  std::vector<double> weight;

  std::size_t size() const noexcept { return weight.size(); }
};

PairwiseWeights collapse_relations(const EdgeMask& mask, const KnowledgeGraph& g, Collapse method);

// The query head plus the `m` best-scoring tails (ties by ascending id),
// returned in ascending id order.
std::vector<EntityId> teleport_set(const Vector& scores, EntityId head, int m);
std::vector<EntityId> teleport_set(const ModelHandle& eval_model, const SubgraphView& view, const Query& q, int m);

// Row-stochastic transition operator: from source s, (1 - alpha) of the mass
// follows a softmax over s's existing out-pairs and alpha teleports uniformly
// to the teleport set. Sources without out-pairs teleport all of their mass.
struct StochasticAdjacency {
  std::size_t num_entities = 0;
  double alpha = 0.0;
  std::vector<std::size_t> offsets;  // CSR by source
  std::vector<EntityId> targets;
  std::vector<double> probs;         // structural mass, already scaled by (1 - alpha)
  std::vector<double> teleport;      // per-source mass spread over `teleport_to`
  std::vector<EntityId> teleport_to;

  double row_sum(EntityId s) const;
};

StochasticAdjacency stochastic_adjacency(const PairwiseWeights& pw, std::span<const EntityId> teleport_to,
                                         double alpha, std::size_t num_entities);

struct NodeDistribution {
  Vector pi;
  int iterations = 0;
  bool converged = false;
};

// Power iteration from the uniform distribution over `seeds`, mass flowing
// source -> target, until the L1 change drops below cfg.epsilon.
NodeDistribution ppr(const StochasticAdjacency& adj, std::span<const EntityId> seeds, const PPRConfig& cfg);

// Top-l entities by probability, ties by ascending id.
std::vector<EntityId> top_entities(const Vector& pi, int l);

struct EdgePartition {
  std::vector<EdgeId> inside;   // both endpoints among the top-l entities
  std::vector<EdgeId> outside;
};
EdgePartition partition_edges(const SubgraphView& view, const NodeDistribution& dist, int l);

// -beta_in * sum(inside) + beta_out * sum(outside). `grad`, when given, is
// aligned with mask.edges and receives d(loss)/d(omega).
double ppr_loss(const EdgeMask& mask, const EdgePartition& part, double beta_in, double beta_out,
                std::vector<double>* grad = nullptr);

}  // namespace kgxk
