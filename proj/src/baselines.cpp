#include "kgxk/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "kgxk/error.hpp"
#include "kgxk/optim.hpp"

namespace kgxk {

namespace {

Explanation top_k(const KnowledgeGraph& g, const Query& q, int budget, const EdgeMask& mask, const Vector& logits) {
  Explanation out;
  out.query = q;
  out.budget = budget;
  std::vector<std::size_t> order(mask.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (mask.values[a] != mask.values[b]) return mask.values[a] > mask.values[b];
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (logits[ia] != logits[ib]) return logits[ia] > logits[ib];
    return mask.edges[a] < mask.edges[b];
  });
  order.resize(std::min(order.size(), static_cast<std::size_t>(budget)));
  for (std::size_t i : order) {
    out.edges.push_back(mask.edges[i]);
    out.omega.push_back(mask.values[i]);
  }
  bool head_touched = false;
  for (EdgeId e : g.out_edges(q.head)) head_touched = head_touched || std::binary_search(mask.edges.begin(), mask.edges.end(), e);
  for (EdgeId e : g.in_edges(q.head)) head_touched = head_touched || std::binary_search(mask.edges.begin(), mask.edges.end(), e);
  out.head_isolated = !head_touched;
  out.components = count_components(g, out.edges);
  return out;
}

}  // namespace

void InstanceMaskConfig::validate() const {
  if (steps < 0) throw ConfigError("instance mask steps must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("instance mask learning_rate must be > 0");
  if (lambda_size < 0.0 || lambda_ent < 0.0) throw ConfigError("regularizer weights must be >= 0");
  if (init_scale < 0.0) throw ConfigError("instance mask init_scale must be >= 0");
}

Explanation instance_mask_explain(const ModelHandle& eval_model, const SubgraphView& view, const Query& q,
                                  int budget, const InstanceMaskConfig& config) {
  config.validate();
  if (budget < 1) throw ContractError("budget must be >= 1");
  const auto& g = view.graph();
  const auto edges = view.edge_ids();
  const auto n = static_cast<Eigen::Index>(edges.size());

  Rng rng = make_rng(config.seed, {0x1a57, q.head, q.relation});
  Matrix logits(1, n);
  for (Eigen::Index i = 0; i < n; ++i) logits(0, i) = config.init_scale * normal(rng);

  PPRConfig no_ppr;
  no_ppr.beta_in = no_ppr.beta_out = 0.0;
  Adam adam(config.learning_rate);
  Matrix grad(1, n);
  for (int step = 0; step < config.steps && n > 0; ++step) {
    const auto mask = relax_logits(edges, logits.row(0).transpose(), 1.0, nullptr);
    std::vector<double> omega_grad;
    explainer_objective(eval_model, view, q, mask, {}, no_ppr, 1, config.lambda_size, config.lambda_ent, &omega_grad);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = mask.values[static_cast<std::size_t>(i)];
      grad(0, i) = omega_grad[static_cast<std::size_t>(i)] * w * (1.0 - w);
    }
    adam.step({&logits}, {&grad});
  }
  const Vector final_logits = logits.row(0).transpose();
  return top_k(g, q, budget, relax_logits(edges, final_logits, 1.0, nullptr), final_logits);
}

MaskNet train_parameterized_baseline(MaskNet net, const ModelHandle& eval_model, const KnowledgeGraph& g,
                                     std::span<const Query> train_queries, PPRConfig cfg,
                                     const ExplainerTrainConfig& train) {
  cfg.beta_in = cfg.beta_out = 0.0;
  return train_explainer(std::move(net), eval_model, g, train_queries, cfg, train);
}

Explanation parameterized_mask_explain(const MaskNet& net, const ModelHandle& eval_model, const SubgraphView& view,
                                       const Query& q, int budget) {
  if (budget < 1) throw ContractError("budget must be >= 1");
  const auto& g = view.graph();
  const auto edges = view.edge_ids();
  const auto emb = embed(eval_model, view, q);
  const auto logits = mask_logits(net, emb, g, edges).logits;
  return top_k(g, q, budget, relax_logits(edges, logits, net.config.temperature_end, nullptr), logits);
}

}  // namespace kgxk
