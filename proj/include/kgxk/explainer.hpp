#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgxk/kg.hpp"
#include "kgxk/model.hpp"
#include "kgxk/ppr.hpp"
#include "kgxk/rng.hpp"

namespace kgxk {

struct MaskNetConfig {
  int embed_dim = 16;
  std::vector<int> hidden = {32};
  double temperature_start = 1.0;
  double temperature_end = 0.1;

  void validate() const;
  int input_dim() const { return 5 * embed_dim; }
};

// MLP from [z_s; z_p; z_o; z_h; z_r] to one edge logit. ReLU between layers.
struct MaskNet {
  MaskNetConfig config;
  std::vector<Matrix> weights;  // layer k: out x in
  std::vector<Matrix> biases;   // layer k: 1 x out
  std::vector<double> loss_history;

  static MaskNet init(const MaskNetConfig& config, std::uint64_t seed);
  MaskNet zeros_like() const;
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;
  std::uint64_t checksum() const;
};

// Edge logits for `edges` with the intermediates `mask_backward` needs.
struct MaskTrace {
  std::vector<EdgeId> edges;
  Matrix input;              // E x 5d
  std::vector<Matrix> pre;   // per layer pre-activations, E x out
  Vector logits;
};

MaskTrace mask_logits(const MaskNet& net, const EmbeddingTable& emb, const KnowledgeGraph& g,
                      std::span<const EdgeId> edges);
// Accumulates d(loss)/d(parameters) into `grad`.
void mask_backward(const MaskNet& net, const MaskTrace& trace, const Vector& logit_grad, MaskNet& grad);

// Mask values are kept strictly inside (0, 1).
inline constexpr double kMaskFloor = 1e-12;

// Binary-concrete relaxation: omega = sigmoid((logit + noise) / temperature)
// with logistic noise from `rng` unless `hard`, in which case the noise is
// omitted.
EdgeMask edge_scores(const MaskNet& net, const EmbeddingTable& emb, const SubgraphView& view, const Query& q,
                     double temperature, Rng* rng, bool hard);
EdgeMask relax_logits(std::span<const EdgeId> edges, const Vector& logits, double temperature, Rng* rng,
                      Vector* noise = nullptr);

// lambda_size * mean(omega) + lambda_ent * mean(binary entropy of omega), the
// entropy evaluated on omega clamped to [1e-7, 1 - 1e-7].
double regularizers(const EdgeMask& mask, double lambda_size, double lambda_ent, std::vector<double>* grad = nullptr);

struct ExplainerTrainConfig {
  int epochs = 30;
  double learning_rate = 3e-3;
  int batch_size = 8;
  double lambda_size = 0.05;
  double lambda_ent = 0.01;
  int train_budget = 10;     // couples the PPR top-node count when top_nodes is 0
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-query explainer objective: cross-entropy of the true answer under the
// masked forward pass, plus the PPR reward/penalty and regularizers.
struct ExplainerLoss {
  double fidelity = 0.0;
  double ppr = 0.0;
  double regularization = 0.0;
  double total() const { return fidelity + ppr + regularization; }
};

// Evaluates the objective for one query at a fixed mask and returns
// d(total)/d(omega) aligned with mask.edges. PPR iterates are constants.
ExplainerLoss explainer_objective(const ModelHandle& eval_model, const SubgraphView& view, const Query& q,
                                  const EdgeMask& mask, std::span<const EntityId> teleport, const PPRConfig& cfg,
                                  int top_nodes, double lambda_size, double lambda_ent,
                                  std::vector<double>* omega_grad);

// Throws std::logic_error when `model` no longer has `expected` as checksum.
void check_frozen(const ModelHandle& model, std::uint64_t expected);

// Trains only the mask network; `eval_model` is read-only and its checksum is
// audited before returning.
MaskNet train_explainer(MaskNet net, const ModelHandle& eval_model, const KnowledgeGraph& g,
                        std::span<const Query> train_queries, const PPRConfig& cfg,
                        const ExplainerTrainConfig& train);

struct Explanation {
  Query query;
  int budget = 0;
  std::vector<EdgeId> edges;    // in selection order
  std::vector<double> omega;    // mask value of each selected edge
  Vector pi;                    // PPR distribution, empty when not computed
  bool converged = true;
  bool head_isolated = false;   // head had no kept incident edge
  int components = 0;

  SubgraphView view(const KnowledgeGraph& g) const { return SubgraphView::from_edges(g, edges); }
};

// Number of connected components spanned by the edges (undirected).
int count_components(const KnowledgeGraph& g, std::span<const EdgeId> edges);

// Noise-free mask -> collapse -> stochastic adjacency -> PPR, then greedy
// connected growth from the head over edges ranked inside-first.
Explanation extract_explanation(const MaskNet& net, const ModelHandle& eval_model, const SubgraphView& view,
                                const Query& q, int budget, const PPRConfig& cfg);

}  // namespace kgxk
