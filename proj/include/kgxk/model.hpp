#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kgxk/kg.hpp"

namespace kgxk {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Aggregation { kSum, kMean };
enum class MessageKind { kMultiplicative, kAdditive };
enum class ModelRole { kBackbone, kEvaluatorUniform, kEvaluatorDistance };

std::string_view to_string(Aggregation a);
std::string_view to_string(MessageKind m);
std::string_view to_string(ModelRole r);
Aggregation parse_aggregation(std::string_view s);
MessageKind parse_message(std::string_view s);
ModelRole parse_role(std::string_view s);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 5e-3;
  int negatives = 32;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

struct BackboneConfig {
  int embed_dim = 16;
  int num_layers = 3;
  Aggregation aggregation = Aggregation::kSum;
  MessageKind message = MessageKind::kMultiplicative;
  TrainConfig train;

  void validate() const;
};

// Learned tensors of the relational message-passing model. Entity-free, so a
// model transfers to any graph with the same relation count.
struct BackboneParams {
  Matrix query;                     // |R| x d, head indicator per query relation
  std::vector<Matrix> relation;     // per layer, |R| x d message relation vectors
  std::vector<Matrix> self_weight;  // per layer, d x d
  std::vector<Matrix> agg_weight;   // per layer, d x d
  std::vector<Matrix> bias;         // per layer, 1 x d
  Matrix decoder;                   // 1 x d
  Matrix decoder_bias;              // 1 x 1

  BackboneParams zeros_like() const;
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;
};

struct ModelHandle {
  BackboneConfig config;
  ModelRole role = ModelRole::kBackbone;
  std::size_t num_relations = 0;
  BackboneParams params;
  std::vector<double> loss_history;

  // FNV-1a over the raw parameter bytes.
  std::uint64_t checksum() const;
};

ModelHandle init_model(const BackboneConfig& config, const KnowledgeGraph& g, std::uint64_t seed);

// Soft importance per kept edge of a view, aligned with `edges` (ascending).
struct EdgeMask {
  std::vector<EdgeId> edges;
  std::vector<double> values;

  static EdgeMask constant(const SubgraphView& view, double value);
  double mean() const;
};

struct ScoreVector {
  Vector scores;
  Query query;
};

struct EmbeddingTable {
  Matrix entities;   // |V| x d, final-layer states conditioned on `query`
  Matrix relations;  // |R| x d
  Query query;
};

// Scores every entity as the tail of (q.head, q.relation). With a mask, each
// message is scaled by its edge's value and mean aggregation normalizes by the
// summed mask values.
ScoreVector forward(const ModelHandle& model, const SubgraphView& view, const Query& q,
                    const EdgeMask* mask = nullptr);
EmbeddingTable embed(const ModelHandle& model, const SubgraphView& view, const Query& q);

// Cached intermediate state of one forward pass, consumed by `backward`.
struct ForwardTrace {
  Query query;
  std::vector<EdgeId> edges;
  std::vector<double> weights;
  std::vector<Matrix> states;      // L+1 entries, |V| x d
  std::vector<Matrix> aggregates;  // L entries
  std::vector<Matrix> activations; // L entries, tanh of the pre-activation
  std::vector<Vector> norms;       // L entries, summed weights per target (mean only)
  Vector scores;
};

// `weights` empty means every edge carries weight 1.
ForwardTrace trace_forward(const ModelHandle& model, const KnowledgeGraph& g, std::span<const EdgeId> edges,
                           std::span<const double> weights, const Query& q);

// Back-propagates d(loss)/d(scores). Either output may be null.
void backward(const ModelHandle& model, const KnowledgeGraph& g, const ForwardTrace& trace,
              const Vector& score_grad, BackboneParams* param_grad, std::vector<double>* weight_grad);

}  // namespace kgxk
