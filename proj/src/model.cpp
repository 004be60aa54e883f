#include "kgxk/model.hpp"

#include <cmath>
#include <cstring>

#include "kgxk/error.hpp"
#include "kgxk/rng.hpp"

namespace kgxk {

std::string_view to_string(Aggregation a) { return a == Aggregation::kSum ? "sum" : "mean"; }

std::string_view to_string(MessageKind m) {
  return m == MessageKind::kMultiplicative ? "multiplicative" : "additive";
}

std::string_view to_string(ModelRole r) {
  switch (r) {
    case ModelRole::kBackbone: return "backbone";
    case ModelRole::kEvaluatorUniform: return "evaluator_uniform";
    case ModelRole::kEvaluatorDistance: return "evaluator_distance";
  }
  return "backbone";
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "sum") return Aggregation::kSum;
  if (s == "mean") return Aggregation::kMean;
  throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}

MessageKind parse_message(std::string_view s) {
  if (s == "multiplicative" || s == "distmult") return MessageKind::kMultiplicative;
  if (s == "additive" || s == "transe") return MessageKind::kAdditive;
  throw ConfigError("unknown message kind '" + std::string(s) + "'");
}

ModelRole parse_role(std::string_view s) {
  if (s == "backbone") return ModelRole::kBackbone;
  if (s == "evaluator_uniform") return ModelRole::kEvaluatorUniform;
  if (s == "evaluator_distance") return ModelRole::kEvaluatorDistance;
  throw ConfigError("unknown model role '" + std::string(s) + "'");
}

void BackboneConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  if (train.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (train.negatives < 1) throw ConfigError("negatives must be >= 1");
  if (!(train.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
}

BackboneParams BackboneParams::zeros_like() const {
  BackboneParams z;
  auto zero = [](const Matrix& m) { return Matrix::Zero(m.rows(), m.cols()); };
  z.query = zero(query);
  for (const auto& m : relation) z.relation.push_back(zero(m));
  for (const auto& m : self_weight) z.self_weight.push_back(zero(m));
  for (const auto& m : agg_weight) z.agg_weight.push_back(zero(m));
  for (const auto& m : bias) z.bias.push_back(zero(m));
  z.decoder = zero(decoder);
  z.decoder_bias = zero(decoder_bias);
  return z;
}

void BackboneParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("query", query);
  for (std::size_t l = 0; l < relation.size(); ++l) {
    const auto idx = std::to_string(l);
    fn("layer" + idx + ".relation", relation[l]);
    fn("layer" + idx + ".self_weight", self_weight[l]);
    fn("layer" + idx + ".agg_weight", agg_weight[l]);
    fn("layer" + idx + ".bias", bias[l]);
  }
  fn("decoder", decoder);
  fn("decoder_bias", decoder_bias);
}

void BackboneParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<BackboneParams*>(this)->for_each(
      [&](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
}

std::uint64_t ModelHandle::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  params.for_each([&](const std::string&, const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

ModelHandle init_model(const BackboneConfig& config, const KnowledgeGraph& g, std::uint64_t seed) {
  config.validate();
  if (g.num_relations() == 0) throw ConfigError("graph has no relations");
  const int d = config.embed_dim;
  const auto num_rel = static_cast<Eigen::Index>(g.num_relations());
  Rng rng = make_rng(seed, {0x1417});

  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal(rng);
    return m;
  };
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
    return m;
  };

  ModelHandle model;
  model.config = config;
  model.num_relations = g.num_relations();
  auto& p = model.params;
  p.query = gaussian(num_rel, d, 1.0);
  for (int l = 0; l < config.num_layers; ++l) {
    p.relation.push_back(gaussian(num_rel, d, 1.0));
    p.self_weight.push_back(glorot(d, d));
    p.agg_weight.push_back(glorot(d, d));
    p.bias.push_back(Matrix::Zero(1, d));
  }
  p.decoder = gaussian(1, d, 1.0 / std::sqrt(static_cast<double>(d)));
  p.decoder_bias = Matrix::Zero(1, 1);
  return model;
}

EdgeMask EdgeMask::constant(const SubgraphView& view, double value) {
  EdgeMask m;
  m.edges = view.edge_ids();
  m.values.assign(m.edges.size(), value);
  return m;
}

double EdgeMask::mean() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

namespace {

void check_compatible(const ModelHandle& model, const KnowledgeGraph& g, const Query& q) {
  if (model.num_relations != g.num_relations())
    throw ContractError("model relation count " + std::to_string(model.num_relations) +
                        " does not match graph (" + std::to_string(g.num_relations()) + ")");
  if (q.head >= g.num_entities()) throw BoundsError("query head out of range");
  if (q.relation >= g.num_relations()) throw BoundsError("query relation out of range");
}

}  // namespace

ForwardTrace trace_forward(const ModelHandle& model, const KnowledgeGraph& g, std::span<const EdgeId> edges,
                           std::span<const double> weights, const Query& q) {
  check_compatible(model, g, q);
  if (!weights.empty() && weights.size() != edges.size())
    throw ContractError("edge weights do not align with edges");

  const auto& p = model.params;
  const auto n = static_cast<Eigen::Index>(g.num_entities());
  const Eigen::Index d = model.config.embed_dim;
  const bool mean = model.config.aggregation == Aggregation::kMean;
  const bool mult = model.config.message == MessageKind::kMultiplicative;

  ForwardTrace t;
  t.query = q;
  t.edges.assign(edges.begin(), edges.end());
  t.weights.assign(weights.begin(), weights.end());

  Matrix h0 = Matrix::Zero(n, d);
  h0.row(q.head) = p.query.row(q.relation);
  t.states.push_back(std::move(h0));

  for (int l = 0; l < model.config.num_layers; ++l) {
    const Matrix& prev = t.states.back();
    const Matrix& rel = p.relation[l];
    Matrix agg = Matrix::Zero(n, d);
    Vector norm;
    if (mean) norm = Vector::Zero(n);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const Triple& e = g.edge(edges[i]);
      const double w = weights.empty() ? 1.0 : weights[i];
      const double* src = prev.row(e.head).data();
      const double* r = rel.row(e.relation).data();
      double* dst = agg.row(e.tail).data();
      if (mult) {
        for (Eigen::Index k = 0; k < d; ++k) dst[k] += w * (src[k] * r[k]);
      } else {
        for (Eigen::Index k = 0; k < d; ++k) dst[k] += w * (src[k] + r[k]);
      }
      if (mean) norm[e.tail] += w;
    }
    if (mean) {
      for (Eigen::Index v = 0; v < n; ++v) {
        if (norm[v] > 0.0) agg.row(v) /= norm[v];
      }
    }
    Matrix pre = prev * p.self_weight[l].transpose() + agg * p.agg_weight[l].transpose();
    pre.rowwise() += p.bias[l].row(0);
    Matrix act = pre.array().tanh().matrix();
    Matrix next = prev + act;
    t.aggregates.push_back(std::move(agg));
    t.activations.push_back(std::move(act));
    t.norms.push_back(std::move(norm));
    t.states.push_back(std::move(next));
  }

  t.scores = t.states.back() * p.decoder.row(0).transpose();
  t.scores.array() += p.decoder_bias(0, 0);
  return t;
}

void backward(const ModelHandle& model, const KnowledgeGraph& g, const ForwardTrace& t, const Vector& score_grad,
              BackboneParams* param_grad, std::vector<double>* weight_grad) {
  const auto& p = model.params;
  const Eigen::Index d = model.config.embed_dim;
  const bool mean = model.config.aggregation == Aggregation::kMean;
  const bool mult = model.config.message == MessageKind::kMultiplicative;
  const int num_layers = model.config.num_layers;

  if (weight_grad) weight_grad->assign(t.edges.size(), 0.0);

  const Matrix& top = t.states.back();
  if (param_grad) {
    param_grad->decoder.row(0) += score_grad.transpose() * top;
    param_grad->decoder_bias(0, 0) += score_grad.sum();
  }
  Matrix d_state = score_grad * p.decoder.row(0);

  for (int l = num_layers - 1; l >= 0; --l) {
    const Matrix& prev = t.states[l];
    const Matrix& agg = t.aggregates[l];
    const Matrix& act = t.activations[l];
    const Matrix& rel = p.relation[l];

    Matrix d_pre = (d_state.array() * (1.0 - act.array().square())).matrix();
    if (param_grad) {
      param_grad->self_weight[l].noalias() += d_pre.transpose() * prev;
      param_grad->agg_weight[l].noalias() += d_pre.transpose() * agg;
      param_grad->bias[l].row(0) += d_pre.colwise().sum();
    }
    Matrix d_prev = d_state;
    d_prev.noalias() += d_pre * p.self_weight[l];
    Matrix d_agg = d_pre * p.agg_weight[l];

    // Turn d(agg) into d(sum of weighted messages) and, for mean, d(norm).
    Vector d_norm;
    if (mean) {
      const Vector& norm = t.norms[l];
      d_norm = Vector::Zero(norm.size());
      for (Eigen::Index v = 0; v < norm.size(); ++v) {
        if (norm[v] > 0.0) {
          d_norm[v] = -d_agg.row(v).dot(agg.row(v)) / norm[v];
          d_agg.row(v) /= norm[v];
        } else {
          d_agg.row(v).setZero();
        }
      }
    }

    Matrix* d_rel = param_grad ? &param_grad->relation[l] : nullptr;
    for (std::size_t i = 0; i < t.edges.size(); ++i) {
      const Triple& e = g.edge(t.edges[i]);
      const double w = t.weights.empty() ? 1.0 : t.weights[i];
      const double* src = prev.row(e.head).data();
      const double* r = rel.row(e.relation).data();
      const double* g_msg = d_agg.row(e.tail).data();
      double* g_src = d_prev.row(e.head).data();
      double* g_rel = d_rel ? d_rel->row(e.relation).data() : nullptr;
      double dw = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double msg = mult ? src[k] * r[k] : src[k] + r[k];
        dw += msg * g_msg[k];
        const double gm = w * g_msg[k];
        if (mult) {
          g_src[k] += gm * r[k];
          if (g_rel) g_rel[k] += gm * src[k];
        } else {
          g_src[k] += gm;
          if (g_rel) g_rel[k] += gm;
        }
      }
      if (weight_grad) {
        if (mean) dw += d_norm[e.tail];
        (*weight_grad)[i] += dw;
      }
    }
    d_state = std::move(d_prev);
  }

  if (param_grad) param_grad->query.row(t.query.relation) += d_state.row(t.query.head);
}

ScoreVector forward(const ModelHandle& model, const SubgraphView& view, const Query& q, const EdgeMask* mask) {
  auto edges = view.edge_ids();
  std::span<const double> weights;
  if (mask) {
    if (mask->edges != edges) throw ContractError("mask does not cover exactly the view's kept edges");
    if (mask->values.size() != edges.size()) throw ContractError("mask values do not align with its edges");
    for (double w : mask->values)
      if (!(w >= 0.0 && w <= 1.0)) throw ContractError("mask value outside [0, 1]");
    weights = mask->values;
  }
  auto t = trace_forward(model, view.graph(), edges, weights, q);
  return {std::move(t.scores), q};
}

EmbeddingTable embed(const ModelHandle& model, const SubgraphView& view, const Query& q) {
  auto edges = view.edge_ids();
  auto t = trace_forward(model, view.graph(), edges, {}, q);
  return {std::move(t.states.back()), model.params.query, q};
}

}  // namespace kgxk
