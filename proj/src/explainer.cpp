#include "kgxk/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "kgxk/error.hpp"
#include "kgxk/optim.hpp"
#include "kgxk/training.hpp"

namespace kgxk {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kEntropyClamp = 1e-7;

std::vector<Matrix*> parameters(MaskNet& net) {
  std::vector<Matrix*> out;
  net.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> const_parameters(const MaskNet& net) {
  std::vector<const Matrix*> out;
  net.for_each([&](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

void check_embedding(const EmbeddingTable& emb, const KnowledgeGraph& g, const Query& q, int d) {
  if (static_cast<std::size_t>(emb.entities.rows()) != g.num_entities() ||
      static_cast<std::size_t>(emb.relations.rows()) != g.num_relations())
    throw ContractError("embedding table does not match the graph vocabulary");
  if (emb.entities.cols() != d || emb.relations.cols() != d)
    throw ContractError("embedding width does not match the mask network");
  if (emb.query.head != q.head || emb.query.relation != q.relation)
    throw ContractError("embedding table is conditioned on a different query");
}

}  // namespace

void MaskNetConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("mask embed_dim must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("mask hidden sizes must be >= 1");
  if (!(temperature_start > 0.0) || !(temperature_end > 0.0)) throw ConfigError("temperatures must be > 0");
}

MaskNet MaskNet::init(const MaskNetConfig& config, std::uint64_t seed) {
  config.validate();
  MaskNet net;
  net.config = config;
  Rng rng = make_rng(seed, {0x3a51});
  int in = config.input_dim();
  std::vector<int> sizes = config.hidden;
  sizes.push_back(1);
  for (int out : sizes) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Matrix::Zero(1, out));
    in = out;
  }
  return net;
}

MaskNet MaskNet::zeros_like() const {
  MaskNet z;
  z.config = config;
  for (const auto& w : weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(Matrix::Zero(b.rows(), b.cols()));
  return z;
}

void MaskNet::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    fn("weight" + std::to_string(k), weights[k]);
    fn("bias" + std::to_string(k), biases[k]);
  }
}

void MaskNet::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    fn("weight" + std::to_string(k), weights[k]);
    fn("bias" + std::to_string(k), biases[k]);
  }
}

std::uint64_t MaskNet::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for_each([&](const std::string&, const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  });
  return h;
}

MaskTrace mask_logits(const MaskNet& net, const EmbeddingTable& emb, const KnowledgeGraph& g,
                      std::span<const EdgeId> edges) {
  check_embedding(emb, g, emb.query, net.config.embed_dim);
  const Eigen::Index d = net.config.embed_dim;
  const auto n = static_cast<Eigen::Index>(edges.size());
  MaskTrace t;
  t.edges.assign(edges.begin(), edges.end());
  t.input.resize(n, 5 * d);
  const auto zh = emb.entities.row(emb.query.head);
  const auto zr = emb.relations.row(emb.query.relation);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = g.edge(edges[static_cast<std::size_t>(i)]);
    t.input.block(i, 0, 1, d) = emb.entities.row(e.head);
    t.input.block(i, d, 1, d) = emb.relations.row(e.relation);
    t.input.block(i, 2 * d, 1, d) = emb.entities.row(e.tail);
    t.input.block(i, 3 * d, 1, d) = zh;
    t.input.block(i, 4 * d, 1, d) = zr;
  }
  Matrix act = t.input;
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    Matrix pre = act * net.weights[k].transpose();
    pre.rowwise() += net.biases[k].row(0);
    act = k + 1 < net.weights.size() ? Matrix(pre.cwiseMax(0.0)) : pre;
    t.pre.push_back(std::move(pre));
  }
  t.logits = act.col(0);
  return t;
}

void mask_backward(const MaskNet& net, const MaskTrace& trace, const Vector& logit_grad, MaskNet& grad) {
  const std::size_t layers = net.weights.size();
  Matrix d_pre = logit_grad;
  for (std::size_t k = layers; k-- > 0;) {
    Matrix input = k == 0 ? trace.input : Matrix(trace.pre[k - 1].cwiseMax(0.0));
    grad.weights[k] += d_pre.transpose() * input;
    grad.biases[k].row(0) += d_pre.colwise().sum();
    if (k == 0) break;
    Matrix d_act = d_pre * net.weights[k];
    d_pre = (trace.pre[k - 1].array() > 0.0).select(d_act, 0.0);
  }
}

EdgeMask relax_logits(std::span<const EdgeId> edges, const Vector& logits, double temperature, Rng* rng,
                      Vector* noise) {
  if (!(temperature > 0.0)) throw ContractError("temperature must be > 0");
  if (static_cast<std::size_t>(logits.size()) != edges.size()) throw ContractError("one logit per edge expected");
  EdgeMask mask;
  mask.edges.assign(edges.begin(), edges.end());
  mask.values.resize(edges.size());
  if (noise) noise->setZero(logits.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double g = rng ? logistic_noise(*rng) : 0.0;
    if (noise) (*noise)[static_cast<Eigen::Index>(i)] = g;
    mask.values[i] =
        std::clamp(sigmoid((logits[static_cast<Eigen::Index>(i)] + g) / temperature), kMaskFloor, 1.0 - kMaskFloor);
  }
  return mask;
}

EdgeMask edge_scores(const MaskNet& net, const EmbeddingTable& emb, const SubgraphView& view, const Query& q,
                     double temperature, Rng* rng, bool hard) {
  check_embedding(emb, view.graph(), q, net.config.embed_dim);
  const auto edges = view.edge_ids();
  const auto trace = mask_logits(net, emb, view.graph(), edges);
  return relax_logits(edges, trace.logits, temperature, hard ? nullptr : rng);
}

double regularizers(const EdgeMask& mask, double lambda_size, double lambda_ent, std::vector<double>* grad) {
  const std::size_t n = mask.values.size();
  if (grad) grad->assign(n, 0.0);
  if (n == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  double size = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = mask.values[i];
    const double c = std::clamp(w, kEntropyClamp, 1.0 - kEntropyClamp);
    size += w;
    entropy += -c * std::log(c) - (1.0 - c) * std::log(1.0 - c);
    if (grad) {
      const bool clamped = w < kEntropyClamp || w > 1.0 - kEntropyClamp;
      (*grad)[i] = lambda_size * inv + (clamped ? 0.0 : lambda_ent * inv * std::log((1.0 - c) / c));
    }
  }
  return lambda_size * size * inv + lambda_ent * entropy * inv;
}

void ExplainerTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("explainer epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("explainer learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("explainer batch_size must be >= 1");
  if (lambda_size < 0.0 || lambda_ent < 0.0) throw ConfigError("regularizer weights must be >= 0");
  if (train_budget < 1) throw ConfigError("explainer train_budget must be >= 1");
}

ExplainerLoss explainer_objective(const ModelHandle& eval_model, const SubgraphView& view, const Query& q,
                                  const EdgeMask& mask, std::span<const EntityId> teleport, const PPRConfig& cfg,
                                  int top_nodes, double lambda_size, double lambda_ent,
                                  std::vector<double>* omega_grad) {
  if (q.answer == kNoEntity) throw ContractError("explainer objective needs the query answer");
  const auto& g = view.graph();
  ExplainerLoss loss;
  const auto trace = trace_forward(eval_model, g, mask.edges, mask.values, q);
  const Vector& s = trace.scores;
  const double peak = s.maxCoeff();
  const Vector p = (s.array() - peak).exp().matrix();
  const double z = p.sum();
  loss.fidelity = -(s[q.answer] - peak - std::log(z));

  if (omega_grad) {
    Vector score_grad = p / z;
    score_grad[q.answer] -= 1.0;
    backward(eval_model, g, trace, score_grad, nullptr, omega_grad);
  }

  if (cfg.beta_in > 0.0 || cfg.beta_out > 0.0) {
    const auto pw = collapse_relations(mask, g, cfg.collapse);
    const auto adj = stochastic_adjacency(pw, teleport, cfg.alpha, g.num_entities());
    const auto dist = ppr(adj, teleport, cfg);
    const auto part = partition_edges(view, dist, top_nodes);
    std::vector<double> ppr_grad;
    loss.ppr = ppr_loss(mask, part, cfg.beta_in, cfg.beta_out, omega_grad ? &ppr_grad : nullptr);
    if (omega_grad)
      for (std::size_t i = 0; i < ppr_grad.size(); ++i) (*omega_grad)[i] += ppr_grad[i];
  }

  std::vector<double> reg_grad;
  loss.regularization = regularizers(mask, lambda_size, lambda_ent, omega_grad ? &reg_grad : nullptr);
  if (omega_grad)
    for (std::size_t i = 0; i < reg_grad.size(); ++i) (*omega_grad)[i] += reg_grad[i];
  return loss;
}

void check_frozen(const ModelHandle& model, std::uint64_t expected) {
  if (model.checksum() != expected) throw std::logic_error("frozen evaluator parameters were modified");
}

MaskNet train_explainer(MaskNet net, const ModelHandle& eval_model, const KnowledgeGraph& g,
                        std::span<const Query> train_queries, const PPRConfig& cfg,
                        const ExplainerTrainConfig& train) {
  train.validate();
  cfg.validate();
  net.config.validate();
  if (eval_model.role == ModelRole::kBackbone) throw ContractError("explainer training needs an evaluator model");
  if (net.config.embed_dim != eval_model.config.embed_dim)
    throw ContractError("mask network width does not match the evaluator");
  if (train.epochs == 0 || train_queries.empty()) return net;
  const std::uint64_t frozen = eval_model.checksum();
  const int top_nodes = cfg.top_nodes_for_budget(train.train_budget);

  struct Cached {
    SubgraphView view;
    EmbeddingTable emb;
    std::vector<EntityId> teleport;
  };
  std::vector<Cached> cache;
  cache.reserve(train_queries.size());
  const auto full = SubgraphView::full(g);
  for (const auto& q : train_queries) {
    auto view = without_query_edge(full, q);
    auto trace = trace_forward(eval_model, g, view.edge_ids(), {}, q);
    auto teleport = teleport_set(trace.scores, q.head, cfg.top_tails);
    EmbeddingTable emb{std::move(trace.states.back()), eval_model.params.query, q};
    cache.push_back({std::move(view), std::move(emb), std::move(teleport)});
  }

  Adam adam(train.learning_rate);
  const auto params = parameters(net);
  std::vector<std::size_t> order(train_queries.size());
  const double t0 = net.config.temperature_start, t1 = net.config.temperature_end;
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    const double frac = train.epochs > 1 ? static_cast<double>(epoch) / (train.epochs - 1) : 1.0;
    const double temperature = t0 * std::pow(t1 / t0, frac);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(train.seed, {0x3a5c, static_cast<std::uint64_t>(epoch)});
    shuffle(std::span<std::size_t>(order), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      MaskNet grad = net.zeros_like();
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t qi = order[b];
        const Query& q = train_queries[qi];
        const auto& c = cache[qi];
        Rng noise_rng = make_rng(train.seed, {0x6b1d, static_cast<std::uint64_t>(epoch), qi});
        const auto edges = c.view.edge_ids();
        const auto trace = mask_logits(net, c.emb, g, edges);
        const auto mask = relax_logits(edges, trace.logits, temperature, &noise_rng);
        std::vector<double> omega_grad;
        const auto loss = explainer_objective(eval_model, c.view, q, mask, c.teleport, cfg, top_nodes,
                                              train.lambda_size, train.lambda_ent, &omega_grad);
        if (!std::isfinite(loss.total())) throw TrainingError(epoch, "explainer loss is not finite");
        epoch_loss += loss.total();
        Vector logit_grad(static_cast<Eigen::Index>(edges.size()));
        for (std::size_t i = 0; i < edges.size(); ++i) {
          const double w = mask.values[i];
          logit_grad[static_cast<Eigen::Index>(i)] = omega_grad[i] * w * (1.0 - w) / temperature;
        }
        mask_backward(net, trace, logit_grad, grad);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      grad.for_each([&](const std::string&, Matrix& m) { m *= scale; });
      adam.step(params, const_parameters(grad));
    }
    net.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  check_frozen(eval_model, frozen);
  return net;
}

int count_components(const KnowledgeGraph& g, std::span<const EdgeId> edges) {
  std::vector<EntityId> parent(g.num_entities());
  std::iota(parent.begin(), parent.end(), EntityId{0});
  std::vector<bool> touched(g.num_entities(), false);
  auto find = [&](EntityId v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (EdgeId e : edges) {
    const auto& t = g.edge(e);
    touched[t.head] = touched[t.tail] = true;
    parent[find(t.head)] = find(t.tail);
  }
  int count = 0;
  for (EntityId v = 0; v < g.num_entities(); ++v)
    if (touched[v] && find(v) == v) ++count;
  return count;
}

Explanation extract_explanation(const MaskNet& net, const ModelHandle& eval_model, const SubgraphView& view,
                                const Query& q, int budget, const PPRConfig& cfg) {
  if (budget < 1) throw ContractError("budget must be >= 1");
  const auto& g = view.graph();
  Explanation out;
  out.query = q;
  out.budget = budget;

  const auto edges = view.edge_ids();
  auto trace = trace_forward(eval_model, g, edges, {}, q);
  const auto teleport = teleport_set(trace.scores, q.head, cfg.top_tails);
  const EmbeddingTable emb{std::move(trace.states.back()), eval_model.params.query, q};
  const auto logits = mask_logits(net, emb, g, edges).logits;
  const auto mask = relax_logits(edges, logits, net.config.temperature_end, nullptr);

  const auto adj = stochastic_adjacency(collapse_relations(mask, g, cfg.collapse), teleport, cfg.alpha,
                                        g.num_entities());
  const auto dist = ppr(adj, teleport, cfg);
  out.pi = dist.pi;
  out.converged = dist.converged;
  const auto part = partition_edges(view, dist, cfg.top_nodes_for_budget(budget));

  // Position of each edge in the selection priority order.
  std::vector<bool> inside(g.num_edges(), false);
  for (EdgeId e : part.inside) inside[e] = true;
  std::vector<std::size_t> slot(g.num_edges(), 0);
  for (std::size_t i = 0; i < edges.size(); ++i) slot[edges[i]] = i;
  auto walk = [&](EdgeId e) { return dist.pi[g.edge(e).head] + dist.pi[g.edge(e).tail]; };
  std::vector<EdgeId> ranked = edges;
  std::sort(ranked.begin(), ranked.end(), [&](EdgeId a, EdgeId b) {
    if (inside[a] != inside[b]) return static_cast<bool>(inside[a]);
    if (!inside[a]) {
      const double wa = walk(a), wb = walk(b);
      if (wa != wb) return wa > wb;
    }
    const double oa = mask.values[slot[a]], ob = mask.values[slot[b]];
    if (oa != ob) return oa > ob;
    const double la = logits[static_cast<Eigen::Index>(slot[a])], lb = logits[static_cast<Eigen::Index>(slot[b])];
    if (la != lb) return la > lb;
    return a < b;
  });
  std::vector<std::size_t> priority(g.num_edges(), 0);
  for (std::size_t i = 0; i < ranked.size(); ++i) priority[ranked[i]] = i;

  std::vector<bool> reached(g.num_entities(), false), taken(g.num_edges(), false), queued(g.num_edges(), false);
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> frontier;
  auto reach = [&](EntityId v) {
    if (reached[v]) return;
    reached[v] = true;
    for (auto incident : {g.out_edges(v), g.in_edges(v)})
      for (EdgeId e : incident)
        if (view.contains(e) && !queued[e]) {
          queued[e] = true;
          frontier.push(priority[e]);
        }
  };
  reach(q.head);
  out.head_isolated = frontier.empty();
  while (!frontier.empty() && out.edges.size() < static_cast<std::size_t>(budget)) {
    const EdgeId e = ranked[frontier.top()];
    frontier.pop();
    if (taken[e]) continue;
    taken[e] = true;
    out.edges.push_back(e);
    out.omega.push_back(mask.values[slot[e]]);
    reach(g.edge(e).head);
    reach(g.edge(e).tail);
  }
  out.components = count_components(g, out.edges);
  return out;
}

}  // namespace kgxk
