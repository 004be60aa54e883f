#include "kgxk/training.hpp"

#include <cmath>
#include <numeric>

#include "kgxk/error.hpp"
#include "kgxk/optim.hpp"
#include "kgxk/rng.hpp"

namespace kgxk {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::vector<Matrix*> tensors(BackboneParams& p) {
  std::vector<Matrix*> out;
  p.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> const_tensors(BackboneParams& p) {
  std::vector<const Matrix*> out;
  p.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

double bce_loss(const Vector& scores, EntityId answer, std::span<const EntityId> negatives, Vector* grad) {
  const double inv_k = negatives.empty() ? 0.0 : 1.0 / static_cast<double>(negatives.size());
  double loss = softplus(-scores[answer]);
  if (grad) (*grad)[answer] += sigmoid(scores[answer]) - 1.0;
  for (EntityId n : negatives) {
    loss += inv_k * softplus(scores[n]);
    if (grad) (*grad)[n] += inv_k * sigmoid(scores[n]);
  }
  return loss;
}

SubgraphView without_query_edge(const SubgraphView& view, const Query& q) {
  const auto& g = view.graph();
  auto e = g.find_edge({q.head, q.relation, q.answer});
  if (!e) return view;
  const EdgeId drop[] = {*e, g.paired_edge(*e)};
  return view.without(drop);
}

ModelHandle train_on_views(ModelHandle model, std::span<const Query> queries, const ViewProvider& views,
                           const TrainConfig& train) {
  if (train.epochs == 0 || queries.empty()) return model;
  if (train.batch_size < 1 || train.negatives < 1) throw ConfigError("invalid training configuration");

  Adam adam(train.learning_rate);
  std::vector<std::size_t> order(queries.size());

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(train.seed, {0x5f1e, static_cast<std::uint64_t>(epoch)});
    shuffle(std::span<std::size_t>(order), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      BackboneParams grad = model.params.zeros_like();
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t qi = order[b];
        const Query& q = queries[qi];
        SubgraphView view = views(qi, epoch);
        const auto& g = view.graph();
        if (q.answer >= g.num_entities()) throw ContractError("training query without a valid answer");

        Rng neg_rng = make_rng(train.seed, {0x7e9a, static_cast<std::uint64_t>(epoch), qi});
        std::vector<EntityId> negatives;
        negatives.reserve(static_cast<std::size_t>(train.negatives));
        const auto n = g.num_entities();
        for (int k = 0; k < train.negatives && n > 1; ++k) {
          auto c = static_cast<EntityId>(uniform_index(neg_rng, n - 1));
          if (c >= q.answer) ++c;
          negatives.push_back(c);
        }

        auto edges = view.edge_ids();
        auto trace = trace_forward(model, g, edges, {}, q);
        Vector score_grad = Vector::Zero(trace.scores.size());
        const double loss = bce_loss(trace.scores, q.answer, negatives, &score_grad);
        if (!std::isfinite(loss)) throw TrainingError(epoch, "non-finite loss");
        epoch_loss += loss;
        backward(model, g, trace, score_grad, &grad, nullptr);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      grad.for_each([&](const std::string&, Matrix& m) { m *= scale; });
      adam.step(tensors(model.params), const_tensors(grad));
    }
    epoch_loss /= static_cast<double>(queries.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError(epoch, "non-finite loss");
    model.loss_history.push_back(epoch_loss);
  }
  return model;
}

ModelHandle train_backbone(ModelHandle model, const KnowledgeGraph& g, std::span<const Query> queries,
                           const TrainConfig& train) {
  const auto full = SubgraphView::full(g);
  model.role = ModelRole::kBackbone;
  return train_on_views(
      std::move(model), queries, [&](std::size_t i, int) { return without_query_edge(full, queries[i]); }, train);
}

ModelHandle fine_tune(const ModelHandle& model, std::span<const FineTuneExample> dataset, const TrainConfig& train) {
  if (dataset.empty()) throw ContractError("fine-tuning needs a non-empty dataset");
  std::vector<Query> queries;
  queries.reserve(dataset.size());
  for (const auto& ex : dataset) queries.push_back(ex.query);
  return train_on_views(model, queries, [&](std::size_t i, int) { return dataset[i].view; }, train);
}

}  // namespace kgxk
