#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kgxk/baselines.hpp"
#include "kgxk/explainer.hpp"
#include "kgxk/metrics.hpp"
#include "kgxk/training.hpp"

namespace kgxk {

class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string name() const = 0;
  virtual Explanation explain(const SubgraphView& view, const Query& q, int budget) const = 0;
  // Reference arms ignore the budget and run once.
  virtual bool unbounded() const { return false; }
};

class RawExplainer : public Explainer {
 public:
  RawExplainer(MaskNet net, const ModelHandle& eval_model, PPRConfig cfg)
      : net_(std::move(net)), eval_(&eval_model), cfg_(cfg) {}
  std::string name() const override { return "raw"; }
  Explanation explain(const SubgraphView& view, const Query& q, int budget) const override;

 private:
  MaskNet net_;
  const ModelHandle* eval_;
  PPRConfig cfg_;
};

class InstanceMaskExplainer : public Explainer {
 public:
  InstanceMaskExplainer(const ModelHandle& eval_model, InstanceMaskConfig cfg) : eval_(&eval_model), cfg_(cfg) {}
  std::string name() const override { return "instance_mask"; }
  Explanation explain(const SubgraphView& view, const Query& q, int budget) const override;

 private:
  const ModelHandle* eval_;
  InstanceMaskConfig cfg_;
};

class ParameterizedMaskExplainer : public Explainer {
 public:
  ParameterizedMaskExplainer(MaskNet net, const ModelHandle& eval_model) : net_(std::move(net)), eval_(&eval_model) {}
  std::string name() const override { return "param_mask"; }
  Explanation explain(const SubgraphView& view, const Query& q, int budget) const override;

 private:
  MaskNet net_;
  const ModelHandle* eval_;
};

// The head's whole connected component within the view.
class FullGraphExplainer : public Explainer {
 public:
  std::string name() const override { return "full"; }
  Explanation explain(const SubgraphView& view, const Query& q, int budget) const override;
  bool unbounded() const override { return true; }
};

class EmptyExplainer : public Explainer {
 public:
  std::string name() const override { return "empty"; }
  Explanation explain(const SubgraphView& view, const Query& q, int budget) const override;
  bool unbounded() const override { return true; }
};

struct ProtocolRow {
  std::string explainer;
  int budget = 0;  // 0 for unbounded reference arms
  RankingMetrics metrics;
  double seconds = 0.0;
  double components = 0.0;  // mean over test explanations
};

struct ProtocolReport {
  std::vector<int> budgets;
  std::vector<ProtocolRow> rows;

  const ProtocolRow* find(const std::string& explainer, int budget) const;
  std::string to_csv(bool with_seconds = true) const;
};

struct ProtocolConfig {
  TrainConfig fine_tune;
};

// For each explainer and budget: explain every validation and test query,
// fine-tune a fresh copy of the backbone on the validation (query,
// explanation) pairs, then score each test query on its own explanation.
ProtocolReport run_protocol(const ModelHandle& backbone, std::span<const Explainer* const> explainers,
                            const KnowledgeGraph& g, const KnownTriples& known, std::span<const Query> valid_queries,
                            std::span<const Query> test_queries, std::span<const int> budgets,
                            const ProtocolConfig& config);

struct SweepRow {
  std::string model;
  double x = 0.0;
  double mrr = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::string to_csv() const;
  double mrr(const std::string& model, double x) const;
};

struct NamedModel {
  std::string name;
  const ModelHandle* model;
};

// Each query is scored on its own uniformly dropped view.
SweepReport edge_drop_sweep(std::span<const NamedModel> models, const KnowledgeGraph& g, const KnownTriples& known,
                            std::span<const Query> queries, std::span<const double> probs, std::uint64_t seed);

// Each query is scored on the ego network around its head.
SweepReport ego_radius_sweep(std::span<const NamedModel> models, const KnowledgeGraph& g, const KnownTriples& known,
                             std::span<const Query> queries, std::span<const int> radii);

// Rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace kgxk
