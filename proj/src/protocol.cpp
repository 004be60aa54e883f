#include "kgxk/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "kgxk/error.hpp"

namespace kgxk {

Explanation RawExplainer::explain(const SubgraphView& view, const Query& q, int budget) const {
  return extract_explanation(net_, *eval_, view, q, budget, cfg_);
}

Explanation InstanceMaskExplainer::explain(const SubgraphView& view, const Query& q, int budget) const {
  return instance_mask_explain(*eval_, view, q, budget, cfg_);
}

Explanation ParameterizedMaskExplainer::explain(const SubgraphView& view, const Query& q, int budget) const {
  return parameterized_mask_explain(net_, *eval_, view, q, budget);
}

Explanation FullGraphExplainer::explain(const SubgraphView& view, const Query& q, int budget) const {
  Explanation out;
  out.query = q;
  out.budget = budget;
  const EntityId seed[] = {q.head};
  const auto dist = hop_distances(view, seed);
  const auto& g = view.graph();
  for (EdgeId e : view.edge_ids())
    if (dist[g.edge(e).head] != kUnreachable) {
      out.edges.push_back(e);
      out.omega.push_back(1.0);
    }
  out.head_isolated = out.edges.empty();
  out.components = count_components(g, out.edges);
  return out;
}

Explanation EmptyExplainer::explain(const SubgraphView&, const Query& q, int budget) const {
  Explanation out;
  out.query = q;
  out.budget = budget;
  out.head_isolated = true;
  return out;
}

const ProtocolRow* ProtocolReport::find(const std::string& explainer, int budget) const {
  for (const auto& r : rows)
    if (r.explainer == explainer && r.budget == budget) return &r;
  return nullptr;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string ProtocolReport::to_csv(bool with_seconds) const {
  std::ostringstream out;
  out << "explainer,budget,mrr,hits1,hits3,hits10" << (with_seconds ? ",seconds" : "") << ",components\n";
  for (const auto& r : rows) {
    out << r.explainer << ',' << (r.budget > 0 ? std::to_string(r.budget) : "inf") << ',' << fmt(r.metrics.mrr)
        << ',' << fmt(r.metrics.hits_at.at(1)) << ',' << fmt(r.metrics.hits_at.at(3)) << ','
        << fmt(r.metrics.hits_at.at(10));
    if (with_seconds) out << ',' << fmt(r.seconds);
    out << ',' << fmt(r.components) << '\n';
  }
  return out.str();
}

ProtocolReport run_protocol(const ModelHandle& backbone, std::span<const Explainer* const> explainers,
                            const KnowledgeGraph& g, const KnownTriples& known, std::span<const Query> valid_queries,
                            std::span<const Query> test_queries, std::span<const int> budgets,
                            const ProtocolConfig& config) {
  if (valid_queries.empty() || test_queries.empty()) throw ContractError("protocol needs validation and test queries");
  for (int k : budgets)
    if (k < 1) throw ConfigError("budgets must be >= 1");
  const std::uint64_t frozen = backbone.checksum();
  const auto full = SubgraphView::full(g);

  ProtocolReport report;
  report.budgets.assign(budgets.begin(), budgets.end());
  for (const Explainer* ex : explainers) {
    const std::vector<int> arm_budgets = ex->unbounded() ? std::vector<int>{0} : report.budgets;
    for (int k : arm_budgets) {
      const auto start = std::chrono::steady_clock::now();
      auto run = [&](const Query& q) {
        auto e = ex->explain(without_query_edge(full, q), q, k);
        if (k > 0 && e.edges.size() > static_cast<std::size_t>(k))
          throw ContractError("explainer '" + ex->name() + "' exceeded budget " + std::to_string(k));
        return e;
      };
      std::vector<FineTuneExample> tune;
      for (const auto& q : valid_queries) tune.push_back({q, run(q).view(g)});
      std::vector<SubgraphView> test_views;
      double components = 0.0;
      for (const auto& q : test_queries) {
        auto e = run(q);
        components += e.components;
        test_views.push_back(e.view(g));
      }
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

      const auto tuned = fine_tune(backbone, tune, config.fine_tune);
      if (backbone.checksum() != frozen) throw std::logic_error("fine-tuning mutated the shared backbone");
      ProtocolRow row;
      row.explainer = ex->name();
      row.budget = k;
      row.metrics = evaluate_model(tuned, test_views, test_queries, known);
      row.seconds = seconds;
      row.components = components / static_cast<double>(test_queries.size());
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string SweepReport::to_csv() const {
  std::ostringstream out;
  out << "model,x,mrr\n";
  for (const auto& r : rows) {
    char x[32];
    std::snprintf(x, sizeof x, "%g", r.x);
    out << r.model << ',' << x << ',' << fmt(r.mrr) << '\n';
  }
  return out.str();
}

double SweepReport::mrr(const std::string& model, double x) const {
  for (const auto& r : rows)
    if (r.model == model && r.x == x) return r.mrr;
  throw ContractError("no sweep point for model '" + model + "'");
}

SweepReport edge_drop_sweep(std::span<const NamedModel> models, const KnowledgeGraph& g, const KnownTriples& known,
                            std::span<const Query> queries, std::span<const double> probs, std::uint64_t seed) {
  const auto full = SubgraphView::full(g);
  SweepReport report;
  for (std::size_t pi = 0; pi < probs.size(); ++pi) {
    const double p = probs[pi];
    DropSchedule::uniform(p).validate();
    std::vector<SubgraphView> views;
    for (std::size_t i = 0; i < queries.size(); ++i)
      views.push_back(drop_edges_uniform(without_query_edge(full, queries[i]), p, derive_seed(seed, {0xd509, pi, i})));
    for (const auto& m : models) report.rows.push_back({m.name, p, evaluate_model(*m.model, views, queries, known).mrr});
  }
  return report;
}

SweepReport ego_radius_sweep(std::span<const NamedModel> models, const KnowledgeGraph& g, const KnownTriples& known,
                             std::span<const Query> queries, std::span<const int> radii) {
  const auto full = SubgraphView::full(g);
  SweepReport report;
  for (int r : radii) {
    if (r < 0) throw ConfigError("ego radius must be >= 0");
    std::vector<SubgraphView> views;
    for (const auto& q : queries) {
      const EntityId seed[] = {q.head};
      views.push_back(ego_network(without_query_edge(full, q), seed, r));
    }
    for (const auto& m : models)
      report.rows.push_back({m.name, static_cast<double>(r), evaluate_model(*m.model, views, queries, known).mrr});
  }
  return report;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("spearman needs two equal-length samples");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace kgxk
