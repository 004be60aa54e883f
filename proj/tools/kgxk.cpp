#include <cstdio>
#include <cstdlib>
#include <functional>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgxk/baselines.hpp"
#include "kgxk/config.hpp"
#include "kgxk/error.hpp"
#include "kgxk/io.hpp"
#include "kgxk/metrics.hpp"
#include "kgxk/protocol.hpp"
#include "kgxk/robust_evaluator.hpp"
#include "kgxk/synthetic.hpp"
#include "kgxk/training.hpp"

#ifndef KGXK_VERSION
#define KGXK_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace kgxk;

namespace {

struct Common {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::string run_id;
  std::int64_t seed = -1;
};

struct Context {
  RunConfig cfg;
  fs::path run_dir;
  Dataset data;
  std::unique_ptr<KnowledgeGraph> graph;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON run configuration");
  sub->add_option("--data", c.data_dir, "Dataset directory with train/valid/test.txt (empty: synthetic)");
  sub->add_option("--out", c.out_dir, "Output root (default $KGXK_OUT or ./runs)");
  sub->add_option("--run-id", c.run_id, "Run directory name under the output root");
  sub->add_option("--seed", c.seed, "Master seed");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split(s, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, int>) {
        out.push_back(std::stoi(item, &used));
      } else {
        out.push_back(std::stod(item, &used));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse list item '" + item + "'");
    }
  }
  return out;
}

using Adjust = std::function<void(RunConfig&)>;

RunConfig resolve_config(const Common& c, const std::string& command, const Adjust& adjust) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  if (!c.run_id.empty()) cfg.run_id = c.run_id;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (cfg.out_dir.empty()) {
    const char* env = std::getenv("KGXK_OUT");
    cfg.out_dir = env && *env ? env : "runs";
  }
  if (cfg.run_id.empty()) cfg.run_id = command + "-seed" + std::to_string(cfg.seed);
  if (adjust) adjust(cfg);
  apply_seed(cfg);
  cfg.validate();
  return cfg;
}

Context open_run(const Common& common, const std::string& command, const Json& args, bool load_data = true,
                 const Adjust& adjust = {}) {
  Context ctx;
  ctx.cfg = resolve_config(common, command, adjust);
  ctx.run_dir = fs::path(ctx.cfg.out_dir) / ctx.cfg.run_id;
  fs::create_directories(ctx.run_dir);
  write_json(ctx.run_dir / "manifest.json", {{"command", command},
                                             {"version", KGXK_VERSION},
                                             {"seed", ctx.cfg.seed},
                                             {"args", args},
                                             {"config", run_config_to_json(ctx.cfg)}});
  if (load_data) {
    ctx.data = ctx.cfg.data_dir.empty() ? make_planted_kg(ctx.cfg.synthetic).dataset : load_dataset(ctx.cfg.data_dir);
    ctx.graph = std::make_unique<KnowledgeGraph>(KnowledgeGraph::build(ctx.data.train, ctx.data.vocab));
  }
  return ctx;
}

std::vector<Query> limit(std::vector<Query> q, std::size_t n) {
  if (n > 0 && q.size() > n) q.resize(n);
  return q;
}

std::vector<Query> split_queries(const Context& ctx, const std::string& split_name) {
  const auto r = ctx.graph->num_base_relations();
  if (split_name == "train") return make_queries(ctx.data.train, r);
  if (split_name == "valid") return make_queries(ctx.data.valid, r);
  if (split_name == "test") return make_queries(ctx.data.test, r);
  throw ConfigError("unknown split '" + split_name + "'");
}

std::string losses_csv(const std::vector<double>& losses) {
  std::ostringstream out;
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
  return out.str();
}

ModelHandle train_backbone_model(const Context& ctx) {
  const auto queries = make_queries(ctx.data.train, ctx.graph->num_base_relations());
  auto model = init_model(ctx.cfg.backbone, *ctx.graph, derive_seed(ctx.cfg.seed, {11}));
  return train_backbone(std::move(model), *ctx.graph, queries, ctx.cfg.backbone.train);
}

ModelHandle train_evaluator_model(const Context& ctx) {
  const auto queries = make_queries(ctx.data.train, ctx.graph->num_base_relations());
  return train_evaluator(ctx.cfg.backbone, *ctx.graph, ctx.cfg.evaluator.schedule, queries, ctx.cfg.evaluator.train,
                         derive_seed(ctx.cfg.seed, {12}));
}

MaskNet train_mask_net(const Context& ctx, const ModelHandle& evaluator, bool with_ppr) {
  const auto queries =
      limit(make_queries(ctx.data.train, ctx.graph->num_base_relations()), ctx.cfg.explainer.max_train_queries);
  auto net = MaskNet::init(ctx.cfg.explainer.mask, derive_seed(ctx.cfg.seed, {13}));
  if (with_ppr) return train_explainer(std::move(net), evaluator, *ctx.graph, queries, ctx.cfg.ppr, ctx.cfg.explainer.train);
  return train_parameterized_baseline(std::move(net), evaluator, *ctx.graph, queries, ctx.cfg.ppr,
                                      ctx.cfg.explainer.train);
}

Query parse_query(const Context& ctx, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() < 2 || parts.size() > 3) throw ConfigError("--query expects 'head,relation[,tail]'");
  const auto& g = *ctx.graph;
  Query q;
  auto head = g.vocab().entity(parts[0]);
  if (!head) throw VocabError(parts[0]);
  q.head = *head;
  bool found = false;
  for (RelationId r = 0; r < g.num_relations() && !found; ++r)
    if (g.relation_label(r) == parts[1]) {
      q.relation = r;
      found = true;
    }
  if (!found) throw VocabError(parts[1]);
  if (parts.size() == 3) {
    auto tail = g.vocab().entity(parts[2]);
    if (!tail) throw VocabError(parts[2]);
    q.answer = *tail;
  }
  return q;
}

std::vector<NamedModel> named_models(const std::vector<std::string>& specs, std::vector<ModelHandle>& storage) {
  storage.clear();
  storage.reserve(specs.size());
  std::vector<NamedModel> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--model expects name=checkpoint");
    storage.push_back(load_model(s.substr(eq + 1)));
    out.push_back({s.substr(0, eq), &storage.back()});
  }
  return out;
}

void check_model_fits(const ModelHandle& m, const KnowledgeGraph& g) {
  if (m.num_relations != g.num_relations()) throw ContractError("checkpoint relation count does not match the graph");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph link-prediction explainer toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", KGXK_VERSION);
  Common common;
  Json args = Json::array();
  for (int i = 1; i < argc; ++i) args.push_back(argv[i]);

  bool synthetic = false;
  auto* prepare = app.add_subcommand("prepare", "Load or generate a dataset and write its statistics");
  add_common(prepare, common);
  prepare->add_flag("--synthetic", synthetic, "Generate the planted synthetic dataset");

  auto* train_bb = app.add_subcommand("train-backbone", "Train the backbone on the full training graph");
  add_common(train_bb, common);

  std::string schedule, evaluator_path, explainer_path, model_path, query_text, split_name = "test",
                                                                                  method = "raw", budgets_text,
                                                                                  probs_text, radii_text, run_path,
                                                                                  explanations_path, backbone_path;
  double drop_p = -1.0;
  int budget = 25;
  bool no_ppr = false;
  std::vector<std::string> model_specs;

  auto* train_ev = app.add_subcommand("train-evaluator", "Train a robust evaluator on perturbed views");
  add_common(train_ev, common);
  train_ev->add_option("--schedule", schedule, "uniform or distance")->check(CLI::IsMember({"uniform", "distance"}));
  train_ev->add_option("--p", drop_p, "Uniform drop probability");

  auto* train_ex = app.add_subcommand("train-explainer", "Train the mask network against a frozen evaluator");
  add_common(train_ex, common);
  train_ex->add_option("--evaluator", evaluator_path, "Evaluator checkpoint")->required();
  train_ex->add_flag("--no-ppr", no_ppr, "Disable the PPR term (parameterized-mask baseline)");

  auto* explain = app.add_subcommand("explain", "Extract budgeted explanations");
  add_common(explain, common);
  explain->add_option("--evaluator", evaluator_path, "Evaluator checkpoint")->required();
  explain->add_option("--explainer", explainer_path, "Mask network checkpoint");
  explain->add_option("--method", method, "raw, param_mask or instance_mask")
      ->check(CLI::IsMember({"raw", "param_mask", "instance_mask"}));
  explain->add_option("--query", query_text, "Single query 'head,relation[,tail]'");
  explain->add_option("--split", split_name, "Split to explain when no --query is given");
  explain->add_option("--budget", budget, "Maximum number of edges")->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Filtered ranking metrics of a checkpoint");
  add_common(evaluate, common);
  evaluate->add_option("--model", model_path, "Model checkpoint")->required();
  evaluate->add_option("--split", split_name, "valid or test");
  evaluate->add_option("--explanations", explanations_path, "Score each query on its explanation subgraph");

  auto* sweep_drop = app.add_subcommand("sweep-drop", "MRR under uniform edge drop");
  add_common(sweep_drop, common);
  sweep_drop->add_option("--model", model_specs, "name=checkpoint, repeatable")->required();
  sweep_drop->add_option("--probs", probs_text, "Comma-separated drop probabilities");
  sweep_drop->add_option("--split", split_name, "valid or test");

  auto* sweep_ego = app.add_subcommand("sweep-ego", "MRR on ego networks of growing radius");
  add_common(sweep_ego, common);
  sweep_ego->add_option("--model", model_specs, "name=checkpoint, repeatable")->required();
  sweep_ego->add_option("--radii", radii_text, "Comma-separated radii");
  sweep_ego->add_option("--split", split_name, "valid or test");

  auto* protocol = app.add_subcommand("protocol", "Fine-tune-and-evaluate protocol over explainers and budgets");
  add_common(protocol, common);
  protocol->add_option("--budgets", budgets_text, "Comma-separated budgets");
  protocol->add_option("--backbone", backbone_path, "Backbone checkpoint (trained when omitted)");
  protocol->add_option("--evaluator", evaluator_path, "Evaluator checkpoint (trained when omitted)");

  auto* report = app.add_subcommand("report", "Tabulate a finished protocol run");
  add_common(report, common);
  report->add_option("--run", run_path, "Protocol run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR 1: " << e.what() << "\n";
    return 1;
  }

  try {
    if (prepare->parsed()) {
      Common c = common;
      if (synthetic) c.data_dir.clear();
      auto ctx = open_run(c, "prepare", args);
      if (ctx.cfg.data_dir.empty()) {
        for (auto [name, triples] : {std::pair{"train.txt", &ctx.data.train}, std::pair{"valid.txt", &ctx.data.valid},
                                     std::pair{"test.txt", &ctx.data.test}})
          save_triples(ctx.run_dir / "data" / name, *triples, ctx.data.vocab);
      }
      const Json stats = {{"entities", ctx.data.vocab.num_entities()},
                          {"relations", ctx.data.vocab.num_relations()},
                          {"train", ctx.data.train.size()},
                          {"valid", ctx.data.valid.size()},
                          {"test", ctx.data.test.size()},
                          {"graph_edges", ctx.graph->num_edges()},
                          {"duplicates_removed", ctx.graph->stats().duplicates_removed}};
      write_json(ctx.run_dir / "stats.json", stats);
      std::cout << stats.dump() << "\n";
    } else if (train_bb->parsed()) {
      auto ctx = open_run(common, "train-backbone", args);
      const auto model = train_backbone_model(ctx);
      save_model(ctx.run_dir / "backbone.json", model);
      write_text(ctx.run_dir / "loss.csv", losses_csv(model.loss_history));
    } else if (train_ev->parsed()) {
      auto ctx = open_run(common, "train-evaluator", args, true, [&](RunConfig& cfg) {
        if (schedule == "uniform") cfg.evaluator.schedule.kind = DropSchedule::Kind::kUniform;
        if (schedule == "distance") cfg.evaluator.schedule.kind = DropSchedule::Kind::kDistanceDecay;
        if (drop_p >= 0.0) cfg.evaluator.schedule.p = drop_p;
      });
      const auto model = train_evaluator_model(ctx);
      save_model(ctx.run_dir / "evaluator.json", model);
      write_text(ctx.run_dir / "loss.csv", losses_csv(model.loss_history));
    } else if (train_ex->parsed()) {
      auto ctx = open_run(common, "train-explainer", args);
      const auto evaluator = load_model(evaluator_path);
      check_model_fits(evaluator, *ctx.graph);
      ctx.cfg.explainer.mask.embed_dim = evaluator.config.embed_dim;
      const auto net = train_mask_net(ctx, evaluator, !no_ppr);
      save_masknet(ctx.run_dir / "explainer.json", net);
      write_text(ctx.run_dir / "loss.csv", losses_csv(net.loss_history));
    } else if (explain->parsed()) {
      auto ctx = open_run(common, "explain", args);
      const auto evaluator = load_model(evaluator_path);
      check_model_fits(evaluator, *ctx.graph);
      std::unique_ptr<Explainer> ex;
      if (method == "instance_mask") {
        ex = std::make_unique<InstanceMaskExplainer>(evaluator, ctx.cfg.instance_mask);
      } else {
        if (explainer_path.empty()) throw ConfigError("--explainer is required for method " + method);
        auto net = load_masknet(explainer_path);
        if (method == "raw") {
          ex = std::make_unique<RawExplainer>(std::move(net), evaluator, ctx.cfg.ppr);
        } else {
          ex = std::make_unique<ParameterizedMaskExplainer>(std::move(net), evaluator);
        }
      }
      const auto queries = query_text.empty() ? split_queries(ctx, split_name)
                                              : std::vector<Query>{parse_query(ctx, query_text)};
      const auto full = SubgraphView::full(*ctx.graph);
      std::vector<Explanation> out;
      for (const auto& q : queries) out.push_back(ex->explain(without_query_edge(full, q), q, budget));
      write_explanations(ctx.run_dir / "explanations.jsonl", out, *ctx.graph);
      std::cout << out.size() << " explanation(s) written to " << (ctx.run_dir / "explanations.jsonl").string()
                << "\n";
    } else if (evaluate->parsed()) {
      auto ctx = open_run(common, "evaluate", args);
      const auto model = load_model(model_path);
      check_model_fits(model, *ctx.graph);
      const auto known = ctx.data.known();
      RankingMetrics m;
      if (explanations_path.empty()) {
        const auto queries = split_queries(ctx, split_name);
        const auto full = SubgraphView::full(*ctx.graph);
        m = evaluate_model(model, [&](std::size_t, const Query& q) { return without_query_edge(full, q); }, queries,
                           known);
      } else {
        const auto explanations = read_explanations(explanations_path, *ctx.graph);
        std::vector<Query> queries;
        std::vector<SubgraphView> views;
        for (const auto& e : explanations) {
          if (e.query.answer == kNoEntity) throw ContractError("explanation record has no answer to score");
          queries.push_back(e.query);
          views.push_back(e.view(*ctx.graph));
        }
        m = evaluate_model(model, views, queries, known);
      }
      write_json(ctx.run_dir / "metrics.json", metrics_to_json(m));
      std::cout << metrics_to_json(m).dump() << "\n";
    } else if (sweep_drop->parsed() || sweep_ego->parsed()) {
      const bool drop = sweep_drop->parsed();
      auto ctx = open_run(common, drop ? "sweep-drop" : "sweep-ego", args);
      std::vector<ModelHandle> storage;
      const auto models = named_models(model_specs, storage);
      for (const auto& m : storage) check_model_fits(m, *ctx.graph);
      const auto queries = limit(split_queries(ctx, split_name), ctx.cfg.sweep.max_queries);
      const auto known = ctx.data.known();
      SweepReport rep;
      if (drop) {
        const auto probs = probs_text.empty() ? ctx.cfg.sweep.drop_probs : parse_list<double>(probs_text);
        rep = edge_drop_sweep(models, *ctx.graph, known, queries, probs, derive_seed(ctx.cfg.seed, {14}));
      } else {
        const auto radii = radii_text.empty() ? ctx.cfg.sweep.radii : parse_list<int>(radii_text);
        rep = ego_radius_sweep(models, *ctx.graph, known, queries, radii);
      }
      const auto name = drop ? "sweep_drop.csv" : "sweep_ego.csv";
      write_text(ctx.run_dir / name, rep.to_csv());
      std::cout << rep.to_csv();
    } else if (protocol->parsed()) {
      auto ctx = open_run(common, "protocol", args, true, [&](RunConfig& cfg) {
        if (!budgets_text.empty()) cfg.protocol.budgets = parse_list<int>(budgets_text);
      });
      const auto backbone = backbone_path.empty() ? train_backbone_model(ctx) : load_model(backbone_path);
      const auto evaluator = evaluator_path.empty() ? train_evaluator_model(ctx) : load_model(evaluator_path);
      check_model_fits(backbone, *ctx.graph);
      check_model_fits(evaluator, *ctx.graph);
      ctx.cfg.explainer.mask.embed_dim = evaluator.config.embed_dim;

      std::vector<std::unique_ptr<Explainer>> owned;
      for (const auto& name : ctx.cfg.protocol.explainers) {
        if (name == "raw") owned.push_back(std::make_unique<RawExplainer>(train_mask_net(ctx, evaluator, true), evaluator, ctx.cfg.ppr));
        if (name == "param_mask")
          owned.push_back(std::make_unique<ParameterizedMaskExplainer>(train_mask_net(ctx, evaluator, false), evaluator));
        if (name == "instance_mask") owned.push_back(std::make_unique<InstanceMaskExplainer>(evaluator, ctx.cfg.instance_mask));
        if (name == "full") owned.push_back(std::make_unique<FullGraphExplainer>());
        if (name == "empty") owned.push_back(std::make_unique<EmptyExplainer>());
      }
      std::vector<const Explainer*> explainers;
      for (const auto& e : owned) explainers.push_back(e.get());
      const auto valid = limit(split_queries(ctx, "valid"), ctx.cfg.protocol.max_valid_queries);
      const auto test = limit(split_queries(ctx, "test"), ctx.cfg.protocol.max_test_queries);
      ProtocolConfig pc;
      pc.fine_tune = ctx.cfg.protocol.fine_tune;
      const auto rep = run_protocol(backbone, explainers, *ctx.graph, ctx.data.known(), valid, test,
                                    ctx.cfg.protocol.budgets, pc);
      write_text(ctx.run_dir / "protocol.csv", rep.to_csv(true));
      write_text(ctx.run_dir / "metrics.csv", rep.to_csv(false));
      write_json(ctx.run_dir / "protocol.json", report_to_json(rep));
      std::cout << rep.to_csv(true);
    } else if (report->parsed()) {
      auto ctx = open_run(common, "report", args, false);
      const auto rep = report_from_json(read_json(fs::path(run_path) / "protocol.json"));
      write_text(ctx.run_dir / "report.csv", rep.to_csv(true));
      std::cout << rep.to_csv(true);
    }
  } catch (const Error& e) {
    std::cerr << "ERROR " << e.exit_code() << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ERROR 2: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ERROR 2: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
