#include "kgxk/config.hpp"

#include <fstream>
#include <set>

#include "kgxk/error.hpp"
#include "kgxk/rng.hpp"

namespace kgxk {

namespace {

using Json = nlohmann::json;

// Reads known keys from one JSON object and rejects the rest.
class Block {
 public:
  Block(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config block '" + path_ + "' must be an object");
  }
  ~Block() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items())
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  template <typename Fn>
  void read_enum(const std::string& key, Fn&& parse) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    read(key, s);
    parse(s);
  }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_train(Block& b, TrainConfig& t) {
  b.read("epochs", t.epochs);
  b.read("learning_rate", t.learning_rate);
  b.read("negatives", t.negatives);
  b.read("batch_size", t.batch_size);
}

Json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs}, {"learning_rate", t.learning_rate}, {"negatives", t.negatives},
          {"batch_size", t.batch_size}};
}

}  // namespace

void RunConfig::validate() const {
  backbone.validate();
  evaluator.schedule.validate();
  BackboneConfig probe = backbone;
  probe.train = evaluator.train;
  probe.validate();
  probe.train = protocol.fine_tune;
  probe.validate();
  explainer.mask.validate();
  explainer.train.validate();
  instance_mask.validate();
  ppr.validate();
  if (protocol.budgets.empty()) throw ConfigError("protocol.budgets must not be empty");
  for (int k : protocol.budgets)
    if (k < 1) throw ConfigError("protocol.budgets must be >= 1");
  static const std::set<std::string> known = {"raw", "instance_mask", "param_mask", "full", "empty"};
  for (const auto& e : protocol.explainers)
    if (!known.contains(e)) throw ConfigError("unknown explainer '" + e + "'");
  for (double p : sweep.drop_probs)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep.drop_probs must lie in [0, 1]");
  for (int r : sweep.radii)
    if (r < 0) throw ConfigError("sweep.radii must be >= 0");
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  Block top(j, "");
  top.read("data_dir", c.data_dir);
  top.read("seed", c.seed);
  top.read("out_dir", c.out_dir);
  top.read("run_id", c.run_id);
  if (const auto* bj = top.child("backbone")) {
    Block b(*bj, "backbone");
    b.read("embed_dim", c.backbone.embed_dim);
    b.read("num_layers", c.backbone.num_layers);
    b.read_enum("aggregation", [&](const std::string& s) { c.backbone.aggregation = parse_aggregation(s); });
    b.read_enum("message", [&](const std::string& s) { c.backbone.message = parse_message(s); });
    read_train(b, c.backbone.train);
  }
  if (const auto* ej = top.child("evaluator")) {
    Block b(*ej, "evaluator");
    b.read_enum("schedule", [&](const std::string& s) {
      if (s == "uniform") {
        c.evaluator.schedule.kind = DropSchedule::Kind::kUniform;
      } else if (s == "distance") {
        c.evaluator.schedule.kind = DropSchedule::Kind::kDistanceDecay;
      } else {
        throw ConfigError("unknown evaluator schedule '" + s + "'");
      }
    });
    b.read("p", c.evaluator.schedule.p);
    b.read("p_max", c.evaluator.schedule.p_max);
    b.read("gamma", c.evaluator.schedule.gamma);
    b.read("resample_per_epoch", c.evaluator.schedule.resample_per_epoch);
    read_train(b, c.evaluator.train);
  }
  if (const auto* xj = top.child("explainer")) {
    Block b(*xj, "explainer");
    b.read("hidden", c.explainer.mask.hidden);
    b.read("temperature_start", c.explainer.mask.temperature_start);
    b.read("temperature_end", c.explainer.mask.temperature_end);
    b.read("epochs", c.explainer.train.epochs);
    b.read("learning_rate", c.explainer.train.learning_rate);
    b.read("batch_size", c.explainer.train.batch_size);
    b.read("lambda_size", c.explainer.train.lambda_size);
    b.read("lambda_ent", c.explainer.train.lambda_ent);
    b.read("train_budget", c.explainer.train.train_budget);
    b.read("max_train_queries", c.explainer.max_train_queries);
  }
  if (const auto* ij = top.child("instance_mask")) {
    Block b(*ij, "instance_mask");
    b.read("steps", c.instance_mask.steps);
    b.read("learning_rate", c.instance_mask.learning_rate);
    b.read("lambda_size", c.instance_mask.lambda_size);
    b.read("lambda_ent", c.instance_mask.lambda_ent);
    b.read("init_scale", c.instance_mask.init_scale);
  }
  if (const auto* pj = top.child("ppr")) {
    Block b(*pj, "ppr");
    b.read("alpha", c.ppr.alpha);
    b.read("epsilon", c.ppr.epsilon);
    b.read("max_iter", c.ppr.max_iter);
    b.read("top_nodes", c.ppr.top_nodes);
    b.read("top_tails", c.ppr.top_tails);
    b.read_enum("collapse", [&](const std::string& s) { c.ppr.collapse = parse_collapse(s); });
    b.read("beta_in", c.ppr.beta_in);
    b.read("beta_out", c.ppr.beta_out);
  }
  if (const auto* pj = top.child("protocol")) {
    Block b(*pj, "protocol");
    b.read("budgets", c.protocol.budgets);
    b.read("explainers", c.protocol.explainers);
    b.read("max_valid_queries", c.protocol.max_valid_queries);
    b.read("max_test_queries", c.protocol.max_test_queries);
    if (const auto* fj = b.child("fine_tune")) {
      Block f(*fj, "protocol.fine_tune");
      read_train(f, c.protocol.fine_tune);
    }
  }
  if (const auto* sj = top.child("sweep")) {
    Block b(*sj, "sweep");
    b.read("drop_probs", c.sweep.drop_probs);
    b.read("radii", c.sweep.radii);
    b.read("max_queries", c.sweep.max_queries);
  }
  if (const auto* sj = top.child("synthetic")) {
    Block b(*sj, "synthetic");
    b.read("num_entities", c.synthetic.num_entities);
    b.read("num_rules", c.synthetic.num_rules);
    b.read("facts_per_rule", c.synthetic.facts_per_rule);
    b.read("noise_relations", c.synthetic.noise_relations);
    b.read("noise_edges", c.synthetic.noise_edges);
    b.read("distractors_per_rule", c.synthetic.distractors_per_rule);
    b.read("valid_fraction", c.synthetic.valid_fraction);
    b.read("test_fraction", c.synthetic.test_fraction);
  }
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  Json evaluator = train_json(c.evaluator.train);
  evaluator["schedule"] = c.evaluator.schedule.kind == DropSchedule::Kind::kUniform ? "uniform" : "distance";
  evaluator["p"] = c.evaluator.schedule.p;
  evaluator["p_max"] = c.evaluator.schedule.p_max;
  evaluator["gamma"] = c.evaluator.schedule.gamma;
  evaluator["resample_per_epoch"] = c.evaluator.schedule.resample_per_epoch;
  Json backbone = train_json(c.backbone.train);
  backbone["embed_dim"] = c.backbone.embed_dim;
  backbone["num_layers"] = c.backbone.num_layers;
  backbone["aggregation"] = std::string(to_string(c.backbone.aggregation));
  backbone["message"] = std::string(to_string(c.backbone.message));
  return {{"data_dir", c.data_dir},
          {"seed", c.seed},
          {"out_dir", c.out_dir},
          {"run_id", c.run_id},
          {"backbone", backbone},
          {"evaluator", evaluator},
          {"explainer",
           {{"hidden", c.explainer.mask.hidden},
            {"temperature_start", c.explainer.mask.temperature_start},
            {"temperature_end", c.explainer.mask.temperature_end},
            {"epochs", c.explainer.train.epochs},
            {"learning_rate", c.explainer.train.learning_rate},
            {"batch_size", c.explainer.train.batch_size},
            {"lambda_size", c.explainer.train.lambda_size},
            {"lambda_ent", c.explainer.train.lambda_ent},
            {"train_budget", c.explainer.train.train_budget},
            {"max_train_queries", c.explainer.max_train_queries}}},
          {"instance_mask",
           {{"steps", c.instance_mask.steps},
            {"learning_rate", c.instance_mask.learning_rate},
            {"lambda_size", c.instance_mask.lambda_size},
            {"lambda_ent", c.instance_mask.lambda_ent},
            {"init_scale", c.instance_mask.init_scale}}},
          {"ppr",
           {{"alpha", c.ppr.alpha},
            {"epsilon", c.ppr.epsilon},
            {"max_iter", c.ppr.max_iter},
            {"top_nodes", c.ppr.top_nodes},
            {"top_tails", c.ppr.top_tails},
            {"collapse", std::string(to_string(c.ppr.collapse))},
            {"beta_in", c.ppr.beta_in},
            {"beta_out", c.ppr.beta_out}}},
          {"protocol",
           {{"budgets", c.protocol.budgets},
            {"explainers", c.protocol.explainers},
            {"max_valid_queries", c.protocol.max_valid_queries},
            {"max_test_queries", c.protocol.max_test_queries},
            {"fine_tune", train_json(c.protocol.fine_tune)}}},
          {"sweep",
           {{"drop_probs", c.sweep.drop_probs},
            {"radii", c.sweep.radii},
            {"max_queries", c.sweep.max_queries}}},
          {"synthetic",
           {{"num_entities", c.synthetic.num_entities},
            {"num_rules", c.synthetic.num_rules},
            {"facts_per_rule", c.synthetic.facts_per_rule},
            {"noise_relations", c.synthetic.noise_relations},
            {"noise_edges", c.synthetic.noise_edges},
            {"distractors_per_rule", c.synthetic.distractors_per_rule},
            {"valid_fraction", c.synthetic.valid_fraction},
            {"test_fraction", c.synthetic.test_fraction}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void apply_seed(RunConfig& c) {
  c.backbone.train.seed = derive_seed(c.seed, {1});
  c.evaluator.train.seed = derive_seed(c.seed, {2});
  c.explainer.train.seed = derive_seed(c.seed, {3});
  c.instance_mask.seed = derive_seed(c.seed, {4});
  c.protocol.fine_tune.seed = derive_seed(c.seed, {5});
  c.synthetic.seed = derive_seed(c.seed, {6});
  c.explainer.mask.embed_dim = c.backbone.embed_dim;
}

}  // namespace kgxk
