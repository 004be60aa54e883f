#include "kgxk/io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "kgxk/error.hpp"

namespace kgxk {

namespace {

constexpr int kFormatVersion = 1;

Json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

void matrix_from_json(const Json& j, Matrix& m, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ContractError("checkpoint tensor '" + name + "' has the wrong shape");
  std::copy(data.begin(), data.end(), m.data());
}

void check_format(const Json& j, const std::string& format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw ContractError("not a " + format + " document");
  if (j.value("version", 0) != kFormatVersion)
    throw ContractError(format + " version " + std::to_string(j.value("version", 0)) + " is not supported");
}

template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ContractError("malformed " + what + ": " + e.what());
  }
}

}  // namespace

Json model_to_json(const ModelHandle& model) {
  const auto& c = model.config;
  Json params = Json::object();
  model.params.for_each([&](const std::string& name, const Matrix& m) { params[name] = matrix_to_json(m); });
  return {{"format", "kgxk-model"},
          {"version", kFormatVersion},
          {"role", std::string(to_string(model.role))},
          {"num_relations", model.num_relations},
          {"config",
           {{"embed_dim", c.embed_dim},
            {"num_layers", c.num_layers},
            {"aggregation", std::string(to_string(c.aggregation))},
            {"message", std::string(to_string(c.message))},
            {"epochs", c.train.epochs},
            {"learning_rate", c.train.learning_rate},
            {"negatives", c.train.negatives},
            {"batch_size", c.train.batch_size},
            {"seed", c.train.seed}}},
          {"params", params},
          {"loss_history", model.loss_history}};
}

ModelHandle model_from_json(const Json& j) {
  check_format(j, "kgxk-model");
  return guarded("model checkpoint", [&] {
    ModelHandle m;
    const auto& c = j.at("config");
    m.config.embed_dim = c.at("embed_dim").get<int>();
    m.config.num_layers = c.at("num_layers").get<int>();
    m.config.aggregation = parse_aggregation(c.at("aggregation").get<std::string>());
    m.config.message = parse_message(c.at("message").get<std::string>());
    m.config.train.epochs = c.at("epochs").get<int>();
    m.config.train.learning_rate = c.at("learning_rate").get<double>();
    m.config.train.negatives = c.at("negatives").get<int>();
    m.config.train.batch_size = c.at("batch_size").get<int>();
    m.config.train.seed = c.at("seed").get<std::uint64_t>();
    m.config.validate();
    m.role = parse_role(j.at("role").get<std::string>());
    m.num_relations = j.at("num_relations").get<std::size_t>();

    const auto d = static_cast<Eigen::Index>(m.config.embed_dim);
    const auto r = static_cast<Eigen::Index>(m.num_relations);
    auto& p = m.params;
    p.query = Matrix::Zero(r, d);
    for (int l = 0; l < m.config.num_layers; ++l) {
      p.relation.push_back(Matrix::Zero(r, d));
      p.self_weight.push_back(Matrix::Zero(d, d));
      p.agg_weight.push_back(Matrix::Zero(d, d));
      p.bias.push_back(Matrix::Zero(1, d));
    }
    p.decoder = Matrix::Zero(1, d);
    p.decoder_bias = Matrix::Zero(1, 1);
    const auto& params = j.at("params");
    std::size_t seen = 0;
    p.for_each([&](const std::string& name, Matrix& mat) {
      if (!params.contains(name)) throw ContractError("checkpoint is missing tensor '" + name + "'");
      matrix_from_json(params.at(name), mat, name);
      ++seen;
    });
    if (seen != params.size()) throw ContractError("checkpoint has unexpected tensors");
    m.loss_history = j.value("loss_history", std::vector<double>{});
    return m;
  });
}

void save_model(const std::filesystem::path& path, const ModelHandle& model) { write_json(path, model_to_json(model)); }
ModelHandle load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

Json masknet_to_json(const MaskNet& net) {
  Json params = Json::object();
  net.for_each([&](const std::string& name, const Matrix& m) { params[name] = matrix_to_json(m); });
  return {{"format", "kgxk-masknet"},
          {"version", kFormatVersion},
          {"config",
           {{"embed_dim", net.config.embed_dim},
            {"hidden", net.config.hidden},
            {"temperature_start", net.config.temperature_start},
            {"temperature_end", net.config.temperature_end}}},
          {"params", params},
          {"loss_history", net.loss_history}};
}

MaskNet masknet_from_json(const Json& j) {
  check_format(j, "kgxk-masknet");
  return guarded("mask network", [&] {
    MaskNetConfig c;
    const auto& jc = j.at("config");
    c.embed_dim = jc.at("embed_dim").get<int>();
    c.hidden = jc.at("hidden").get<std::vector<int>>();
    c.temperature_start = jc.at("temperature_start").get<double>();
    c.temperature_end = jc.at("temperature_end").get<double>();
    MaskNet net = MaskNet::init(c, 0);
    const auto& params = j.at("params");
    std::size_t seen = 0;
    net.for_each([&](const std::string& name, Matrix& mat) {
      if (!params.contains(name)) throw ContractError("mask network is missing tensor '" + name + "'");
      matrix_from_json(params.at(name), mat, name);
      ++seen;
    });
    if (seen != params.size()) throw ContractError("mask network has unexpected tensors");
    net.loss_history = j.value("loss_history", std::vector<double>{});
    return net;
  });
}

void save_masknet(const std::filesystem::path& path, const MaskNet& net) { write_json(path, masknet_to_json(net)); }
MaskNet load_masknet(const std::filesystem::path& path) { return masknet_from_json(read_json(path)); }

Json explanation_to_json(const Explanation& e, const KnowledgeGraph& g) {
  const auto& v = g.vocab();
  Json query = {{"head", v.entity_name(e.query.head)}, {"relation", g.relation_label(e.query.relation)}};
  query["tail"] = e.query.answer == kNoEntity ? Json(nullptr) : Json(v.entity_name(e.query.answer));
  Json edges = Json::array();
  for (std::size_t i = 0; i < e.edges.size(); ++i) {
    const auto& t = g.edge(e.edges[i]);
    edges.push_back({{"head", v.entity_name(t.head)},
                     {"relation", g.relation_label(t.relation)},
                     {"tail", v.entity_name(t.tail)},
                     {"omega", i < e.omega.size() ? e.omega[i] : 1.0},
                     {"rank", i + 1}});
  }
  return {{"query", query}, {"budget", e.budget}, {"edges", edges}, {"converged", e.converged}};
}

Explanation explanation_from_json(const Json& j, const KnowledgeGraph& g) {
  return guarded("explanation record", [&] {
    std::unordered_map<std::string, RelationId> labels;
    for (RelationId r = 0; r < g.num_relations(); ++r) labels.emplace(g.relation_label(r), r);
    auto entity = [&](const Json& name) {
      const auto s = name.get<std::string>();
      auto id = g.vocab().entity(s);
      if (!id) throw VocabError(s);
      return *id;
    };
    auto relation = [&](const Json& name) {
      const auto s = name.get<std::string>();
      auto it = labels.find(s);
      if (it == labels.end()) throw VocabError(s);
      return it->second;
    };
    Explanation e;
    const auto& q = j.at("query");
    e.query.head = entity(q.at("head"));
    e.query.relation = relation(q.at("relation"));
    e.query.answer = q.at("tail").is_null() ? kNoEntity : entity(q.at("tail"));
    e.budget = j.at("budget").get<int>();
    e.converged = j.at("converged").get<bool>();
    for (const auto& edge : j.at("edges")) {
      const Triple t{entity(edge.at("head")), relation(edge.at("relation")), entity(edge.at("tail"))};
      auto id = g.find_edge(t);
      if (!id) throw ContractError("explanation edge is not in the graph");
      e.edges.push_back(*id);
      e.omega.push_back(edge.at("omega").get<double>());
    }
    e.head_isolated = e.edges.empty();
    e.components = count_components(g, e.edges);
    return e;
  });
}

void write_explanations(const std::filesystem::path& path, std::span<const Explanation> explanations,
                        const KnowledgeGraph& g) {
  std::ostringstream out;
  for (const auto& e : explanations) out << explanation_to_json(e, g).dump() << '\n';
  write_text(path, out.str());
}

std::vector<Explanation> read_explanations(const std::filesystem::path& path, const KnowledgeGraph& g) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path.string());
  std::vector<Explanation> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(explanation_from_json(Json::parse(line), g));
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), n, e.what());
    }
  }
  return out;
}

Json metrics_to_json(const RankingMetrics& m) {
  return {{"mrr", m.mrr},
          {"hits1", m.hits_at.at(1)},
          {"hits3", m.hits_at.at(3)},
          {"hits10", m.hits_at.at(10)},
          {"n_queries", m.n_queries}};
}

Json report_to_json(const ProtocolReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row = metrics_to_json(r.metrics);
    row["explainer"] = r.explainer;
    row["budget"] = r.budget > 0 ? Json(r.budget) : Json("inf");
    row["seconds"] = r.seconds;
    row["components"] = r.components;
    rows.push_back(row);
  }
  return {{"format", "kgxk-protocol"}, {"version", kFormatVersion}, {"budgets", report.budgets}, {"rows", rows}};
}

ProtocolReport report_from_json(const Json& j) {
  check_format(j, "kgxk-protocol");
  return guarded("protocol report", [&] {
    ProtocolReport report;
    report.budgets = j.at("budgets").get<std::vector<int>>();
    for (const auto& row : j.at("rows")) {
      ProtocolRow r;
      r.explainer = row.at("explainer").get<std::string>();
      r.budget = row.at("budget").is_string() ? 0 : row.at("budget").get<int>();
      r.metrics.mrr = row.at("mrr").get<double>();
      r.metrics.hits_at = {{1, row.at("hits1").get<double>()},
                           {3, row.at("hits3").get<double>()},
                           {10, row.at("hits10").get<double>()}};
      r.metrics.n_queries = row.at("n_queries").get<std::size_t>();
      r.seconds = row.at("seconds").get<double>();
      r.components = row.at("components").get<double>();
      report.rows.push_back(std::move(r));
    }
    return report;
  });
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write " + path.string());
  out << text;
  if (!out) throw ContractError("failed writing " + path.string());
}

}  // namespace kgxk
