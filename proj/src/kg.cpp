#include "kgxk/kg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include "kgxk/error.hpp"
#include "kgxk/rng.hpp"

namespace kgxk {

EntityId Vocab::add_entity(std::string_view name) {
  auto [it, inserted] = entity_index_.try_emplace(std::string(name), static_cast<EntityId>(entities_.size()));
  if (inserted) entities_.emplace_back(name);
  return it->second;
}

RelationId Vocab::add_relation(std::string_view name) {
  auto [it, inserted] =
      relation_index_.try_emplace(std::string(name), static_cast<RelationId>(relations_.size()));
  if (inserted) relations_.emplace_back(name);
  return it->second;
}

std::optional<EntityId> Vocab::entity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocab::relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
  std::uint64_t k = (std::uint64_t{t.head} << 32) ^ t.tail;
  return static_cast<std::size_t>(mix_seed(k ^ mix_seed(t.relation)));
}

namespace {

struct Fields {
  std::string_view head, relation, tail;
};

// Splits one line into exactly three tab-separated fields.
std::optional<Fields> split_line(std::string_view line) {
  auto first = line.find('\t');
  if (first == std::string_view::npos) return std::nullopt;
  auto second = line.find('\t', first + 1);
  if (second == std::string_view::npos) return std::nullopt;
  if (line.find('\t', second + 1) != std::string_view::npos) return std::nullopt;
  Fields f{line.substr(0, first), line.substr(first + 1, second - first - 1), line.substr(second + 1)};
  if (f.head.empty() || f.relation.empty() || f.tail.empty()) return std::nullopt;
  return f;
}

template <typename OnFields>
void for_each_line(const std::filesystem::path& path, OnFields&& on_fields) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open triple file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_line(line);
    if (!fields) throw ParseError(path.string(), line_no, "expected head<TAB>relation<TAB>tail");
    on_fields(*fields);
  }
}

}  // namespace

LoadedTriples load_triples(const std::filesystem::path& path, const Vocab* fixed) {
  LoadedTriples out;
  if (fixed) out.vocab = *fixed;
  for_each_line(path, [&](const Fields& f) {
    Triple t;
    if (fixed) {
      auto h = out.vocab.entity(f.head);
      if (!h) throw VocabError(std::string(f.head));
      auto r = out.vocab.relation(f.relation);
      if (!r) throw VocabError(std::string(f.relation));
      auto o = out.vocab.entity(f.tail);
      if (!o) throw VocabError(std::string(f.tail));
      t = {*h, *r, *o};
    } else {
      t.head = out.vocab.add_entity(f.head);
      t.relation = out.vocab.add_relation(f.relation);
      t.tail = out.vocab.add_entity(f.tail);
    }
    out.triples.push_back(t);
  });
  return out;
}

void scan_vocab(const std::filesystem::path& path, Vocab& vocab) {
  for_each_line(path, [&](const Fields& f) {
    vocab.add_entity(f.head);
    vocab.add_relation(f.relation);
    vocab.add_entity(f.tail);
  });
}

KnowledgeGraph KnowledgeGraph::build(std::span<const Triple> triples, const Vocab& vocab, bool add_inverse,
                                     BuildStats* stats) {
  KnowledgeGraph g;
  g.vocab_ = vocab;
  g.num_entities_ = vocab.num_entities();
  g.num_base_relations_ = vocab.num_relations();
  g.has_inverse_ = add_inverse;
  g.stats_.input_triples = triples.size();

  for (const auto& t : triples) {
    if (t.head >= g.num_entities_ || t.tail >= g.num_entities_ || t.relation >= g.num_base_relations_)
      throw BoundsError("triple id out of vocabulary bounds");
    if (g.lookup_.contains(t)) {
      ++g.stats_.duplicates_removed;
      continue;
    }
    g.lookup_.emplace(t, static_cast<EdgeId>(g.edges_.size()));
    g.edges_.push_back(t);
    if (add_inverse) {
      Triple inv{t.tail, static_cast<RelationId>(t.relation + g.num_base_relations_), t.head};
      g.lookup_.emplace(inv, static_cast<EdgeId>(g.edges_.size()));
      g.edges_.push_back(inv);
    }
  }

  auto build_csr = [&](bool by_source, std::vector<std::size_t>& offsets, std::vector<EdgeId>& index) {
    offsets.assign(g.num_entities_ + 1, 0);
    for (const auto& e : g.edges_) ++offsets[(by_source ? e.head : e.tail) + 1];
    for (std::size_t v = 0; v < g.num_entities_; ++v) offsets[v + 1] += offsets[v];
    index.resize(g.edges_.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (EdgeId e = 0; e < g.edges_.size(); ++e) {
      const auto& t = g.edges_[e];
      index[cursor[by_source ? t.head : t.tail]++] = e;
    }
  };
  build_csr(true, g.out_offsets_, g.out_index_);
  build_csr(false, g.in_offsets_, g.in_index_);

  if (stats) *stats = g.stats_;
  return g;
}

std::span<const EdgeId> KnowledgeGraph::out_edges(EntityId v) const {
  if (v >= num_entities_) throw BoundsError("entity id " + std::to_string(v) + " out of range");
  return std::span<const EdgeId>(out_index_).subspan(out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]);
}

std::span<const EdgeId> KnowledgeGraph::in_edges(EntityId v) const {
  if (v >= num_entities_) throw BoundsError("entity id " + std::to_string(v) + " out of range");
  return std::span<const EdgeId>(in_index_).subspan(in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]);
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
  if (!has_inverse_) throw ContractError("graph has no inverse relations");
  auto n = static_cast<RelationId>(num_base_relations_);
  return r < n ? r + n : r - n;
}

std::optional<EdgeId> KnowledgeGraph::find_edge(const Triple& t) const {
  auto it = lookup_.find(t);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::string KnowledgeGraph::relation_label(RelationId r) const {
  if (r < num_base_relations_) return vocab_.relation_name(r);
  return vocab_.relation_name(static_cast<RelationId>(r - num_base_relations_)) + "^-1";
}

// ---------------------------------------------------------------------------

SubgraphView::SubgraphView(const KnowledgeGraph* g, std::vector<bool> kept)
    : graph_(g), kept_(std::move(kept)), count_(static_cast<std::size_t>(std::count(kept_.begin(), kept_.end(), true))) {}

SubgraphView SubgraphView::full(const KnowledgeGraph& g) { return {&g, std::vector<bool>(g.num_edges(), true)}; }

SubgraphView SubgraphView::empty(const KnowledgeGraph& g) { return {&g, std::vector<bool>(g.num_edges(), false)}; }

SubgraphView SubgraphView::from_edges(const KnowledgeGraph& g, std::span<const EdgeId> edges) {
  std::vector<bool> kept(g.num_edges(), false);
  for (EdgeId e : edges) {
    if (e >= g.num_edges()) throw BoundsError("edge id " + std::to_string(e) + " out of range");
    kept[e] = true;
  }
  return {&g, std::move(kept)};
}

std::vector<EdgeId> SubgraphView::edge_ids() const {
  std::vector<EdgeId> ids;
  ids.reserve(count_);
  for (EdgeId e = 0; e < kept_.size(); ++e)
    if (kept_[e]) ids.push_back(e);
  return ids;
}

SubgraphView SubgraphView::without(std::span<const EdgeId> edges) const {
  auto kept = kept_;
  for (EdgeId e : edges) kept.at(e) = false;
  return {graph_, std::move(kept)};
}

SubgraphView SubgraphView::intersect(const SubgraphView& other) const {
  if (graph_ != other.graph_) throw ContractError("views over different graphs");
  auto kept = kept_;
  for (std::size_t e = 0; e < kept.size(); ++e) kept[e] = kept[e] && other.kept_[e];
  return {graph_, std::move(kept)};
}

bool SubgraphView::is_subset_of(const SubgraphView& other) const {
  if (graph_ != other.graph_) return false;
  for (std::size_t e = 0; e < kept_.size(); ++e)
    if (kept_[e] && !other.kept_[e]) return false;
  return true;
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> hop_distances(const SubgraphView& view, std::span<const EntityId> seeds) {
  const auto& g = view.graph();
  std::vector<std::uint32_t> dist(g.num_entities(), kUnreachable);
  std::deque<EntityId> frontier;
  for (EntityId s : seeds) {
    if (s >= g.num_entities()) throw BoundsError("seed entity " + std::to_string(s) + " out of range");
    if (dist[s] != 0) {
      dist[s] = 0;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    EntityId v = frontier.front();
    frontier.pop_front();
    auto relax = [&](EntityId u) {
      if (dist[u] == kUnreachable) {
        dist[u] = dist[v] + 1;
        frontier.push_back(u);
      }
    };
    for (EdgeId e : g.out_edges(v))
      if (view.contains(e)) relax(g.edge(e).tail);
    for (EdgeId e : g.in_edges(v))
      if (view.contains(e)) relax(g.edge(e).head);
  }
  return dist;
}

SubgraphView ego_network(const SubgraphView& view, std::span<const EntityId> seeds, int radius) {
  if (radius < 0) throw ContractError("ego radius must be non-negative");
  if (seeds.empty()) throw ContractError("ego network needs at least one seed");
  auto dist = hop_distances(view, seeds);
  const auto& g = view.graph();
  const auto r = static_cast<std::uint32_t>(radius);
  std::vector<EdgeId> kept;
  for (EdgeId e : view.edge_ids()) {
    const auto& t = g.edge(e);
    if (dist[t.head] <= r && dist[t.tail] <= r) kept.push_back(e);
  }
  return SubgraphView::from_edges(g, kept);
}

SubgraphView ego_network(const KnowledgeGraph& g, std::span<const EntityId> seeds, int radius) {
  return ego_network(SubgraphView::full(g), seeds, radius);
}

// ---------------------------------------------------------------------------

DropSchedule DropSchedule::uniform(double p) {
  DropSchedule s;
  s.kind = Kind::kUniform;
  s.p = p;
  s.validate();
  return s;
}

DropSchedule DropSchedule::distance_decay(double p_max, double gamma) {
  DropSchedule s;
  s.kind = Kind::kDistanceDecay;
  s.p_max = p_max;
  s.gamma = gamma;
  s.validate();
  return s;
}

void DropSchedule::validate() const {
  auto in_unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  if (kind == Kind::kUniform) {
    if (!in_unit(p)) throw ConfigError("uniform drop probability must lie in [0, 1]");
  } else {
    if (!in_unit(p_max)) throw ConfigError("p_max must lie in [0, 1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  }
}

double DropSchedule::drop_probability(std::uint32_t distance) const {
  if (kind == Kind::kUniform) return p;
  if (distance == kUnreachable) return p_max;
  return p_max * (1.0 - std::pow(gamma, static_cast<double>(distance)));
}

namespace {

// One uniform draw per base triple in edge order; the inverse shares it.
template <typename DropProb>
SubgraphView paired_drop(const SubgraphView& view, std::uint64_t seed, DropProb&& drop_prob) {
  const auto& g = view.graph();
  Rng rng = make_rng(seed, {0xd209});
  std::vector<EdgeId> kept;
  kept.reserve(view.size());
  const EdgeId stride = g.has_inverse() ? 2 : 1;
  for (EdgeId e = 0; e < g.num_edges(); e += stride) {
    double u = uniform01(rng);
    double p = drop_prob(e);
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("drop probability out of [0, 1]: " + std::to_string(p));
    if (u < p) continue;
    if (view.contains(e)) kept.push_back(e);
    if (stride == 2 && view.contains(e + 1)) kept.push_back(e + 1);
  }
  return SubgraphView::from_edges(g, kept);
}

}  // namespace

SubgraphView drop_edges_uniform(const SubgraphView& view, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("drop probability must lie in [0, 1]");
  return paired_drop(view, seed, [p](EdgeId) { return p; });
}

SubgraphView drop_edges_uniform(const KnowledgeGraph& g, double p, std::uint64_t seed) {
  return drop_edges_uniform(SubgraphView::full(g), p, seed);
}

SubgraphView drop_edges_distance(const SubgraphView& view, EntityId anchor, const DropSchedule& schedule,
                                 std::uint64_t seed) {
  const auto& g = view.graph();
  if (anchor >= g.num_entities()) throw BoundsError("anchor entity out of range");
  const EntityId seeds[] = {anchor};
  auto dist = hop_distances(view, seeds);
  return paired_drop(view, seed, [&](EdgeId e) {
    const auto& t = g.edge(e);
    return schedule.drop_probability(std::min(dist[t.head], dist[t.tail]));
  });
}

SubgraphView drop_edges_distance(const KnowledgeGraph& g, EntityId anchor, const DropSchedule& schedule,
                                 std::uint64_t seed) {
  return drop_edges_distance(SubgraphView::full(g), anchor, schedule, seed);
}

// ---------------------------------------------------------------------------

std::vector<Query> make_queries(std::span<const Triple> triples, std::size_t num_base_relations) {
  std::vector<Query> out;
  out.reserve(2 * triples.size());
  for (const auto& t : triples) {
    out.push_back({t.head, t.relation, t.tail});
    out.push_back({t.tail, static_cast<RelationId>(t.relation + num_base_relations), t.head});
  }
  return out;
}

void KnownTriples::add(std::span<const Triple> base_triples) {
  const auto n = static_cast<RelationId>(num_base_relations_);
  for (const auto& t : base_triples) {
    auto& fwd = by_query_[key(t.head, t.relation)];
    if (std::find(fwd.begin(), fwd.end(), t.tail) == fwd.end()) fwd.push_back(t.tail);
    auto& bwd = by_query_[key(t.tail, t.relation + n)];
    if (std::find(bwd.begin(), bwd.end(), t.head) == bwd.end()) bwd.push_back(t.head);
  }
}

bool KnownTriples::contains(const Triple& t) const {
  auto tl = tails(t.head, t.relation);
  return std::find(tl.begin(), tl.end(), t.tail) != tl.end();
}

std::span<const EntityId> KnownTriples::tails(EntityId head, RelationId relation) const {
  auto it = by_query_.find(key(head, relation));
  if (it == by_query_.end()) return {};
  return it->second;
}

CandidateMask filtered_candidates(const Query& q, const KnownTriples& known, std::size_t num_entities) {
  CandidateMask mask(num_entities, true);
  for (EntityId t : known.tails(q.head, q.relation))
    if (t != q.answer && t < num_entities) mask[t] = false;
  if (q.answer < num_entities) mask[q.answer] = true;
  return mask;
}

KnownTriples Dataset::known() const {
  KnownTriples k(vocab.num_relations());
  k.add(train);
  k.add(valid);
  k.add(test);
  return k;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto train = dir / "train.txt", valid = dir / "valid.txt", test = dir / "test.txt";
  Dataset ds;
  scan_vocab(train, ds.vocab);
  scan_vocab(valid, ds.vocab);
  scan_vocab(test, ds.vocab);
  ds.train = load_triples(train, &ds.vocab).triples;
  ds.valid = load_triples(valid, &ds.vocab).triples;
  ds.test = load_triples(test, &ds.vocab).triples;
  return ds;
}

void save_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Vocab& vocab) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& t : triples)
    out << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.relation) << '\t'
        << vocab.entity_name(t.tail) << '\n';
}

}  // namespace kgxk
