#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgxk {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr EntityId kNoEntity = std::numeric_limits<EntityId>::max();

// Entity and base-relation names with dense ids in order of first appearance.
class Vocab {
 public:
  EntityId add_entity(std::string_view name);
  RelationId add_relation(std::string_view name);

  std::optional<EntityId> entity(std::string_view name) const;
  std::optional<RelationId> relation(std::string_view name) const;

  const std::string& entity_name(EntityId id) const { return entities_.at(id); }
  const std::string& relation_name(RelationId id) const { return relations_.at(id); }

  std::size_t num_entities() const noexcept { return entities_.size(); }
  std::size_t num_relations() const noexcept { return relations_.size(); }

  const std::vector<std::string>& entity_names() const noexcept { return entities_; }
  const std::vector<std::string>& relation_names() const noexcept { return relations_; }

 private:
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept;
};

// Parses `head<TAB>relation<TAB>tail` lines. With `fixed` set every name must
// already be present; otherwise a fresh vocabulary is grown from the file.
struct LoadedTriples {
  std::vector<Triple> triples;
  Vocab vocab;
};
LoadedTriples load_triples(const std::filesystem::path& path, const Vocab* fixed = nullptr);

// Grows `vocab` with every name in the files, in file order.
void scan_vocab(const std::filesystem::path& path, Vocab& vocab);

struct BuildStats {
  std::size_t input_triples = 0;
  std::size_t duplicates_removed = 0;
};

// Immutable multigraph over id-resolved triples. With inverse augmentation the
// inverse of base relation r is r + |R_base|, and edge 2i+1 is the inverse of
// edge 2i.
class KnowledgeGraph {
 public:
  static KnowledgeGraph build(std::span<const Triple> triples, const Vocab& vocab,
                              bool add_inverse = true, BuildStats* stats = nullptr);

  const Vocab& vocab() const noexcept { return vocab_; }
  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_base_relations() const noexcept { return num_base_relations_; }
  std::size_t num_relations() const noexcept {
    return has_inverse_ ? 2 * num_base_relations_ : num_base_relations_;
  }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool has_inverse() const noexcept { return has_inverse_; }
  const BuildStats& stats() const noexcept { return stats_; }

  const Triple& edge(EdgeId e) const { return edges_[e]; }
  std::span<const Triple> edges() const noexcept { return edges_; }
  std::span<const EdgeId> out_edges(EntityId v) const;
  std::span<const EdgeId> in_edges(EntityId v) const;

  // The inverse partner of `e`, or `e` itself without augmentation.
  EdgeId paired_edge(EdgeId e) const noexcept { return has_inverse_ ? (e ^ 1U) : e; }
  RelationId inverse(RelationId r) const;
  std::optional<EdgeId> find_edge(const Triple& t) const;

  std::string relation_label(RelationId r) const;

 private:
  Vocab vocab_;
  std::size_t num_entities_ = 0;
  std::size_t num_base_relations_ = 0;
  bool has_inverse_ = false;
  BuildStats stats_;
  std::vector<Triple> edges_;
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<EdgeId> out_index_, in_index_;
  std::unordered_map<Triple, EdgeId, TripleHash> lookup_;
};

// A subset of a graph's edges. Holds a non-owning pointer: the graph must
// outlive every view built on it.
class SubgraphView {
 public:
  SubgraphView() = default;
  static SubgraphView full(const KnowledgeGraph& g);
  static SubgraphView empty(const KnowledgeGraph& g);
  static SubgraphView from_edges(const KnowledgeGraph& g, std::span<const EdgeId> edges);

  const KnowledgeGraph& graph() const { return *graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  bool contains(EdgeId e) const { return kept_[e]; }
  std::size_t size() const noexcept { return count_; }

  // Kept edge ids in ascending order.
  std::vector<EdgeId> edge_ids() const;

  SubgraphView without(std::span<const EdgeId> edges) const;
  SubgraphView intersect(const SubgraphView& other) const;
  bool is_subset_of(const SubgraphView& other) const;

  friend bool operator==(const SubgraphView& a, const SubgraphView& b) {
    return a.graph_ == b.graph_ && a.kept_ == b.kept_;
  }

 private:
  SubgraphView(const KnowledgeGraph* g, std::vector<bool> kept);

  const KnowledgeGraph* graph_ = nullptr;
  std::vector<bool> kept_;
  std::size_t count_ = 0;
};

// Undirected hop distances from the seeds over the kept edges; unreachable
// entities get kUnreachable.
inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();
std::vector<std::uint32_t> hop_distances(const SubgraphView& view, std::span<const EntityId> seeds);

// Edges whose endpoints both lie within `radius` hops of some seed.
SubgraphView ego_network(const SubgraphView& view, std::span<const EntityId> seeds, int radius);
SubgraphView ego_network(const KnowledgeGraph& g, std::span<const EntityId> seeds, int radius);

// Edge-drop probability as a function of hop distance.
struct DropSchedule {
  enum class Kind { kUniform, kDistanceDecay };
  Kind kind = Kind::kUniform;
  double p = 0.0;          // uniform drop probability
  double p_max = 0.95;     // decay: drop probability far from the anchor
  double gamma = 0.7;      // decay: p_drop(d) = p_max * (1 - gamma^d)
  bool resample_per_epoch = true;

  static DropSchedule uniform(double p);
  static DropSchedule distance_decay(double p_max = 0.95, double gamma = 0.7);

  // Throws ConfigError when out of range.
  void validate() const;
  double drop_probability(std::uint32_t distance) const;
};

// Drops each base triple (and its inverse with it) with probability p.
SubgraphView drop_edges_uniform(const SubgraphView& view, double p, std::uint64_t seed);
SubgraphView drop_edges_uniform(const KnowledgeGraph& g, double p, std::uint64_t seed);

// Drops each base triple with probability schedule(d), where d is the
// smaller endpoint hop distance from `anchor` within `view`.
SubgraphView drop_edges_distance(const SubgraphView& view, EntityId anchor,
                                 const DropSchedule& schedule, std::uint64_t seed);
SubgraphView drop_edges_distance(const KnowledgeGraph& g, EntityId anchor,
                                 const DropSchedule& schedule, std::uint64_t seed);

struct Query {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId answer = kNoEntity;

  friend bool operator==(const Query&, const Query&) = default;
};

// Tail query (h, r) -> t then head query (t, inv(r)) -> h for each triple.
std::vector<Query> make_queries(std::span<const Triple> triples, std::size_t num_base_relations);

// Every known fact in both directions, indexed by (head, relation).
class KnownTriples {
 public:
  KnownTriples(std::size_t num_base_relations) : num_base_relations_(num_base_relations) {}
  void add(std::span<const Triple> base_triples);
  bool contains(const Triple& t) const;
  std::span<const EntityId> tails(EntityId head, RelationId relation) const;

 private:
  static std::uint64_t key(EntityId h, RelationId r) { return (std::uint64_t{h} << 32) | r; }
  std::size_t num_base_relations_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_query_;
};

// Per-entity flag: true when the entity is ranked against the answer.
using CandidateMask = std::vector<bool>;
CandidateMask filtered_candidates(const Query& q, const KnownTriples& known, std::size_t num_entities);

struct Dataset {
  Vocab vocab;
  std::vector<Triple> train, valid, test;

  // Union of all splits, used for filtered ranking.
  KnownTriples known() const;
};

// Reads train.txt, valid.txt and test.txt. The vocabulary is the union over
// all three files in order of first appearance; each split then resolves
// against it.
Dataset load_dataset(const std::filesystem::path& dir);
void save_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Vocab& vocab);

}  // namespace kgxk
