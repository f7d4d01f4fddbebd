#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace relphormer {

// Node ids live in one contiguous space: entities take 0..|E|-1, relations
// |E|..|E|+|R|-1, then the two reserved sentinels MASK and GLOBAL.
struct Triple {
  int32_t head = -1;
  int32_t rel = -1;
  int32_t tail = -1;

  bool operator==(const Triple& o) const = default;
  bool contains(int32_t node) const { return head == node || rel == node || tail == node; }
};

enum class Slot { Head, Relation, Tail };

enum class Split { Train, Valid, Test };

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class KnowledgeGraph {
 public:
  // Files are UTF-8 TSV, one "head<TAB>relation<TAB>tail" per line. Vocabularies
  // are the union over all three splits, ids in first-appearance order.
  // valid_path / test_path may be empty strings (split stays empty).
  static KnowledgeGraph load(const std::string& train_path, const std::string& valid_path,
                             const std::string& test_path);

  int32_t num_entities() const { return static_cast<int32_t>(entity_labels_.size()); }
  int32_t num_relations() const { return static_cast<int32_t>(relation_labels_.size()); }
  int32_t node_count() const { return num_entities() + num_relations(); }
  int32_t mask_id() const { return node_count(); }
  int32_t global_id() const { return node_count() + 1; }
  // |E| + |R| + 2 reserved ids (MASK, GLOBAL).
  int32_t vocab_size() const { return node_count() + 2; }

  bool is_entity(int32_t node) const { return node >= 0 && node < num_entities(); }
  bool is_relation(int32_t node) const { return node >= num_entities() && node < node_count(); }

  const std::string& label(int32_t node) const;
  // -1 when the label is unknown.
  int32_t entity_id(const std::string& label) const;
  int32_t relation_id(const std::string& label) const;
  int32_t node_id(const std::string& label) const;  // entity first, then relation

  const std::vector<Triple>& triples(Split s) const;
  const std::vector<Triple>& train() const { return train_; }
  const std::vector<Triple>& valid() const { return valid_; }
  const std::vector<Triple>& test() const { return test_; }

  // Number of distinct train triples containing entity e (a self-loop triple
  // counts once). Throws on non-entity ids.
  int32_t entity_degree(int32_t entity) const;

  // deg(head) + deg(tail) over train triples.
  int32_t triple_degree(const Triple& t) const;

  // Train triple indices sharing head or tail with `center`, deduplicated,
  // ascending. `exclude_train_index` removes the center's own slot when the
  // center is itself a train triple (-1 for centers from other splits).
  std::vector<int32_t> neighborhood(const Triple& center, int32_t exclude_train_index = -1) const;

  const std::vector<int32_t>& incident_train_triples(int32_t entity) const;

  // Node ids that complete the query into a known-true triple over all splits,
  // minus the gold answer sitting in the masked slot of `query`.
  std::vector<int32_t> filtered_exclusions(const Triple& query, Slot masked) const;

  // Serializes one split back to TSV with the original labels.
  void write_tsv(Split s, const std::string& path) const;

  std::map<int32_t, int32_t> degree_histogram() const;

 private:
  void add_triple(Split split, const std::string& h, const std::string& r, const std::string& t);
  void build_indexes();
  int32_t intern_entity(const std::string& label);
  int32_t intern_relation(const std::string& label);

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, int32_t> entity_ids_;
  std::unordered_map<std::string, int32_t> relation_ids_;

  std::vector<Triple> train_, valid_, test_;

  // entity node id -> train triple indices containing it (each index once).
  std::vector<std::vector<int32_t>> incidence_;

  // known_true over the union of all splits, one map per maskable slot.
  std::unordered_map<uint64_t, std::vector<int32_t>> tails_by_head_rel_;
  std::unordered_map<uint64_t, std::vector<int32_t>> heads_by_rel_tail_;
  std::unordered_map<uint64_t, std::vector<int32_t>> rels_by_head_tail_;
};

const char* slot_name(Slot s);

}  // namespace relphormer
