#include "relphormer/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relphormer {

namespace {

uint64_t pair_key(int32_t a, int32_t b) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

void push_unique(std::vector<int32_t>& v, int32_t x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

const char* slot_name(Slot s) {
  switch (s) {
    case Slot::Head: return "head";
    case Slot::Relation: return "relation";
    case Slot::Tail: return "tail";
  }
  return "?";
}

int32_t KnowledgeGraph::intern_entity(const std::string& label) {
  auto it = entity_ids_.find(label);
  if (it != entity_ids_.end()) return it->second;
  int32_t id = static_cast<int32_t>(entity_labels_.size());
  entity_labels_.push_back(label);
  entity_ids_.emplace(label, id);
  return id;
}

int32_t KnowledgeGraph::intern_relation(const std::string& label) {
  auto it = relation_ids_.find(label);
  if (it != relation_ids_.end()) return it->second;
  int32_t id = static_cast<int32_t>(relation_labels_.size());
  relation_labels_.push_back(label);
  relation_ids_.emplace(label, id);
  return id;
}

void KnowledgeGraph::add_triple(Split split, const std::string& h, const std::string& r,
                                const std::string& t) {
  Triple tr;
  tr.head = intern_entity(h);
  tr.rel = intern_relation(r);  // relation ids are offset after all entities are known
  tr.tail = intern_entity(t);
  switch (split) {
    case Split::Train: train_.push_back(tr); break;
    case Split::Valid: valid_.push_back(tr); break;
    case Split::Test: test_.push_back(tr); break;
  }
}

KnowledgeGraph KnowledgeGraph::load(const std::string& train_path, const std::string& valid_path,
                                    const std::string& test_path) {
  KnowledgeGraph kg;
  auto read_file = [&kg](const std::string& path, Split split, bool required) {
    if (path.empty()) {
      if (required) throw ParseError("train file path is empty");
      return;
    }
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    size_t lineno = 0;
    size_t count = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        // a trailing newline at EOF is fine; a blank line elsewhere is not
        if (in.peek() == EOF) break;
        throw ParseError(path + ":" + std::to_string(lineno) + ": blank line");
      }
      size_t t1 = line.find('\t');
      size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
      size_t t3 = (t2 == std::string::npos) ? std::string::npos : line.find('\t', t2 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos)
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": expected exactly 3 tab-separated fields");
      std::string h = line.substr(0, t1);
      std::string r = line.substr(t1 + 1, t2 - t1 - 1);
      std::string t = line.substr(t2 + 1);
      if (h.empty() || r.empty() || t.empty())
        throw ParseError(path + ":" + std::to_string(lineno) + ": empty field");
      kg.add_triple(split, h, r, t);
      ++count;
    }
    if (required && count == 0) throw ParseError(path + ": train file is empty");
  };

  read_file(train_path, Split::Train, true);
  read_file(valid_path, Split::Valid, false);
  read_file(test_path, Split::Test, false);
  kg.build_indexes();
  return kg;
}

void KnowledgeGraph::build_indexes() {
  // Relations were interned with 0-based ids; shift them after entities so the
  // node id space is entities first, then relations.
  const int32_t offset = num_entities();
  auto shift = [offset](std::vector<Triple>& v) {
    for (auto& t : v) t.rel += offset;
  };
  shift(train_);
  shift(valid_);
  shift(test_);

  incidence_.assign(num_entities(), {});
  for (int32_t i = 0; i < static_cast<int32_t>(train_.size()); ++i) {
    const Triple& t = train_[static_cast<size_t>(i)];
    incidence_[static_cast<size_t>(t.head)].push_back(i);
    if (t.tail != t.head) incidence_[static_cast<size_t>(t.tail)].push_back(i);
  }

  for (const auto* split : {&train_, &valid_, &test_}) {
    for (const Triple& t : *split) {
      push_unique(tails_by_head_rel_[pair_key(t.head, t.rel)], t.tail);
      push_unique(heads_by_rel_tail_[pair_key(t.rel, t.tail)], t.head);
      push_unique(rels_by_head_tail_[pair_key(t.head, t.tail)], t.rel);
    }
  }
}

const std::string& KnowledgeGraph::label(int32_t node) const {
  if (is_entity(node)) return entity_labels_[static_cast<size_t>(node)];
  if (is_relation(node)) return relation_labels_[static_cast<size_t>(node - num_entities())];
  static const std::string kMask = "[MASK]";
  static const std::string kGlobal = "[GLOBAL]";
  if (node == mask_id()) return kMask;
  if (node == global_id()) return kGlobal;
  throw std::out_of_range("node id " + std::to_string(node) + " out of range");
}

int32_t KnowledgeGraph::entity_id(const std::string& l) const {
  auto it = entity_ids_.find(l);
  return it == entity_ids_.end() ? -1 : it->second;
}

int32_t KnowledgeGraph::relation_id(const std::string& l) const {
  auto it = relation_ids_.find(l);
  return it == relation_ids_.end() ? -1 : it->second + num_entities();
}

int32_t KnowledgeGraph::node_id(const std::string& l) const {
  int32_t e = entity_id(l);
  return e >= 0 ? e : relation_id(l);
}

const std::vector<Triple>& KnowledgeGraph::triples(Split s) const {
  switch (s) {
    case Split::Train: return train_;
    case Split::Valid: return valid_;
    case Split::Test: return test_;
  }
  throw std::logic_error("bad split");
}

int32_t KnowledgeGraph::entity_degree(int32_t entity) const {
  if (!is_entity(entity))
    throw std::out_of_range("entity id " + std::to_string(entity) + " out of range");
  return static_cast<int32_t>(incidence_[static_cast<size_t>(entity)].size());
}

int32_t KnowledgeGraph::triple_degree(const Triple& t) const {
  return entity_degree(t.head) + entity_degree(t.tail);
}

const std::vector<int32_t>& KnowledgeGraph::incident_train_triples(int32_t entity) const {
  if (!is_entity(entity))
    throw std::out_of_range("entity id " + std::to_string(entity) + " out of range");
  return incidence_[static_cast<size_t>(entity)];
}

std::vector<int32_t> KnowledgeGraph::neighborhood(const Triple& center,
                                                  int32_t exclude_train_index) const {
  const auto& h = incident_train_triples(center.head);
  const auto& t = incident_train_triples(center.tail);
  std::vector<int32_t> out;
  out.reserve(h.size() + t.size());
  // both incidence lists are ascending; merge keeps the result sorted
  std::set_union(h.begin(), h.end(), t.begin(), t.end(), std::back_inserter(out));
  if (exclude_train_index >= 0) {
    auto it = std::lower_bound(out.begin(), out.end(), exclude_train_index);
    if (it != out.end() && *it == exclude_train_index) out.erase(it);
  }
  return out;
}

std::vector<int32_t> KnowledgeGraph::filtered_exclusions(const Triple& query, Slot masked) const {
  const std::unordered_map<uint64_t, std::vector<int32_t>>* map = nullptr;
  uint64_t key = 0;
  int32_t gold = -1;
  switch (masked) {
    case Slot::Tail:
      map = &tails_by_head_rel_;
      key = pair_key(query.head, query.rel);
      gold = query.tail;
      break;
    case Slot::Head:
      map = &heads_by_rel_tail_;
      key = pair_key(query.rel, query.tail);
      gold = query.head;
      break;
    case Slot::Relation:
      map = &rels_by_head_tail_;
      key = pair_key(query.head, query.tail);
      gold = query.rel;
      break;
  }
  std::vector<int32_t> out;
  auto it = map->find(key);
  if (it == map->end()) return out;
  for (int32_t cand : it->second)
    if (cand != gold) out.push_back(cand);
  std::sort(out.begin(), out.end());
  return out;
}

void KnowledgeGraph::write_tsv(Split s, const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const Triple& t : triples(s))
    out << label(t.head) << '\t' << label(t.rel) << '\t' << label(t.tail) << '\n';
}

std::map<int32_t, int32_t> KnowledgeGraph::degree_histogram() const {
  std::map<int32_t, int32_t> h;
  for (int32_t e = 0; e < num_entities(); ++e) ++h[entity_degree(e)];
  return h;
}

}  // namespace relphormer
