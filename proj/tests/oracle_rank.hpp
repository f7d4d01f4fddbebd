#pragma once

// Brute-force ranking oracle: enumerate every legal candidate, sort by score,
// assign tie-averaged ranks. Kept deliberately independent of rank_queries so
// the two implementations cross-check each other.

#include <algorithm>
#include <string>
#include <vector>

#include "relphormer/kg.hpp"
#include "relphormer/trainer.hpp"

namespace testsuite {

struct OracleMetrics {
  relphormer::DirMetrics averaged;
  std::vector<std::pair<std::string, relphormer::DirMetrics>> directions;
};

inline double oracle_rank_one(const relphormer::KnowledgeGraph& kg, const relphormer::Query& q,
                              bool filtered, const std::vector<double>& scores) {
  using namespace relphormer;
  const bool rel = q.slot == Slot::Relation;
  const int32_t lo = rel ? kg.num_entities() : 0;
  const int32_t hi = rel ? kg.node_count() : kg.num_entities();
  int32_t gold = q.triple.tail;
  if (q.slot == Slot::Head) gold = q.triple.head;
  if (q.slot == Slot::Relation) gold = q.triple.rel;

  // Materialize the candidate list, drop filtered competitors, sort by score
  // descending, then locate the gold's tied block.
  std::vector<int32_t> cands;
  std::vector<int32_t> excl;
  if (filtered) excl = kg.filtered_exclusions(q.triple, q.slot);
  for (int32_t c = lo; c < hi; ++c) {
    if (c != gold && std::binary_search(excl.begin(), excl.end(), c)) continue;
    cands.push_back(c);
  }
  std::stable_sort(cands.begin(), cands.end(), [&](int32_t a, int32_t b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  const double gs = scores[static_cast<size_t>(gold)];
  size_t first = 0, last = 0;  // [first, last) = tied block containing gold
  for (size_t i = 0; i < cands.size(); ++i) {
    if (scores[static_cast<size_t>(cands[i])] > gs) first = i + 1;
    if (scores[static_cast<size_t>(cands[i])] >= gs) last = i + 1;
  }
  // Mean rank of the tied block, 1-based.
  return (static_cast<double>(first + 1) + static_cast<double>(last)) / 2.0;
}

inline OracleMetrics oracle_rank(const relphormer::KnowledgeGraph& kg,
                                 const std::vector<relphormer::Query>& queries, bool filtered,
                                 const relphormer::Scorer& scorer) {
  using namespace relphormer;
  struct Acc {
    double mr = 0, mrr = 0, h1 = 0, h3 = 0, h10 = 0;
    int n = 0;
  };
  std::vector<std::pair<std::string, Acc>> dirs;
  Acc total;
  for (const Query& q : queries) {
    const std::vector<double> scores = scorer(q.triple, q.slot);
    const double rank = oracle_rank_one(kg, q, filtered, scores);
    const std::string name = slot_name(q.slot);
    Acc* a = nullptr;
    for (auto& [dn, acc] : dirs)
      if (dn == name) a = &acc;
    if (!a) {
      dirs.emplace_back(name, Acc{});
      a = &dirs.back().second;
    }
    for (Acc* t : {a, &total}) {
      t->mr += rank;
      t->mrr += 1.0 / rank;
      t->h1 += rank <= 1.0 ? 1.0 : 0.0;
      t->h3 += rank <= 3.0 ? 1.0 : 0.0;
      t->h10 += rank <= 10.0 ? 1.0 : 0.0;
      t->n += 1;
    }
  }
  auto finish = [](const Acc& a) {
    relphormer::DirMetrics d;
    d.queries = a.n;
    if (a.n) {
      d.mr = a.mr / a.n;
      d.mrr = a.mrr / a.n;
      d.hits1 = a.h1 / a.n;
      d.hits3 = a.h3 / a.n;
      d.hits10 = a.h10 / a.n;
    }
    return d;
  };
  OracleMetrics out;
  out.averaged = finish(total);
  for (auto& [name, a] : dirs) out.directions.emplace_back(name, finish(a));
  return out;
}

inline bool dir_equal(const relphormer::DirMetrics& a, const relphormer::DirMetrics& b) {
  return a.mr == b.mr && a.mrr == b.mrr && a.hits1 == b.hits1 && a.hits3 == b.hits3 &&
         a.hits10 == b.hits10 && a.queries == b.queries;
}

// Exact equality against the production Metrics, direction lists matched by name.
inline bool metrics_equal(const relphormer::Metrics& got, const OracleMetrics& want) {
  if (!dir_equal(got.averaged, want.averaged)) return false;
  if (got.directions.size() != want.directions.size()) return false;
  for (const auto& [name, d] : want.directions) {
    bool found = false;
    for (const auto& [gn, gd] : got.directions)
      if (gn == name) {
        if (!dir_equal(gd, d)) return false;
        found = true;
      }
    if (!found) return false;
  }
  return true;
}

}  // namespace testsuite
