#include "relphormer/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

namespace relphormer {

void SynthDataset::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto dump = [&](const std::vector<RawTriple>& rows, const char* name) {
    std::ofstream out(dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + dir + "/" + name);
    for (const RawTriple& t : rows) out << t.head << '\t' << t.rel << '\t' << t.tail << '\n';
  };
  dump(train, "train.tsv");
  dump(valid, "valid.tsv");
  dump(test, "test.tsv");
}

SynthDataset make_synth50() {
  const int n = 22;
  auto ent = [](int i) { return "e" + std::to_string(i); };
  std::vector<RawTriple> all;
  for (int i = 0; i < n; ++i) all.push_back({ent(i), "next", ent((i + 1) % n)});
  for (int i = 0; i < n; ++i) all.push_back({ent(i), "skip2", ent((i + 2) % n)});
  for (int i = 0; i < n; ++i) all.push_back({ent(i), "has_color", i % 2 ? "odd" : "even"});

  SynthDataset ds;
  for (size_t i = 0; i < all.size(); ++i) {
    if (i % 8 == 3)
      ds.valid.push_back(all[i]);
    else if (i % 8 == 7)
      ds.test.push_back(all[i]);
    else
      ds.train.push_back(all[i]);
  }
  return ds;
}

namespace {

struct Rule {
  int cluster;      // domain cluster id
  int rel;          // relation id
  int variant;      // 0 primary tail, 1 secondary tail
};

}  // namespace

SynthDataset make_umls135(uint64_t seed) {
  const int n_ent = 135, n_rel = 46, n_clusters = 12;
  const int n_valid = 652, n_test = 661;

  std::vector<int> cluster_of(n_ent);
  std::vector<std::vector<int>> members(n_clusters);
  for (int e = 0; e < n_ent; ++e) {
    const int c = e % n_clusters;
    cluster_of[e] = c;
    members[c].push_back(e);
  }

  std::mt19937_64 rng(seed);
  // range cluster and in-cluster offset per (relation, domain cluster, variant)
  std::vector<int> range_of(n_rel);
  for (int r = 0; r < n_rel; ++r) range_of[r] = static_cast<int>(rng() % n_clusters);
  auto rule_tail = [&](int head, int r, int variant) {
    const int c = cluster_of[head];
    const std::vector<int>& range = members[static_cast<size_t>(range_of[r])];
    size_t j = static_cast<size_t>(c * 7 + r * 3 + variant * 5) % range.size();
    int t = range[j];
    if (t == head) t = range[(j + 1) % range.size()];  // no self-loops
    return t;
  };

  auto name_e = [](int e) { return "c" + std::to_string(e % 12) + "_e" + std::to_string(e); };
  auto name_r = [](int r) { return "rel" + std::to_string(r); };

  struct Gen {
    RawTriple t;
    Rule rule;
  };
  std::vector<Gen> all;
  for (int r = 0; r < n_rel; ++r)
    for (int h = 0; h < n_ent; ++h)
      all.push_back({{name_e(h), name_r(r), name_e(rule_tail(h, r, 0))},
                     {cluster_of[h], r, 0}});
  // top up to the exact triple budget with secondary tails
  const int target = 5216 + n_valid + n_test;
  for (int r = 0; r < n_rel && static_cast<int>(all.size()) < target; ++r)
    for (int h = 0; h < n_ent && static_cast<int>(all.size()) < target; ++h) {
      const int t = rule_tail(h, r, 1);
      if (t == rule_tail(h, r, 0)) continue;  // would duplicate the primary triple
      all.push_back({{name_e(h), name_r(r), name_e(t)}, {cluster_of[h], r, 1}});
    }
  if (static_cast<int>(all.size()) != target)
    throw std::logic_error("umls135 generator: triple budget mismatch");

  // explicit Fisher-Yates: std::shuffle draws are implementation-defined
  for (size_t i = all.size() - 1; i > 0; --i)
    std::swap(all[i], all[rng() % (i + 1)]);

  // eval triples must leave >= 2 train instances of their generating rule
  auto rule_key = [](const Rule& r) { return (r.cluster * 64 + r.rel) * 2 + r.variant; };
  std::map<int, int> train_per_rule;
  for (size_t i = static_cast<size_t>(n_valid + n_test); i < all.size(); ++i)
    ++train_per_rule[rule_key(all[i].rule)];
  for (size_t i = 0; i < static_cast<size_t>(n_valid + n_test); ++i) {
    if (train_per_rule[rule_key(all[i].rule)] >= 2) continue;
    for (size_t j = static_cast<size_t>(n_valid + n_test); j < all.size(); ++j) {
      if (train_per_rule[rule_key(all[j].rule)] > 2) {
        --train_per_rule[rule_key(all[j].rule)];
        ++train_per_rule[rule_key(all[i].rule)];
        std::swap(all[i], all[j]);
        break;
      }
    }
  }

  SynthDataset ds;
  for (size_t i = 0; i < all.size(); ++i) {
    if (i < static_cast<size_t>(n_valid))
      ds.valid.push_back(all[i].t);
    else if (i < static_cast<size_t>(n_valid + n_test))
      ds.test.push_back(all[i].t);
    else
      ds.train.push_back(all[i].t);
  }
  return ds;
}

}  // namespace relphormer
