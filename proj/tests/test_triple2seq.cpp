#include "doctest.h"
#include "relphormer/triple2seq.hpp"
#include "testutil.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace relphormer;
using testutil::TempFile;

namespace {

KnowledgeGraph tiny_chain() {
  static TempFile train({"a\tr\tb", "b\tr\tc", "c\tr\td"});
  return KnowledgeGraph::load(train.path(), "", "");
}

}  // namespace

TEST_CASE("center order is a permutation of all train indices") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(1);
  std::vector<int32_t> order = sample_center_order(kg, rng);
  REQUIRE(order.size() == kg.train().size());
  std::vector<int32_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int32_t>{0, 1, 2});
}

TEST_CASE("single triple order is that triple") {
  TempFile train({"a\tr\tb"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  Rng rng(2);
  CHECK(sample_center_order(kg, rng) == std::vector<int32_t>{0});
}

TEST_CASE("degree weighting: degree-6 triple precedes degree-2 triple ~75% of epochs") {
  // T0=(a,r,b) has degree 2; T1=(c,r,d) has degree 3+3=6 via helper triples.
  TempFile train({"a\tr\tb", "c\tr\td", "c\tr\te", "e\tr2\tc", "d\tr\tg", "d\tr\th"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  REQUIRE(kg.triple_degree(kg.train()[0]) == 2);
  REQUIRE(kg.triple_degree(kg.train()[1]) == 6);

  Rng rng(3);
  int t1_first = 0;
  const int epochs = 10000;
  for (int e = 0; e < epochs; ++e) {
    std::vector<int32_t> order = sample_center_order(kg, rng);
    auto p0 = std::find(order.begin(), order.end(), 0);
    auto p1 = std::find(order.begin(), order.end(), 1);
    if (p1 < p0) ++t1_first;
  }
  // exponential-race pairwise probability: 6/(6+2) = 0.75
  const double frac = static_cast<double>(t1_first) / epochs;
  CHECK(frac > 0.73);
  CHECK(frac < 0.77);
}

TEST_CASE("uniform degrees give a uniform permutation") {
  // three disjoint triples, all degree 2: each of 6 orders ~1/6
  TempFile train({"a\tr\tb", "c\tr\td", "e\tr\tf"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  Rng rng(4);
  std::map<std::vector<int32_t>, int> counts;
  const int epochs = 12000;
  for (int e = 0; e < epochs; ++e) ++counts[sample_center_order(kg, rng)];
  REQUIRE(counts.size() == 6);
  for (const auto& [order, c] : counts)
    CHECK(std::abs(c / static_cast<double>(epochs) - 1.0 / 6) < 0.02);
}

TEST_CASE("k=0 context is exactly the center") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(5);
  ContextSubgraph sub = sample_context(kg, kg.train()[0], 0, 0, rng);
  CHECK(sub.context.empty());
  linearize(kg, sub);
  CHECK(sub.nodes == std::vector<int32_t>{kg.global_id(), kg.train()[0].head, kg.train()[0].rel,
                                          kg.train()[0].tail});
}

TEST_CASE("k larger than neighborhood clamps") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(6);
  // center (b,r,c) at index 1 has neighborhood {0, 2}
  ContextSubgraph sub = sample_context(kg, kg.train()[1], 1, 8, rng);
  CHECK(sub.context.size() == 2);
}

TEST_CASE("context excludes the center's own train slot") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    ContextSubgraph sub = sample_context(kg, kg.train()[0], 0, 8, rng);
    for (const Triple& t : sub.context) CHECK(!(t == kg.train()[0]));
  }
}

TEST_CASE("dynamic sampling: successive draws differ") {
  KnowledgeGraph kg = testutil::load_umls();
  Rng rng(8);
  const Triple& center = kg.train()[0];
  std::set<std::vector<int32_t>> seen;
  for (int i = 0; i < 50; ++i) {
    ContextSubgraph sub = sample_context(kg, center, 0, 4, rng);
    std::vector<int32_t> ids;
    for (const Triple& t : sub.context) {
      ids.push_back(t.head);
      ids.push_back(t.rel);
      ids.push_back(t.tail);
    }
    seen.insert(ids);
  }
  // |neighborhood| >> k makes repeated identical draws vanishingly unlikely
  CHECK(seen.size() > 10);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  KnowledgeGraph kg = testutil::load_umls();
  Rng rng1(9), rng2(9);
  for (int i = 0; i < 20; ++i) {
    ContextSubgraph a = sample_context(kg, kg.train()[static_cast<size_t>(i)], i, 4, rng1);
    ContextSubgraph b = sample_context(kg, kg.train()[static_cast<size_t>(i)], i, 4, rng2);
    CHECK(a.context == b.context);
  }
}

TEST_CASE("umls bound check: k=8 gives exactly 8 context triples, nodes within [4,20]") {
  KnowledgeGraph kg = testutil::load_umls();
  Rng rng(10);
  for (size_t i = 0; i < kg.train().size(); ++i) {
    ContextSubgraph sub =
        sample_context(kg, kg.train()[i], static_cast<int64_t>(i), 8, rng);
    REQUIRE(sub.context.size() == 8);
    linearize(kg, sub);
    REQUIRE(sub.nodes.size() >= 4);
    REQUIRE(sub.nodes.size() <= 1 + 3 + 16);
  }
}

TEST_CASE("linearize: s-p and p-o edges only, global row connects everything") {
  KnowledgeGraph kg = tiny_chain();
  ContextSubgraph sub;
  sub.center = kg.train()[0];  // (a, r, b)
  linearize(kg, sub);
  const SquareMat& A = sub.adjacency;
  REQUIRE(A.n == 4);
  CHECK(A.at(0, 1) == 1.0);  // G-a
  CHECK(A.at(0, 2) == 1.0);  // G-r
  CHECK(A.at(0, 3) == 1.0);  // G-b
  CHECK(A.at(1, 2) == 1.0);  // a-r
  CHECK(A.at(2, 3) == 1.0);  // r-b
  CHECK(A.at(1, 3) == 0.0);  // no direct a-b edge
  for (int i = 0; i < 4; ++i) CHECK(A.at(i, i) == 0.0);
}

TEST_CASE("linearize merges shared nodes instead of duplicating") {
  KnowledgeGraph kg = tiny_chain();
  ContextSubgraph sub;
  sub.center = kg.train()[0];                 // (a, r, b)
  sub.context.push_back(kg.train()[1]);       // (b, r, c) shares both b and r
  linearize(kg, sub);
  // nodes: [G, a, r, b, c] — b and r not duplicated
  REQUIRE(sub.nodes.size() == 5);
  std::set<int32_t> uniq(sub.nodes.begin(), sub.nodes.end());
  CHECK(uniq.size() == 5);
  // context edges b-r (already present) and r-c merged into existing rows
  CHECK(sub.adjacency.at(2, 3) == 1.0);  // r-b
  CHECK(sub.adjacency.at(2, 4) == 1.0);  // r-c
}

TEST_CASE("disjoint context triples are block-diagonal except the global row") {
  TempFile train({"a\tr\tb", "c\tr2\td", "e\tr3\tf"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  ContextSubgraph sub;
  sub.center = kg.train()[0];
  sub.context.push_back(kg.train()[1]);
  sub.context.push_back(kg.train()[2]);
  linearize(kg, sub);
  const SquareMat& A = sub.adjacency;
  REQUIRE(A.n == 10);  // G + 3 + 3 + 3
  // no edge between the center block (1..3) and either context block (4..6, 7..9)
  for (int i = 1; i <= 3; ++i)
    for (int j = 4; j <= 9; ++j) CHECK(A.at(i, j) == 0.0);
  for (int i = 4; i <= 6; ++i)
    for (int j = 7; j <= 9; ++j) CHECK(A.at(i, j) == 0.0);
  for (int j = 1; j <= 9; ++j) CHECK(A.at(0, j) == 1.0);
}

TEST_CASE("adjacency is symmetric with zero diagonal on sampled subgraphs") {
  KnowledgeGraph kg = testutil::load_umls();
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    ContextSubgraph sub = sample_context(kg, kg.train()[static_cast<size_t>(i)], i, 4, rng);
    linearize(kg, sub);
    for (int r = 0; r < sub.adjacency.n; ++r) {
      CHECK(sub.adjacency.at(r, r) == 0.0);
      for (int c = 0; c < r; ++c) CHECK(sub.adjacency.at(r, c) == sub.adjacency.at(c, r));
    }
  }
}

TEST_CASE("mask_center: tail mask produces [G,a,r,MASK] with target b") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(12);
  ContextSubgraph sub;
  sub.center = kg.train()[0];
  MaskedSample ms = mask_center(kg, sub, MaskPolicy::Tail, rng);
  CHECK(ms.sequence == std::vector<int32_t>{kg.global_id(), kg.train()[0].head, kg.train()[0].rel,
                                            kg.mask_id()});
  CHECK(ms.target == kg.train()[0].tail);
  CHECK(ms.mask_slot == Slot::Tail);
}

TEST_CASE("mask_center: relation mask produces [G,a,MASK,b] with target r") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(13);
  ContextSubgraph sub;
  sub.center = kg.train()[0];
  MaskedSample ms = mask_center(kg, sub, MaskPolicy::Relation, rng);
  CHECK(ms.sequence == std::vector<int32_t>{kg.global_id(), kg.train()[0].head, kg.mask_id(),
                                            kg.train()[0].tail});
  CHECK(ms.target == kg.train()[0].rel);
}

TEST_CASE("random-entity masking is a fair coin within 2%") {
  KnowledgeGraph kg = tiny_chain();
  Rng rng(14);
  int heads = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    ContextSubgraph sub;
    sub.center = kg.train()[0];
    MaskedSample ms = mask_center(kg, sub, MaskPolicy::RandomEntity, rng);
    if (ms.mask_slot == Slot::Head) ++heads;
  }
  const double frac = static_cast<double>(heads) / n;
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
}

TEST_CASE("remove_target_context drops exactly the target-incident triples") {
  KnowledgeGraph kg = tiny_chain();
  const int32_t a = 0, b = 1, c = 2, d = 3;
  const int32_t r = kg.relation_id("r");
  SUBCASE("target-incident context dropped") {
    ContextSubgraph sub;
    sub.context = {{b, r, c}};
    remove_target_context(sub, b);
    CHECK(sub.context.empty());
  }
  SUBCASE("unrelated context kept") {
    ContextSubgraph sub;
    sub.context = {{a, r, c}};
    remove_target_context(sub, b);
    CHECK(sub.context.size() == 1);
  }
  SUBCASE("mixed") {
    ContextSubgraph sub;
    sub.context = {{b, r, c}, {a, r, d}, {c, r, b}};
    remove_target_context(sub, b);
    REQUIRE(sub.context.size() == 1);
    CHECK(sub.context[0] == Triple{a, r, d});
  }
  SUBCASE("relation-slot occurrences are dropped too") {
    ContextSubgraph sub;
    sub.context = {{a, r, c}};
    remove_target_context(sub, r);
    CHECK(sub.context.empty());
  }
}

TEST_CASE("full pipeline: target never leaks into the sequence") {
  KnowledgeGraph kg = testutil::load_umls();
  Rng rng(15);
  std::vector<int32_t> order = sample_center_order(kg, rng);
  for (int i = 0; i < 2000; ++i) {
    const int32_t idx = order[static_cast<size_t>(i) % order.size()];
    ContextSubgraph sub = sample_context(kg, kg.train()[static_cast<size_t>(idx)], idx, 8, rng);
    MaskedSample ms = mask_center(kg, std::move(sub), MaskPolicy::RandomEntity, rng);
    for (int32_t node : ms.sequence) REQUIRE(node != ms.target);
    // exactly one MASK, at a center position
    int masks = 0, pos = -1;
    for (size_t p = 0; p < ms.sequence.size(); ++p)
      if (ms.sequence[p] == kg.mask_id()) {
        ++masks;
        pos = static_cast<int>(p);
      }
    REQUIRE(masks == 1);
    REQUIRE(pos >= 1);
    REQUIRE(pos <= 3);
  }
}

TEST_CASE("center occupies positions 1..3 with MASK at the chosen slot") {
  KnowledgeGraph kg = testutil::load_umls();
  Rng rng(16);
  for (int i = 0; i < 200; ++i) {
    const Triple& c = kg.train()[static_cast<size_t>(i)];
    ContextSubgraph sub = sample_context(kg, c, i, 4, rng);
    MaskedSample ms = mask_center(kg, std::move(sub), MaskPolicy::RandomEntity, rng);
    if (ms.mask_slot == Slot::Head) {
      CHECK(ms.sequence[1] == kg.mask_id());
      CHECK(ms.sequence[2] == c.rel);
      CHECK(ms.sequence[3] == c.tail);
    } else {
      CHECK(ms.sequence[1] == c.head);
      CHECK(ms.sequence[2] == c.rel);
      CHECK(ms.sequence[3] == kg.mask_id());
    }
  }
}

TEST_CASE("weighted sampling clamps count and tolerates zero weights") {
  Rng rng(17);
  std::vector<int32_t> items{1, 2, 3};
  std::vector<double> zeros{0.0, 0.0, 0.0};
  std::vector<int32_t> got = weighted_sample_without_replacement(items, zeros, 10, rng);
  REQUIRE(got.size() == 3);
  std::sort(got.begin(), got.end());
  CHECK(got == items);
}
