#include "doctest.h"
#include "relphormer/kg.hpp"
#include "testutil.hpp"

#include <filesystem>
#include <set>

using namespace relphormer;
using testutil::TempFile;

TEST_CASE("load interns first-appearance ids, entities before relations") {
  TempFile train({"a\tr\tb", "b\tr\tc"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  CHECK(kg.num_entities() == 3);
  CHECK(kg.num_relations() == 1);
  CHECK(kg.train().size() == 2);
  CHECK(kg.entity_id("a") == 0);
  CHECK(kg.entity_id("b") == 1);
  CHECK(kg.entity_id("c") == 2);
  CHECK(kg.relation_id("r") == 3);
  CHECK(kg.node_count() == 4);
  CHECK(kg.mask_id() == 4);
  CHECK(kg.global_id() == 5);
  CHECK(kg.vocab_size() == 6);
  CHECK(kg.train()[0] == Triple{0, 3, 1});
  CHECK(kg.train()[1] == Triple{1, 3, 2});
}

TEST_CASE("vocabulary is the union over all three splits") {
  TempFile train({"a\tr\tb"});
  TempFile valid({"c\tr2\ta"});
  TempFile test({"d\tr\tc"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), valid.path(), test.path());
  CHECK(kg.num_entities() == 4);
  CHECK(kg.num_relations() == 2);
  CHECK(kg.valid().size() == 1);
  CHECK(kg.test().size() == 1);
  // eval-only entities still get ids (transductive setting)
  CHECK(kg.entity_id("d") == 3);
}

TEST_CASE("malformed lines are parse errors with line numbers") {
  SUBCASE("two fields") {
    TempFile bad({"a\tr\tb", "a\tr"});
    CHECK_THROWS_WITH_AS(KnowledgeGraph::load(bad.path(), "", ""),
                         doctest::Contains(":2:"), ParseError);
  }
  SUBCASE("four fields") {
    TempFile bad({"a\tr\tb\tc"});
    CHECK_THROWS_AS(KnowledgeGraph::load(bad.path(), "", ""), ParseError);
  }
  SUBCASE("empty field") {
    TempFile bad({"a\t\tb"});
    CHECK_THROWS_AS(KnowledgeGraph::load(bad.path(), "", ""), ParseError);
  }
  SUBCASE("blank interior line") {
    TempFile bad({"a\tr\tb", "", "b\tr\tc"});
    CHECK_THROWS_AS(KnowledgeGraph::load(bad.path(), "", ""), ParseError);
  }
  SUBCASE("empty train file") {
    TempFile empty(std::vector<std::string>{});
    CHECK_THROWS_AS(KnowledgeGraph::load(empty.path(), "", ""), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(KnowledgeGraph::load("/nonexistent/x.tsv", "", ""), ParseError);
  }
}

TEST_CASE("entity_degree counts distinct incident train triples") {
  TempFile train({"a\tr\tb", "a\tr\tc"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  CHECK(kg.entity_degree(kg.entity_id("a")) == 2);
  CHECK(kg.entity_degree(kg.entity_id("b")) == 1);
  // triple degree of (a,r,b) = deg(a)+deg(b) = 2+1
  CHECK(kg.triple_degree(kg.train()[0]) == 3);
  CHECK_THROWS_AS(kg.entity_degree(99), std::out_of_range);
}

TEST_CASE("isolated triple has degree 2; self-loop counts once per endpoint") {
  SUBCASE("isolated") {
    TempFile train({"a\tr\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    CHECK(kg.triple_degree(kg.train()[0]) == 2);
  }
  SUBCASE("self-loop") {
    TempFile train({"a\tr\ta"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    CHECK(kg.entity_degree(kg.entity_id("a")) == 1);
    CHECK(kg.triple_degree(kg.train()[0]) == 2);
  }
}

TEST_CASE("degree recount property on a no-self-loop dataset") {
  KnowledgeGraph kg = testutil::load_synth50();
  std::vector<int32_t> occur(static_cast<size_t>(kg.num_entities()), 0);
  for (const Triple& t : kg.train()) {
    ++occur[static_cast<size_t>(t.head)];
    ++occur[static_cast<size_t>(t.tail)];
  }
  for (int32_t e = 0; e < kg.num_entities(); ++e)
    CHECK(kg.entity_degree(e) == occur[static_cast<size_t>(e)]);
}

TEST_CASE("neighborhood enumerates incident train triples, sorted, deduplicated") {
  SUBCASE("single triple has empty neighborhood") {
    TempFile train({"a\tr\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    CHECK(kg.neighborhood(kg.train()[0], 0).empty());
  }
  SUBCASE("chain") {
    TempFile train({"a\tr\tb", "b\tr\tc", "c\tr\td"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    CHECK(kg.neighborhood(kg.train()[0], 0) == std::vector<int32_t>{1});
    CHECK(kg.neighborhood(kg.train()[1], 1) == std::vector<int32_t>{0, 2});
  }
  SUBCASE("triple sharing both endpoints appears once") {
    TempFile train({"a\tr\tb", "a\tr2\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    CHECK(kg.neighborhood(kg.train()[0], 0) == std::vector<int32_t>{1});
  }
}

TEST_CASE("neighborhood property: never self, always shares an entity") {
  KnowledgeGraph kg = testutil::load_umls();
  for (int32_t i = 0; i < 200; ++i) {
    const Triple& c = kg.train()[static_cast<size_t>(i)];
    for (int32_t j : kg.neighborhood(c, i)) {
      CHECK(j != i);
      const Triple& n = kg.train()[static_cast<size_t>(j)];
      const bool shares = n.head == c.head || n.head == c.tail || n.tail == c.head ||
                          n.tail == c.tail;
      CHECK(shares);
    }
  }
}

TEST_CASE("filtered_exclusions excludes known-true completions minus gold") {
  SUBCASE("gold alone yields empty set") {
    TempFile train({"x\tr\ty"});
    TempFile test({"a\tr\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", test.path());
    CHECK(kg.filtered_exclusions(kg.test()[0], Slot::Tail).empty());
  }
  SUBCASE("train competitor excluded") {
    TempFile train({"a\tr\tc"});
    TempFile test({"a\tr\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", test.path());
    const std::vector<int32_t> ex = kg.filtered_exclusions(kg.test()[0], Slot::Tail);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0] == kg.entity_id("c"));
  }
  SUBCASE("head slot with no other completer") {
    TempFile train({"a\tr\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    CHECK(kg.filtered_exclusions(kg.train()[0], Slot::Head).empty());
  }
  SUBCASE("relation slot") {
    TempFile train({"a\tr\tb", "a\tr2\tb"});
    KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
    const std::vector<int32_t> ex = kg.filtered_exclusions(kg.train()[0], Slot::Relation);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0] == kg.relation_id("r2"));
  }
}

TEST_CASE("filtered_exclusions never contains the gold answer") {
  KnowledgeGraph kg = testutil::load_umls();
  for (size_t i = 0; i < 300; ++i) {
    const Triple& t = kg.test()[i % kg.test().size()];
    for (Slot s : {Slot::Head, Slot::Relation, Slot::Tail}) {
      int32_t gold = s == Slot::Head ? t.head : s == Slot::Relation ? t.rel : t.tail;
      for (int32_t c : kg.filtered_exclusions(t, s)) CHECK(c != gold);
    }
  }
}

TEST_CASE("TSV round-trip preserves ids and triples") {
  KnowledgeGraph kg = testutil::load_synth50();
  const std::string dir = (std::filesystem::temp_directory_path() / "rt").string();
  std::filesystem::create_directories(dir);
  kg.write_tsv(Split::Train, dir + "/train.tsv");
  kg.write_tsv(Split::Valid, dir + "/valid.tsv");
  kg.write_tsv(Split::Test, dir + "/test.tsv");
  KnowledgeGraph kg2 =
      KnowledgeGraph::load(dir + "/train.tsv", dir + "/valid.tsv", dir + "/test.tsv");
  CHECK(kg2.num_entities() == kg.num_entities());
  CHECK(kg2.num_relations() == kg.num_relations());
  CHECK(kg2.train() == kg.train());
  CHECK(kg2.valid() == kg.valid());
  CHECK(kg2.test() == kg.test());
  for (int32_t e = 0; e < kg.num_entities(); ++e) CHECK(kg2.label(e) == kg.label(e));
}

TEST_CASE("incidence lists are exact inverses of the train list") {
  KnowledgeGraph kg = testutil::load_synth50();
  size_t total = 0;
  for (int32_t e = 0; e < kg.num_entities(); ++e) {
    for (int32_t i : kg.incident_train_triples(e)) {
      const Triple& t = kg.train()[static_cast<size_t>(i)];
      CHECK((t.head == e || t.tail == e));
    }
    total += kg.incident_train_triples(e).size();
  }
  size_t expected = 0;
  for (const Triple& t : kg.train()) expected += t.head == t.tail ? 1 : 2;
  CHECK(total == expected);
}

TEST_CASE("UMLS-shaped dataset loads with the documented counts") {
  KnowledgeGraph kg = testutil::load_umls();
  CHECK(kg.num_entities() == 135);
  CHECK(kg.num_relations() == 46);
  CHECK(kg.train().size() == 5216);
  CHECK(kg.vocab_size() == 183);
}

TEST_CASE("carriage returns are stripped") {
  TempFile train({"a\tr\tb\r"});
  KnowledgeGraph kg = KnowledgeGraph::load(train.path(), "", "");
  CHECK(kg.num_entities() == 2);
  CHECK(kg.label(1) == "b");
}
