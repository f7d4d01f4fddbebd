#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace relphormer {

struct RawTriple {
  std::string head, rel, tail;
};

struct SynthDataset {
  std::vector<RawTriple> train, valid, test;
  void write(const std::string& dir) const;  // train.tsv / valid.tsv / test.tsv
};

// 24 entities (22-cycle plus two color hubs), 3 relations (next, skip2,
// has_color), 66 triples split 50/8/8. skip2 composes next with itself, so the
// 2-hop structure signal is informative by construction.
SynthDataset make_synth50();

// UMLS-scale surrogate: exactly 135 entities in 12 clusters, 46 relations,
// 5216/652/661 triples, no self-loops. Every relation maps each head to a
// tail determined by (cluster(head), relation), so held-out triples are
// recoverable from cluster membership. Eval triples keep >= 2 train examples
// of their generating rule.
SynthDataset make_umls135(uint64_t seed = 77);

}  // namespace relphormer
