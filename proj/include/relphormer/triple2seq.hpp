#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "relphormer/kg.hpp"
#include "relphormer/matrix.hpp"

namespace relphormer {

using Rng = std::mt19937_64;

// Center triple plus sampled context triples. `nodes` and `adjacency` are
// filled by linearize(): position 0 is GLOBAL, positions 1..3 the center
// head/relation/tail, then context nodes in first-encounter order.
struct ContextSubgraph {
  Triple center;
  int64_t center_key = -1;  // train triple index, or -1 for ad-hoc centers
  std::vector<Triple> context;
  std::vector<int32_t> nodes;
  SquareMat adjacency;
};

struct MaskedSample {
  std::vector<int32_t> sequence;  // exactly one MASK, at position 1, 2 or 3
  SquareMat adjacency;
  int32_t target = -1;
  Slot mask_slot = Slot::Tail;
  int64_t center_key = -1;
};

// Which center slot to mask. RandomEntity flips a fair coin between head and
// tail (the entity-prediction training mode).
enum class MaskPolicy { Head, Relation, Tail, RandomEntity };

// One epoch's center order: all train triple indices, drawn without
// replacement with probability proportional to triple degree.
std::vector<int32_t> sample_center_order(const KnowledgeGraph& kg, Rng& rng);

// Draws min(k, |neighborhood|) context triples without replacement, weighted
// by triple degree (or uniformly when uniform_weights). Resampled fresh on
// every call. `center_key` >= 0 marks a train center and excludes it from its
// own neighborhood.
ContextSubgraph sample_context(const KnowledgeGraph& kg, const Triple& center, int64_t center_key,
                               int k, Rng& rng, bool uniform_weights = false);

// Drops every context triple containing `target` in any slot. Runs before
// linearization so the dropped nodes never enter the adjacency.
void remove_target_context(ContextSubgraph& sub, int32_t target);

// Builds nodes + adjacency. Edges: s-p and p-o for the center and every
// context triple (no direct s-o edge), plus GLOBAL to every position.
void linearize(const KnowledgeGraph& kg, ContextSubgraph& sub);

// Full masking pipeline: resolve the slot, apply the leakage guard, linearize,
// substitute the MASK sentinel.
MaskedSample mask_center(const KnowledgeGraph& kg, ContextSubgraph sub, MaskPolicy policy,
                         Rng& rng);

// Weighted sampling without replacement (Efraimidis-Spirakis). Exposed for the
// Monte-Carlo tests; items with zero total weight fall back to uniform.
std::vector<int32_t> weighted_sample_without_replacement(const std::vector<int32_t>& items,
                                                         const std::vector<double>& weights,
                                                         size_t count, Rng& rng);

}  // namespace relphormer
