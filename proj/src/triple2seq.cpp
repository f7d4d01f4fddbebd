#include "relphormer/triple2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace relphormer {

std::vector<int32_t> weighted_sample_without_replacement(const std::vector<int32_t>& items,
                                                         const std::vector<double>& weights,
                                                         size_t count, Rng& rng) {
  if (items.size() != weights.size())
    throw std::invalid_argument("weighted sample: items/weights size mismatch");
  count = std::min(count, items.size());
  if (count == 0) return {};

  // Efraimidis-Spirakis: order by -ln(u)/w ascending. Zero/negative weights
  // are treated as uniform weight 1 so isolated triples stay sampleable.
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  std::vector<std::pair<double, int32_t>> keys(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    double w = weights[i] > 0.0 ? weights[i] : 1.0;
    keys[i] = {-std::log(unif(rng)) / w, items[i]};
  }
  if (count == items.size()) {
    std::sort(keys.begin(), keys.end());
  } else {
    std::partial_sort(keys.begin(), keys.begin() + static_cast<ptrdiff_t>(count), keys.end());
  }
  std::vector<int32_t> out(count);
  for (size_t i = 0; i < count; ++i) out[i] = keys[i].second;
  return out;
}

std::vector<int32_t> sample_center_order(const KnowledgeGraph& kg, Rng& rng) {
  const auto& train = kg.train();
  std::vector<int32_t> indices(train.size());
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<double> weights(train.size());
  for (size_t i = 0; i < train.size(); ++i)
    weights[i] = static_cast<double>(kg.triple_degree(train[i]));
  return weighted_sample_without_replacement(indices, weights, train.size(), rng);
}

ContextSubgraph sample_context(const KnowledgeGraph& kg, const Triple& center, int64_t center_key,
                               int k, Rng& rng, bool uniform_weights) {
  if (k < 0) throw std::invalid_argument("sample_context: k must be >= 0");
  ContextSubgraph sub;
  sub.center = center;
  sub.center_key = center_key;
  if (k == 0) return sub;

  int32_t exclude = center_key >= 0 ? static_cast<int32_t>(center_key) : -1;
  std::vector<int32_t> candidates = kg.neighborhood(center, exclude);
  if (candidates.empty()) return sub;

  std::vector<double> weights(candidates.size(), 1.0);
  if (!uniform_weights)
    for (size_t i = 0; i < candidates.size(); ++i)
      weights[i] = static_cast<double>(kg.triple_degree(kg.train()[static_cast<size_t>(candidates[i])]));

  std::vector<int32_t> chosen =
      weighted_sample_without_replacement(candidates, weights, static_cast<size_t>(k), rng);
  sub.context.reserve(chosen.size());
  for (int32_t idx : chosen) sub.context.push_back(kg.train()[static_cast<size_t>(idx)]);
  return sub;
}

void remove_target_context(ContextSubgraph& sub, int32_t target) {
  std::erase_if(sub.context, [target](const Triple& t) { return t.contains(target); });
}

void linearize(const KnowledgeGraph& kg, ContextSubgraph& sub) {
  auto& nodes = sub.nodes;
  nodes.clear();
  nodes.push_back(kg.global_id());
  nodes.push_back(sub.center.head);
  nodes.push_back(sub.center.rel);
  nodes.push_back(sub.center.tail);

  auto position_of = [&nodes](int32_t node) -> int {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == node) return static_cast<int>(i);
    return -1;
  };
  auto intern = [&](int32_t node) -> int {
    int pos = position_of(node);
    if (pos >= 0) return pos;
    nodes.push_back(node);
    return static_cast<int>(nodes.size()) - 1;
  };

  struct Edge {
    int a, b;
  };
  std::vector<Edge> edges;
  edges.push_back({1, 2});  // s-p
  edges.push_back({2, 3});  // p-o
  for (const Triple& t : sub.context) {
    int s = intern(t.head);
    int p = intern(t.rel);
    int o = intern(t.tail);
    edges.push_back({s, p});
    edges.push_back({p, o});
  }

  const int l = static_cast<int>(nodes.size());
  sub.adjacency = SquareMat(l);
  for (const Edge& e : edges) {
    if (e.a == e.b) continue;  // a self-loop center collapses s-p / p-o onto one pair
    sub.adjacency.at(e.a, e.b) = 1.0;
    sub.adjacency.at(e.b, e.a) = 1.0;
  }
  for (int i = 1; i < l; ++i) {
    sub.adjacency.at(0, i) = 1.0;
    sub.adjacency.at(i, 0) = 1.0;
  }
}

MaskedSample mask_center(const KnowledgeGraph& kg, ContextSubgraph sub, MaskPolicy policy,
                         Rng& rng) {
  Slot slot = Slot::Tail;
  switch (policy) {
    case MaskPolicy::Head: slot = Slot::Head; break;
    case MaskPolicy::Relation: slot = Slot::Relation; break;
    case MaskPolicy::Tail: slot = Slot::Tail; break;
    case MaskPolicy::RandomEntity:
      slot = (rng() & 1u) ? Slot::Tail : Slot::Head;
      break;
  }
  int position;
  int32_t target;
  switch (slot) {
    case Slot::Head: position = 1; target = sub.center.head; break;
    case Slot::Relation: position = 2; target = sub.center.rel; break;
    case Slot::Tail: position = 3; target = sub.center.tail; break;
    default: throw std::logic_error("bad slot");
  }

  remove_target_context(sub, target);
  linearize(kg, sub);

  MaskedSample out;
  out.sequence = sub.nodes;
  out.sequence[static_cast<size_t>(position)] = kg.mask_id();
  out.adjacency = std::move(sub.adjacency);
  out.target = target;
  out.mask_slot = slot;
  out.center_key = sub.center_key;
  return out;
}

}  // namespace relphormer
