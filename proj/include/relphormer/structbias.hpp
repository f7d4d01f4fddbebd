#pragma once

#include <vector>

#include "relphormer/matrix.hpp"

namespace relphormer {

// Powers of the normalized adjacency: powers[t] = A_norm^(t+1), t = 0..m-1.
struct AdjacencyStack {
  std::vector<SquareMat> powers;
  int order() const { return static_cast<int>(powers.size()); }
  int dim() const { return powers.empty() ? 0 : powers.front().n; }
};

// Per-head structural attention bias phi_h, each L x L.
struct BiasMatrix {
  std::vector<SquareMat> per_head;
};

// Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2 where D is
// the degree matrix of A + I. Input must be symmetric with zero diagonal.
SquareMat normalize_adjacency(const SquareMat& a);

// Exact repeated multiplication; m >= 1.
AdjacencyStack adjacency_powers(const SquareMat& a_norm, int m);

// phi_h[i][j] = sum_t w[h][t] * powers[t][i][j] + b[h]. `weights` is
// heads x (m+1), row-major, the last column being the bias.
BiasMatrix structure_bias(const AdjacencyStack& stack, const std::vector<double>& weights,
                          int heads);

}  // namespace relphormer
