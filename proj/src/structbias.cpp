#include "relphormer/structbias.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace relphormer {

SquareMat normalize_adjacency(const SquareMat& a) {
  if (!a.symmetric()) throw std::invalid_argument("normalize_adjacency: input not symmetric");
  const int n = a.n;
  std::vector<double> inv_sqrt_deg(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double d = 1.0;  // self-loop
    for (int j = 0; j < n; ++j) d += a.at(i, j);
    inv_sqrt_deg[static_cast<size_t>(i)] = 1.0 / std::sqrt(d);
  }
  SquareMat out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double aii = a.at(i, j) + (i == j ? 1.0 : 0.0);
      if (aii != 0.0)
        out.at(i, j) = aii * inv_sqrt_deg[static_cast<size_t>(i)] * inv_sqrt_deg[static_cast<size_t>(j)];
    }
  return out;
}

AdjacencyStack adjacency_powers(const SquareMat& a_norm, int m) {
  if (m < 1) throw std::invalid_argument("adjacency_powers: m must be >= 1, got " + std::to_string(m));
  AdjacencyStack stack;
  stack.powers.reserve(static_cast<size_t>(m));
  stack.powers.push_back(a_norm);
  for (int t = 1; t < m; ++t) stack.powers.push_back(stack.powers.back().mul(a_norm));
  return stack;
}

BiasMatrix structure_bias(const AdjacencyStack& stack, const std::vector<double>& weights,
                          int heads) {
  const int m = stack.order();
  if (static_cast<int>(weights.size()) != heads * (m + 1))
    throw std::invalid_argument("structure_bias: expected " + std::to_string(heads) + "x" +
                                std::to_string(m + 1) + " weights, got " +
                                std::to_string(weights.size()));
  const int n = stack.dim();
  BiasMatrix bias;
  bias.per_head.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const double* w = weights.data() + static_cast<size_t>(h) * (m + 1);
    SquareMat phi(n);
    for (int t = 0; t < m; ++t) {
      if (w[t] == 0.0) continue;
      const SquareMat& p = stack.powers[static_cast<size_t>(t)];
      for (size_t idx = 0; idx < phi.v.size(); ++idx) phi.v[idx] += w[t] * p.v[idx];
    }
    if (w[m] != 0.0)
      for (double& x : phi.v) x += w[m];
    bias.per_head.push_back(std::move(phi));
  }
  return bias;
}

}  // namespace relphormer
