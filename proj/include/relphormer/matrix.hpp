#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace relphormer {

// Dense square matrix, row-major. Used for sub-graph adjacency (0/1 entries)
// and its normalized powers. Sub-graphs are tiny (L <= ~70), so no sparsity.
struct SquareMat {
  int n = 0;
  std::vector<double> v;

  SquareMat() = default;
  explicit SquareMat(int size) : n(size), v(static_cast<size_t>(size) * size, 0.0) {}

  double& at(int i, int j) { return v[static_cast<size_t>(i) * n + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * n + j]; }

  bool symmetric(double tol = 0.0) const {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::abs(at(i, j) - at(j, i)) > tol) return false;
    return true;
  }

  static SquareMat identity(int size) {
    SquareMat m(size);
    for (int i = 0; i < size; ++i) m.at(i, i) = 1.0;
    return m;
  }

  // this * other, exact O(n^3).
  SquareMat mul(const SquareMat& other) const {
    if (n != other.n)
      throw std::invalid_argument("SquareMat::mul: size mismatch " + std::to_string(n) +
                                  " vs " + std::to_string(other.n));
    SquareMat out(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const double a = at(i, k);
        if (a == 0.0) continue;
        for (int j = 0; j < n; ++j) out.at(i, j) += a * other.at(k, j);
      }
    return out;
  }
};

}  // namespace relphormer
