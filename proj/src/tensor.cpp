#include "relphormer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace relphormer {
namespace num {

namespace {

size_t shape_size(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

[[noreturn]] void shape_error(const std::string& op, const std::vector<int>& a,
                              const std::vector<int>& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_rank2(const std::string& op, const Tensor& t) {
  if (t.shape().size() != 2)
    throw std::invalid_argument(op + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

// C(n x m) += A(n x k) * B(k x m)
void gemm_nn(int n, int k, int m, const double* a, const double* b, double* c) {
  for (int i = 0; i < n; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(p) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(n x m) += A(n x k) * B(m x k)^T
void gemm_nt(int n, int k, int m, const double* a, const double* b, double* c) {
  for (int i = 0; i < n; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C(k x m) += A(n x k)^T * B(n x m)
void gemm_tn(int n, int k, int m, const double* a, const double* b, double* c) {
  for (int r = 0; r < n; ++r) {
    const double* arow = a + static_cast<size_t>(r) * k;
    const double* brow = b + static_cast<size_t>(r) * m;
    for (int i = 0; i < k; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(i) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor make_node(std::vector<int> shape, std::vector<double> values, std::vector<Tensor> parents,
                 std::function<void(const std::vector<double>&, TensorImpl&,
                                    const std::vector<std::vector<double>*>&)>
                     back) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->parents = std::move(parents);
  impl->backward_fn = std::move(back);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  size_t n = shape_size(shape);
  return make_node(std::move(shape), std::vector<double>(n, 0.0), {}, nullptr);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_size(shape) != values.size())
    throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) + " needs " +
                                std::to_string(shape_size(shape)) + " values, got " +
                                std::to_string(values.size()));
  return make_node(std::move(shape), std::move(values), {}, nullptr);
}

Tensor Tensor::scalar(double v) { return make_node({}, {v}, {}, nullptr); }

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
size_t Tensor::size() const { return impl_->values.size(); }

int Tensor::rows() const {
  require_rank2("rows", *this);
  return impl_->shape[0];
}
int Tensor::cols() const {
  require_rank2("cols", *this);
  return impl_->shape[1];
}

std::vector<double>& Tensor::values() { return impl_->values; }
const std::vector<double>& Tensor::values() const { return impl_->values; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor is not scalar");
  return impl_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}
std::vector<double>& Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}
void Tensor::zero_grad() { impl_->grad.assign(impl_->values.size(), 0.0); }

Tensor Tensor::detach() const { return Tensor::from(impl_->shape, impl_->values); }

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(static_cast<size_t>(n) * m, 0.0);
  gemm_nn(n, k, m, a.values().data(), b.values().data(), out.data());
  return make_node({n, m}, std::move(out), {a, b},
                   [n, k, m](const std::vector<double>& g, TensorImpl& self,
                             const std::vector<std::vector<double>*>& pg) {
                     const auto& av = self.parents[0].values();
                     const auto& bv = self.parents[1].values();
                     gemm_nt(n, m, k, g.data(), bv.data(), pg[0]->data());  // gA += g * B^T
                     gemm_tn(n, k, m, av.data(), g.data(), pg[1]->data());  // gB += A^T * g
                   });
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  require_rank2("matvec", m);
  if (v.shape().size() != 1 || m.cols() != v.shape()[0]) shape_error("matvec", m.shape(), v.shape());
  const int n = m.rows(), k = m.cols();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  const double* mv = m.values().data();
  const double* vv = v.values().data();
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* rowp = mv + static_cast<size_t>(i) * k;
    for (int j = 0; j < k; ++j) acc += rowp[j] * vv[j];
    out[static_cast<size_t>(i)] = acc;
  }
  return make_node({n}, std::move(out), {m, v},
                   [n, k](const std::vector<double>& g, TensorImpl& self,
                          const std::vector<std::vector<double>*>& pg) {
                     const auto& mv = self.parents[0].values();
                     const auto& vv = self.parents[1].values();
                     for (int i = 0; i < n; ++i) {
                       const double gi = g[static_cast<size_t>(i)];
                       if (gi == 0.0) continue;
                       double* gm = pg[0]->data() + static_cast<size_t>(i) * k;
                       const double* rowp = mv.data() + static_cast<size_t>(i) * k;
                       double* gv = pg[1]->data();
                       for (int j = 0; j < k; ++j) {
                         gm[j] += gi * vv[static_cast<size_t>(j)];
                         gv[j] += gi * rowp[j];
                       }
                     }
                   });
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const int n = a.rows(), m = a.cols();
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      out[static_cast<size_t>(j) * n + i] = av[static_cast<size_t>(i) * m + j];
  return make_node({m, n}, std::move(out), {a},
                   [n, m](const std::vector<double>& g, TensorImpl&,
                          const std::vector<std::vector<double>*>& pg) {
                     for (int j = 0; j < m; ++j)
                       for (int i = 0; i < n; ++i)
                         (*pg[0])[static_cast<size_t>(i) * m + j] += g[static_cast<size_t>(j) * n + i];
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_node(a.shape(), std::move(out), {a, b},
                   [](const std::vector<double>& g, TensorImpl&,
                      const std::vector<std::vector<double>*>& pg) {
                     for (size_t i = 0; i < g.size(); ++i) {
                       (*pg[0])[i] += g[i];
                       (*pg[1])[i] += g[i];
                     }
                   });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_rank2("add_rowvec", m);
  if (v.shape().size() != 1 || v.shape()[0] != m.cols())
    shape_error("add_rowvec", m.shape(), v.shape());
  const int n = m.rows(), d = m.cols();
  std::vector<double> out(m.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out[static_cast<size_t>(i) * d + j] =
          m.values()[static_cast<size_t>(i) * d + j] + v.values()[static_cast<size_t>(j)];
  return make_node({n, d}, std::move(out), {m, v},
                   [n, d](const std::vector<double>& g, TensorImpl&,
                          const std::vector<std::vector<double>*>& pg) {
                     for (int i = 0; i < n; ++i)
                       for (int j = 0; j < d; ++j) {
                         const double gv = g[static_cast<size_t>(i) * d + j];
                         (*pg[0])[static_cast<size_t>(i) * d + j] += gv;
                         (*pg[1])[static_cast<size_t>(j)] += gv;
                       }
                   });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return make_node(a.shape(), std::move(out), {a},
                   [c](const std::vector<double>& g, TensorImpl&,
                       const std::vector<std::vector<double>*>& pg) {
                     for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += c * g[i];
                   });
}

Tensor softmax_rows(const Tensor& a) {
  int n, d;
  if (a.shape().size() == 1) {
    n = 1;
    d = a.shape()[0];
  } else if (a.shape().size() == 2) {
    n = a.shape()[0];
    d = a.shape()[1];
  } else {
    throw std::invalid_argument("softmax_rows: expected rank 1 or 2, got " + shape_str(a.shape()));
  }
  std::vector<double> out(a.size());
  for (int i = 0; i < n; ++i) {
    const double* x = a.values().data() + static_cast<size_t>(i) * d;
    double* y = out.data() + static_cast<size_t>(i) * d;
    double mx = x[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (int j = 0; j < d; ++j) y[j] /= sum;
  }
  return make_node(a.shape(), std::move(out), {a},
                   [n, d](const std::vector<double>& g, TensorImpl& self,
                          const std::vector<std::vector<double>*>& pg) {
                     for (int i = 0; i < n; ++i) {
                       const double* p = self.values.data() + static_cast<size_t>(i) * d;
                       const double* gr = g.data() + static_cast<size_t>(i) * d;
                       double dot = 0.0;
                       for (int j = 0; j < d; ++j) dot += gr[j] * p[j];
                       double* gi = pg[0]->data() + static_cast<size_t>(i) * d;
                       for (int j = 0; j < d; ++j) gi[j] += p[j] * (gr[j] - dot);
                     }
                   });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& shift) {
  require_rank2("layer_norm_rows", a);
  const int n = a.rows(), d = a.cols();
  if (gain.shape() != std::vector<int>{d}) shape_error("layer_norm_rows gain", a.shape(), gain.shape());
  if (shift.shape() != std::vector<int>{d}) shape_error("layer_norm_rows shift", a.shape(), shift.shape());
  constexpr double kEps = 1e-12;
  std::vector<double> out(a.size());
  std::vector<double> xhat(a.size());     // kept by the closure
  std::vector<double> inv_std(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* x = a.values().data() + static_cast<size_t>(i) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = x[j] - mean;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + kEps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int j = 0; j < d; ++j) {
      const size_t idx = static_cast<size_t>(i) * d + j;
      xhat[idx] = (x[j] - mean) * is;
      out[idx] = xhat[idx] * gain.values()[static_cast<size_t>(j)] +
                 shift.values()[static_cast<size_t>(j)];
    }
  }
  return make_node(
      {n, d}, std::move(out), {a, gain, shift},
      [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          const std::vector<double>& g, TensorImpl& self,
          const std::vector<std::vector<double>*>& pg) {
        const auto& gainv = self.parents[1].values();
        for (int i = 0; i < n; ++i) {
          const size_t off = static_cast<size_t>(i) * d;
          // d out/d xhat = gain; then standard layer-norm backward per row
          double mean_g = 0.0, mean_gx = 0.0;
          for (int j = 0; j < d; ++j) {
            const double gh = g[off + j] * gainv[static_cast<size_t>(j)];
            mean_g += gh;
            mean_gx += gh * xhat[off + j];
          }
          mean_g /= d;
          mean_gx /= d;
          for (int j = 0; j < d; ++j) {
            const double gh = g[off + j] * gainv[static_cast<size_t>(j)];
            (*pg[0])[off + j] += inv_std[static_cast<size_t>(i)] *
                                 (gh - mean_g - xhat[off + j] * mean_gx);
            (*pg[1])[static_cast<size_t>(j)] += g[off + j] * xhat[off + j];
            (*pg[2])[static_cast<size_t>(j)] += g[off + j];
          }
        }
      });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  return make_node(a.shape(), std::move(out), {a},
                   [](const std::vector<double>& g, TensorImpl& self,
                      const std::vector<std::vector<double>*>& pg) {
                     const auto& x = self.parents[0].values();
                     for (size_t i = 0; i < g.size(); ++i)
                       if (x[i] > 0.0) (*pg[0])[i] += g[i];
                   });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = a.values()[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  return make_node(a.shape(), std::move(out), {a},
                   [](const std::vector<double>& g, TensorImpl& self,
                      const std::vector<std::vector<double>*>& pg) {
                     const auto& xv = self.parents[0].values();
                     for (size_t i = 0; i < g.size(); ++i) {
                       const double x = xv[i];
                       const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                       const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                       (*pg[0])[i] += g[i] * (cdf + x * pdf);
                     }
                   });
}

Tensor embedding_gather(const Tensor& table, const std::vector<int32_t>& ids) {
  require_rank2("embedding_gather", table);
  const int v = table.rows(), d = table.cols();
  for (int32_t id : ids)
    if (id < 0 || id >= v)
      throw std::out_of_range("embedding_gather: id " + std::to_string(id) +
                              " outside table of " + std::to_string(v) + " rows");
  const int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    std::copy_n(table.values().data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d, d,
                out.data() + static_cast<size_t>(i) * d);
  return make_node({n, d}, std::move(out), {table},
                   [ids, d](const std::vector<double>& g, TensorImpl&,
                            const std::vector<std::vector<double>*>& pg) {
                     for (size_t i = 0; i < ids.size(); ++i) {
                       double* dst = pg[0]->data() + static_cast<size_t>(ids[i]) * d;
                       const double* src = g.data() + i * static_cast<size_t>(d);
                       for (int j = 0; j < d; ++j) dst[j] += src[j];
                     }
                   });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const int n = parts.front().rows();
  int total = 0;
  for (const Tensor& p : parts) {
    require_rank2("concat_cols", p);
    if (p.rows() != n) shape_error("concat_cols", parts.front().shape(), p.shape());
    total += p.cols();
  }
  std::vector<double> out(static_cast<size_t>(n) * total);
  std::vector<int> offsets;
  int off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const int d = p.cols();
    for (int i = 0; i < n; ++i)
      std::copy_n(p.values().data() + static_cast<size_t>(i) * d, d,
                  out.data() + static_cast<size_t>(i) * total + off);
    off += d;
  }
  return make_node({n, total}, std::move(out), parts,
                   [n, total, offsets](const std::vector<double>& g, TensorImpl& self,
                                       const std::vector<std::vector<double>*>& pg) {
                     for (size_t p = 0; p < self.parents.size(); ++p) {
                       const int d = self.parents[p].cols();
                       for (int i = 0; i < n; ++i) {
                         const double* src =
                             g.data() + static_cast<size_t>(i) * total + offsets[p];
                         double* dst = pg[p]->data() + static_cast<size_t>(i) * d;
                         for (int j = 0; j < d; ++j) dst[j] += src[j];
                       }
                     }
                   });
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  require_rank2("slice_cols", a);
  const int n = a.rows(), d = a.cols();
  if (start < 0 || len <= 0 || start + len > d)
    throw std::invalid_argument("slice_cols: [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") outside " + shape_str(a.shape()));
  std::vector<double> out(static_cast<size_t>(n) * len);
  for (int i = 0; i < n; ++i)
    std::copy_n(a.values().data() + static_cast<size_t>(i) * d + start, len,
                out.data() + static_cast<size_t>(i) * len);
  return make_node({n, len}, std::move(out), {a},
                   [n, d, start, len](const std::vector<double>& g, TensorImpl&,
                                      const std::vector<std::vector<double>*>& pg) {
                     for (int i = 0; i < n; ++i) {
                       const double* src = g.data() + static_cast<size_t>(i) * len;
                       double* dst = pg[0]->data() + static_cast<size_t>(i) * d + start;
                       for (int j = 0; j < len; ++j) dst[j] += src[j];
                     }
                   });
}

Tensor row(const Tensor& a, int i) {
  require_rank2("row", a);
  const int n = a.rows(), d = a.cols();
  if (i < 0 || i >= n) throw std::out_of_range("row: index " + std::to_string(i));
  std::vector<double> out(a.values().begin() + static_cast<ptrdiff_t>(i) * d,
                          a.values().begin() + static_cast<ptrdiff_t>(i + 1) * d);
  return make_node({d}, std::move(out), {a},
                   [i, d](const std::vector<double>& g, TensorImpl&,
                          const std::vector<std::vector<double>*>& pg) {
                     double* dst = pg[0]->data() + static_cast<size_t>(i) * d;
                     for (int j = 0; j < d; ++j) dst[j] += g[static_cast<size_t>(j)];
                   });
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars: empty");
  std::vector<double> out;
  out.reserve(scalars.size());
  for (const Tensor& s : scalars) {
    if (s.size() != 1) throw std::invalid_argument("stack_scalars: non-scalar element");
    out.push_back(s.values()[0]);
  }
  return make_node({static_cast<int>(scalars.size())}, std::move(out), scalars,
                   [](const std::vector<double>& g, TensorImpl&,
                      const std::vector<std::vector<double>*>& pg) {
                     for (size_t i = 0; i < g.size(); ++i) (*pg[i])[0] += g[i];
                   });
}

Tensor sum_all(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return make_node({}, {s}, {a},
                   [](const std::vector<double>& g, TensorImpl&,
                      const std::vector<std::vector<double>*>& pg) {
                     for (double& x : *pg[0]) x += g[0];
                   });
}

Tensor weighted_sum(const Tensor& a, const std::vector<double>& w) {
  if (w.size() != a.size())
    throw std::invalid_argument("weighted_sum: " + std::to_string(w.size()) + " weights for " +
                                std::to_string(a.size()) + " values");
  double s = 0.0;
  for (size_t i = 0; i < w.size(); ++i) s += w[i] * a.values()[i];
  return make_node({}, {s}, {a},
                   [w](const std::vector<double>& g, TensorImpl&,
                       const std::vector<std::vector<double>*>& pg) {
                     for (size_t i = 0; i < w.size(); ++i) (*pg[0])[i] += g[0] * w[i];
                   });
}

Tensor cross_entropy(const Tensor& logits, int target) {
  if (logits.shape().size() != 1)
    throw std::invalid_argument("cross_entropy: expected rank-1 logits, got " +
                                shape_str(logits.shape()));
  const int n = logits.shape()[0];
  if (target < 0 || target >= n)
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " outside " +
                            std::to_string(n) + " classes");
  const auto& x = logits.values();
  double mx = x[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, x[static_cast<size_t>(j)]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(x[static_cast<size_t>(j)] - mx);
  const double loss = mx + std::log(sum) - x[static_cast<size_t>(target)];
  return make_node({}, {loss}, {logits},
                   [n, target, mx, sum](const std::vector<double>& g, TensorImpl& self,
                                        const std::vector<std::vector<double>*>& pg) {
                     const auto& x = self.parents[0].values();
                     for (int j = 0; j < n; ++j) {
                       double p = std::exp(x[static_cast<size_t>(j)] - mx) / sum;
                       (*pg[0])[static_cast<size_t>(j)] += g[0] * (p - (j == target ? 1.0 : 0.0));
                     }
                   });
}

Tensor bce_with_logits(const Tensor& logits, int target) {
  if (logits.shape().size() != 1)
    throw std::invalid_argument("bce_with_logits: expected rank-1 logits, got " +
                                shape_str(logits.shape()));
  const int n = logits.shape()[0];
  if (target < 0 || target >= n)
    throw std::out_of_range("bce_with_logits: target " + std::to_string(target) + " outside " +
                            std::to_string(n) + " classes");
  auto softplus = [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); };
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = logits.values()[static_cast<size_t>(j)];
    loss += (j == target) ? softplus(-x) : softplus(x);
  }
  return make_node({}, {loss}, {logits},
                   [n, target](const std::vector<double>& g, TensorImpl& self,
                               const std::vector<std::vector<double>*>& pg) {
                     const auto& x = self.parents[0].values();
                     for (int j = 0; j < n; ++j) {
                       const double sig = 1.0 / (1.0 + std::exp(-x[static_cast<size_t>(j)]));
                       (*pg[0])[static_cast<size_t>(j)] += g[0] * (sig - (j == target ? 1.0 : 0.0));
                     }
                   });
}

Tensor cosine_const(const Tensor& v, const std::vector<double>& ref) {
  if (v.shape().size() != 1 || v.size() != ref.size())
    throw std::invalid_argument("cosine_const: dimension mismatch " + shape_str(v.shape()) +
                                " vs (" + std::to_string(ref.size()) + ")");
  double vv = 0.0, rr = 0.0, vr = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    vv += v.values()[i] * v.values()[i];
    rr += ref[i] * ref[i];
    vr += v.values()[i] * ref[i];
  }
  if (vv == 0.0 || rr == 0.0)
    throw std::invalid_argument("cosine_const: zero-norm vector, cosine undefined");
  const double nv = std::sqrt(vv), nr = std::sqrt(rr);
  const double cosv = vr / (nv * nr);
  return make_node({}, {cosv}, {v},
                   [ref, nv, nr, cosv](const std::vector<double>& g, TensorImpl& self,
                                       const std::vector<std::vector<double>*>& pg) {
                     const auto& x = self.parents[0].values();
                     for (size_t i = 0; i < ref.size(); ++i)
                       (*pg[0])[i] += g[0] * (ref[i] / (nv * nr) - cosv * x[i] / (nv * nv));
                   });
}

Tensor lincomb_mats(const std::vector<SquareMat>& mats, const Tensor& coeffs) {
  if (coeffs.shape().size() != 1 || coeffs.size() != mats.size())
    throw std::invalid_argument("lincomb_mats: " + std::to_string(mats.size()) +
                                " matrices need " + std::to_string(mats.size()) +
                                " coefficients, got " + shape_str(coeffs.shape()));
  if (mats.empty()) throw std::invalid_argument("lincomb_mats: empty");
  const int n = mats.front().n;
  for (const SquareMat& m : mats)
    if (m.n != n) throw std::invalid_argument("lincomb_mats: matrix size mismatch");
  std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
  for (size_t t = 0; t < mats.size(); ++t) {
    const double c = coeffs.values()[t];
    if (c == 0.0) continue;
    for (size_t i = 0; i < out.size(); ++i) out[i] += c * mats[t].v[i];
  }
  return make_node({n, n}, std::move(out), {coeffs},
                   [mats](const std::vector<double>& g, TensorImpl&,
                          const std::vector<std::vector<double>*>& pg) {
                     for (size_t t = 0; t < mats.size(); ++t) {
                       double acc = 0.0;
                       for (size_t i = 0; i < g.size(); ++i) acc += g[i] * mats[t].v[i];
                       (*pg[0])[t] += acc;
                     }
                   });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.size());
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) {
    mask[i] = keep(rng) ? scale : 0.0;
    out[i] = a.values()[i] * mask[i];
  }
  return make_node(a.shape(), std::move(out), {a},
                   [mask = std::move(mask)](const std::vector<double>& g, TensorImpl&,
                                            const std::vector<std::vector<double>*>& pg) {
                     for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * mask[i];
                   });
}

// ---- backward ----

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward: loss must be a defined scalar tensor");

  // iterative post-order DFS
  std::vector<TensorImpl*> topo;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(loss.impl(), 0);
  visited.insert(loss.impl());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next].impl();
      ++next;
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<TensorImpl*, std::vector<double>> pass_grad;
  pass_grad.reserve(topo.size() * 2);
  for (TensorImpl* n : topo) pass_grad.emplace(n, std::vector<double>(n->values.size(), 0.0));
  pass_grad[loss.impl()][0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorImpl* node = *it;
    if (!node->backward_fn) continue;
    std::vector<std::vector<double>*> parent_bufs;
    parent_bufs.reserve(node->parents.size());
    for (const Tensor& p : node->parents) parent_bufs.push_back(&pass_grad.at(p.impl()));
    node->backward_fn(pass_grad.at(node), *node, parent_bufs);
  }

  for (TensorImpl* n : topo) {
    if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
    const auto& pg = pass_grad.at(n);
    for (size_t i = 0; i < pg.size(); ++i) n->grad[i] += pg[i];
  }
}

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps) {
  for (const Tensor& p : params) p.impl()->grad.clear();
  Tensor loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values()[i];
      p.values()[i] = saved + eps;
      const double up = f().item();
      p.values()[i] = saved - eps;
      const double down = f().item();
      p.values()[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic[pi][i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-2});
      worst = std::max(worst, rel);
    }
  }
  for (const Tensor& p : params) p.impl()->grad.clear();
  return worst;
}

}  // namespace num
}  // namespace relphormer
