#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "relphormer/matrix.hpp"

namespace relphormer {
namespace num {

struct TensorImpl;

// Dense double-precision tensor participating in a dynamic backward tape.
// Value-semantic handle; copying shares storage. Each op builds a fresh graph
// node, so the tape is rebuilt per forward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double v);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  size_t size() const;
  int rows() const;  // rank-2 only
  int cols() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  double item() const;  // scalar tensors

  // Accumulated gradient; zeros until a backward pass reaches this tensor.
  const std::vector<double>& grad() const;
  std::vector<double>& grad();
  void zero_grad();

  // Fresh leaf holding a copy of the values (no backward graph).
  Tensor detach() const;

  TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
  friend Tensor make_node(std::vector<int> shape, std::vector<double> values,
                          std::vector<Tensor> parents,
                          std::function<void(const std::vector<double>&, TensorImpl&,
                                             const std::vector<std::vector<double>*>&)>
                              back);
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;       // persistent, accumulates across backward passes
  std::vector<Tensor> parents;
  // Receives this node's pass-local gradient and adds into the parents'
  // pass-local buffers (same order as `parents`).
  std::function<void(const std::vector<double>& gout, TensorImpl& self,
                     const std::vector<std::vector<double>*>& parent_grads)>
      backward_fn;
};

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& m, const Tensor& v);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor add_rowvec(const Tensor& m, const Tensor& v);       // (n x d) + (d) per row
Tensor scale(const Tensor& a, double c);
Tensor softmax_rows(const Tensor& a);                      // rank-1 or rank-2
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& shift);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor embedding_gather(const Tensor& table, const std::vector<int32_t>& ids);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor row(const Tensor& a, int i);                        // rank-2 -> rank-1
Tensor stack_scalars(const std::vector<Tensor>& scalars);
Tensor sum_all(const Tensor& a);
Tensor weighted_sum(const Tensor& a, const std::vector<double>& w);  // test scalarizer
Tensor cross_entropy(const Tensor& logits, int target);    // -log softmax(logits)[target]
Tensor bce_with_logits(const Tensor& logits, int target);  // target positive, rest negative
Tensor cosine_const(const Tensor& v, const std::vector<double>& ref);
// Sum_t coeffs[t] * mats[t]; coeffs is rank-1 of length mats.size().
Tensor lincomb_mats(const std::vector<SquareMat>& mats, const Tensor& coeffs);
// Inverted-dropout mask sampled at forward time; rate 0 returns the input.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

// Reverse-mode pass from a scalar loss. Gradients of every reachable tensor
// are accumulated (a second pass without clearing doubles them).
void backward(const Tensor& loss);

// Central finite differences against backward() for every coordinate of every
// param; returns the worst relative error. `f` must rebuild its graph per call.
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps = 1e-5);

}  // namespace num
}  // namespace relphormer
