#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relphormer/kg.hpp"
#include "relphormer/structbias.hpp"
#include "relphormer/tensor.hpp"
#include "relphormer/triple2seq.hpp"

namespace relphormer {

enum class LossKind { CrossEntropy, BinaryCrossEntropy };

struct ModelConfig {
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 256;
  int vocab = 0;         // |E| + |R| + 2, filled from the KG
  int m = 2;             // adjacency power order
  double tau = 0.05;     // contrastive temperature
  double lambda = 0.1;   // contrastive weight in the joint loss
  double dropout = 0.0;
  LossKind loss_kind = LossKind::CrossEntropy;
  bool per_layer_bias = false;   // separate structure encoder per layer
  bool use_struct_bias = true;   // ablation switch

  void validate() const;
  int head_dim() const { return hidden / heads; }
};

struct LayerParams {
  num::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  num::Tensor ln1_gain, ln1_shift;
  num::Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  num::Tensor ln2_gain, ln2_shift;
};

// All learnable state. The output head is the embedding table itself (tied by
// sharing the Tensor handle, not by copying).
struct ModelParams {
  num::Tensor embed;                       // vocab x d; rows double as output weights
  std::vector<LayerParams> layers;
  std::vector<num::Tensor> struct_weights; // each heads x (m+1); one, or one per layer

  static ModelParams init(const ModelConfig& cfg, uint64_t seed);

  std::vector<std::pair<std::string, num::Tensor>> named() const;
  std::vector<num::Tensor> all() const;
  void zero_grad() const;
  // Restores tensors from a checkpoint listing; throws CheckpointError-style
  // std::runtime_error on any missing name or shape mismatch.
  void load_from(const std::vector<std::pair<std::string, num::Tensor>>& tensors);
  ModelParams clone() const;
};

// Per-layer, per-head post-softmax attention and the structural bias, captured
// for the inspect-attn surface.
struct AttentionRecord {
  // attn[layer][head] and phi[head], each L x L row-major
  std::vector<std::vector<std::vector<double>>> attn;
  std::vector<std::vector<double>> phi;
  int seq_len = 0;
};

struct ForwardResult {
  num::Tensor logits;  // vocab-sized
  num::Tensor hidden;  // d-sized hidden at the MASK position (c vector)
};

// Encoder forward on one sample. Hidden is read at the MASK position when one
// is present, else at the global node (the score-all benchmark path).
// `dropout_rng` is only touched when cfg.dropout > 0. `record` captures
// attention matrices when non-null.
ForwardResult forward(const ModelParams& params, const ModelConfig& cfg,
                      const MaskedSample& sample, std::mt19937_64* dropout_rng = nullptr,
                      AttentionRecord* record = nullptr);

num::Tensor mkm_loss(const num::Tensor& logits, int32_t target, LossKind kind);

// InfoNCE over cosine similarities; positive is the same center's vector from
// the previous epoch, negatives belong to other centers. No gradient reaches
// the stored vectors.
num::Tensor contextual_loss(const num::Tensor& c_t, const std::vector<double>& c_prev,
                            const std::vector<std::vector<double>>& negatives, double tau);

// center_key -> detached hidden vector recorded last epoch.
class ContrastiveBank {
 public:
  void update(int64_t center_key, const num::Tensor& c);
  const std::vector<double>* lookup(int64_t center_key) const;
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }
  void swap(ContrastiveBank& other) { entries_.swap(other.entries_); }

 private:
  std::unordered_map<int64_t, std::vector<double>> entries_;
};

// Overwrites matching vocabulary rows from a two-column TSV
// (label <TAB> whitespace-separated floats). Returns the number of rows
// applied; unknown labels are skipped, a wrong vector width throws.
int import_embeddings(const KnowledgeGraph& kg, ModelParams& params, const std::string& path);

}  // namespace relphormer
