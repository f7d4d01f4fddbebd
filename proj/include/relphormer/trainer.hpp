#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relphormer/kg.hpp"
#include "relphormer/model.hpp"
#include "relphormer/triple2seq.hpp"

namespace relphormer {

// Non-finite loss or gradient; the CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 5e-3;
  int batch = 32;             // realized as gradient accumulation
  int epochs = 60;
  double warmup = 0.1;        // fraction of total optimizer steps, in [0,1)
  double clip = 1.0;          // global gradient norm
  double weight_decay = 0.01; // decoupled; rank-2 tensors only
  int patience = 8;           // epochs without valid MRR gain before stopping
  int k_context = 4;          // context triples per Triple2Seq sample
  int k_infer = 4;            // Eq. 8 sample count at test time
  int k_valid = 1;            // sample count for the per-epoch validation pass
  uint64_t seed = 17;
  MaskPolicy policy = MaskPolicy::RandomEntity;  // entity vs relation prediction
  bool avg_logits = false;    // ablation: average logits instead of probabilities
  bool uniform_context = false;

  void validate() const;
};

// Linear warmup to lr_max at step == warmup_end, then linear decay to 0 at
// step == total. Steps are 1-based.
double lr_at(int step, int total_steps, double lr_max, double warmup_frac);

double total_loss(double mkm, double contextual, double lambda);

struct DirMetrics {
  double mr = 0.0, mrr = 0.0, hits1 = 0.0, hits3 = 0.0, hits10 = 0.0;
  int queries = 0;
};

struct Metrics {
  std::string setting;  // "raw" or "filtered"
  std::vector<std::pair<std::string, DirMetrics>> directions;  // head/tail or relation
  DirMetrics averaged;  // over all queries
};

std::string metrics_json(const Metrics& m, int epoch, const std::string& split,
                         double loss_mkm, double loss_contextual);

// ---- inference ----

void softmax_inplace(std::vector<double>& v);
std::vector<double> mean_rows(const std::vector<std::vector<double>>& rows);

// Eq. 8: K independent Triple2Seq draws of the masked query, averaged
// post-softmax (or pre-softmax when avg_logits). Vocab-sized distribution.
std::vector<double> infer_multi(const ModelParams& params, const ModelConfig& cfg,
                                const KnowledgeGraph& kg, const Triple& query, Slot slot,
                                int K, int k_context, Rng& rng, bool avg_logits = false);

// ---- ranking evaluation ----

struct Query {
  Triple triple;
  Slot slot;
};

// Vocab-sized score vector for one query; only the legal candidate range for
// the masked slot is consulted.
using Scorer = std::function<std::vector<double>(const Triple& query, Slot slot)>;

// Tie-aware filtered/raw ranking. Ties receive the mean rank of their block.
Metrics rank_queries(const KnowledgeGraph& kg, const std::vector<Query>& queries,
                     bool filtered, const Scorer& scorer);

// Head+tail queries per triple under entity policies, relation-only otherwise.
std::vector<Query> split_queries(const KnowledgeGraph& kg, Split split, MaskPolicy policy);

Metrics evaluate(const ModelParams& params, const ModelConfig& cfg, const KnowledgeGraph& kg,
                 Split split, bool filtered, MaskPolicy policy, int K, int k_context,
                 uint64_t seed, bool avg_logits = false);

// ---- training ----

// Scales all gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(const std::vector<num::Tensor>& params, double max_norm);

struct TrainResult {
  int epochs_run = 0;
  int best_epoch = -1;      // -1 when no valid split (last params kept)
  double best_mrr = 0.0;
  std::vector<double> epoch_loss_mkm;
  std::vector<double> epoch_loss_contextual;
};

// Algorithm 1. Resamples contexts every epoch, masks per policy, accumulates
// cfg.batch sample gradients per optimizer step, clips, then applies AdamW
// with the warmup/decay schedule. Validates (filtered MRR) after each epoch
// when a valid split exists and restores the best snapshot at the end.
// JSON-lines progress goes to `log` when non-null.
TrainResult train(const KnowledgeGraph& kg, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  ModelParams& params, std::ostream* log = nullptr);

// ---- inference cost benchmark ----

struct BenchReport {
  int queries = 0;
  int k_infer = 1;
  int64_t masked_forwards = 0;
  int64_t scoreall_forwards = 0;
  double masked_seconds = 0.0;
  double scoreall_seconds = 0.0;

  double masked_per_query() const { return double(masked_forwards) / queries; }
  double scoreall_per_query() const { return double(scoreall_forwards) / queries; }
  double count_ratio() const { return double(scoreall_forwards) / double(masked_forwards); }
  double speedup() const { return scoreall_seconds / masked_seconds; }
};

// Masked prediction (K forwards/query) against a score-every-entity baseline
// that re-runs the encoder once per candidate on the same queries.
BenchReport bench_inference(const ModelParams& params, const ModelConfig& cfg,
                            const KnowledgeGraph& kg, int n_queries, int K, int k_context,
                            uint64_t seed);

std::string bench_json(const BenchReport& r);

}  // namespace relphormer
