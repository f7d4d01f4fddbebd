#include "relphormer/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "relphormer/checkpoint.hpp"

namespace relphormer {

using num::Tensor;

void ModelConfig::validate() const {
  if (hidden <= 0 || layers <= 0 || heads <= 0 || ffn <= 0 || vocab <= 0 || m <= 0)
    throw std::invalid_argument("model config: all dimensions must be positive");
  if (hidden % heads != 0)
    throw std::invalid_argument("model config: hidden " + std::to_string(hidden) +
                                " not divisible by heads " + std::to_string(heads));
  if (tau <= 0.0) throw std::invalid_argument("model config: tau must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("model config: lambda must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("model config: dropout must be in [0,1)");
}

namespace {

Tensor uniform_init(std::vector<int> shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor const_init(std::vector<int> shape, double value) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = value;
  return t;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  const int d = cfg.hidden;
  p.embed = uniform_init({cfg.vocab, d}, 0.05, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    const double attn_bound = std::sqrt(6.0 / (d + d));
    const double ff1_bound = std::sqrt(6.0 / (d + cfg.ffn));
    LayerParams lp;
    lp.wq = uniform_init({d, d}, attn_bound, rng);
    lp.bq = Tensor::zeros({d});
    lp.wk = uniform_init({d, d}, attn_bound, rng);
    lp.bk = Tensor::zeros({d});
    lp.wv = uniform_init({d, d}, attn_bound, rng);
    lp.bv = Tensor::zeros({d});
    lp.wo = uniform_init({d, d}, attn_bound, rng);
    lp.bo = Tensor::zeros({d});
    lp.ln1_gain = const_init({d}, 1.0);
    lp.ln1_shift = Tensor::zeros({d});
    lp.ff1_w = uniform_init({d, cfg.ffn}, ff1_bound, rng);
    lp.ff1_b = Tensor::zeros({cfg.ffn});
    lp.ff2_w = uniform_init({cfg.ffn, d}, ff1_bound, rng);
    lp.ff2_b = Tensor::zeros({d});
    lp.ln2_gain = const_init({d}, 1.0);
    lp.ln2_shift = Tensor::zeros({d});
    p.layers.push_back(std::move(lp));
  }
  // structure encoder starts neutral (phi = 0), i.e. a vanilla transformer
  const int encoders = cfg.per_layer_bias ? cfg.layers : 1;
  for (int e = 0; e < encoders; ++e)
    p.struct_weights.push_back(Tensor::zeros({cfg.heads, cfg.m + 1}));
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embed", embed);
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    const LayerParams& lp = layers[l];
    out.emplace_back(pre + "wq", lp.wq);
    out.emplace_back(pre + "bq", lp.bq);
    out.emplace_back(pre + "wk", lp.wk);
    out.emplace_back(pre + "bk", lp.bk);
    out.emplace_back(pre + "wv", lp.wv);
    out.emplace_back(pre + "bv", lp.bv);
    out.emplace_back(pre + "wo", lp.wo);
    out.emplace_back(pre + "bo", lp.bo);
    out.emplace_back(pre + "ln1_gain", lp.ln1_gain);
    out.emplace_back(pre + "ln1_shift", lp.ln1_shift);
    out.emplace_back(pre + "ff1_w", lp.ff1_w);
    out.emplace_back(pre + "ff1_b", lp.ff1_b);
    out.emplace_back(pre + "ff2_w", lp.ff2_w);
    out.emplace_back(pre + "ff2_b", lp.ff2_b);
    out.emplace_back(pre + "ln2_gain", lp.ln2_gain);
    out.emplace_back(pre + "ln2_shift", lp.ln2_shift);
  }
  for (size_t e = 0; e < struct_weights.size(); ++e)
    out.emplace_back("struct" + std::to_string(e), struct_weights[e]);
  return out;
}

std::vector<Tensor> ModelParams::all() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

void ModelParams::zero_grad() const {
  for (const Tensor& t : all()) const_cast<Tensor&>(t).zero_grad();
}

void ModelParams::load_from(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  for (auto& [name, t] : named()) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw CheckpointError("checkpoint mismatch: missing tensor '" + name + "'");
    if (it->second->shape() != t.shape())
      throw CheckpointError("checkpoint mismatch: tensor '" + name + "' has wrong shape");
    const_cast<Tensor&>(t).values() = it->second->values();
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw CheckpointError("checkpoint mismatch: unexpected tensor '" + by_name.begin()->first +
                          "'");
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  out.embed = embed.detach();
  for (const LayerParams& lp : layers) {
    LayerParams c;
    c.wq = lp.wq.detach();
    c.bq = lp.bq.detach();
    c.wk = lp.wk.detach();
    c.bk = lp.bk.detach();
    c.wv = lp.wv.detach();
    c.bv = lp.bv.detach();
    c.wo = lp.wo.detach();
    c.bo = lp.bo.detach();
    c.ln1_gain = lp.ln1_gain.detach();
    c.ln1_shift = lp.ln1_shift.detach();
    c.ff1_w = lp.ff1_w.detach();
    c.ff1_b = lp.ff1_b.detach();
    c.ff2_w = lp.ff2_w.detach();
    c.ff2_b = lp.ff2_b.detach();
    c.ln2_gain = lp.ln2_gain.detach();
    c.ln2_shift = lp.ln2_shift.detach();
    out.layers.push_back(std::move(c));
  }
  for (const Tensor& w : struct_weights) out.struct_weights.push_back(w.detach());
  return out;
}

ForwardResult forward(const ModelParams& params, const ModelConfig& cfg,
                      const MaskedSample& sample, std::mt19937_64* dropout_rng,
                      AttentionRecord* record) {
  const int l_seq = static_cast<int>(sample.sequence.size());
  if (sample.adjacency.n != l_seq)
    throw std::invalid_argument("forward: adjacency " + std::to_string(sample.adjacency.n) +
                                " does not match sequence length " + std::to_string(l_seq));
  const int dh = cfg.head_dim();
  const double drop = dropout_rng ? cfg.dropout : 0.0;
  std::mt19937_64 dummy_rng;
  std::mt19937_64& rng = dropout_rng ? *dropout_rng : dummy_rng;

  // hidden is read at the MASK position; unmasked sequences (the score-all
  // benchmark baseline) read at the global node instead
  int mask_pos = 0;
  for (int i = 0; i < l_seq; ++i)
    if (sample.sequence[static_cast<size_t>(i)] == cfg.vocab - 2) mask_pos = i;

  // structural bias, shared by all layers unless per-layer encoders are on
  std::vector<std::vector<Tensor>> phi;  // [encoder][head], each L x L
  if (cfg.use_struct_bias) {
    AdjacencyStack stack = adjacency_powers(normalize_adjacency(sample.adjacency), cfg.m);
    std::vector<SquareMat> basis = stack.powers;
    SquareMat ones(l_seq);
    for (double& x : ones.v) x = 1.0;
    basis.push_back(std::move(ones));  // bias column
    for (const Tensor& w : params.struct_weights) {
      std::vector<Tensor> heads;
      for (int h = 0; h < cfg.heads; ++h)
        heads.push_back(num::lincomb_mats(basis, num::row(w, h)));
      phi.push_back(std::move(heads));
    }
  }

  if (record) {
    record->attn.clear();
    record->phi.clear();
    record->seq_len = l_seq;
    if (!phi.empty())
      for (const Tensor& p : phi.front()) record->phi.push_back(p.values());
    else
      record->phi.assign(static_cast<size_t>(cfg.heads),
                         std::vector<double>(static_cast<size_t>(l_seq) * l_seq, 0.0));
  }

  Tensor h = num::embedding_gather(params.embed, sample.sequence);
  for (int l = 0; l < cfg.layers; ++l) {
    const LayerParams& lp = params.layers[static_cast<size_t>(l)];
    Tensor q = num::add_rowvec(num::matmul(h, lp.wq), lp.bq);
    Tensor k = num::add_rowvec(num::matmul(h, lp.wk), lp.bk);
    Tensor v = num::add_rowvec(num::matmul(h, lp.wv), lp.bv);

    if (record) record->attn.emplace_back();
    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<size_t>(cfg.heads));
    for (int hd = 0; hd < cfg.heads; ++hd) {
      Tensor qh = num::slice_cols(q, hd * dh, dh);
      Tensor kh = num::slice_cols(k, hd * dh, dh);
      Tensor vh = num::slice_cols(v, hd * dh, dh);
      Tensor scores = num::scale(num::matmul(qh, num::transpose(kh)), 1.0 / std::sqrt(dh));
      if (cfg.use_struct_bias) {
        const auto& enc = phi[cfg.per_layer_bias ? static_cast<size_t>(l) : 0];
        scores = num::add(scores, enc[static_cast<size_t>(hd)]);
      }
      Tensor attn = num::softmax_rows(scores);
      if (record) record->attn.back().push_back(attn.values());
      attn = num::dropout(attn, drop, rng);
      head_outs.push_back(num::matmul(attn, vh));
    }
    Tensor attn_out = num::add_rowvec(num::matmul(num::concat_cols(head_outs), lp.wo), lp.bo);
    h = num::layer_norm_rows(num::add(h, attn_out), lp.ln1_gain, lp.ln1_shift);

    Tensor f = num::gelu(num::add_rowvec(num::matmul(h, lp.ff1_w), lp.ff1_b));
    f = num::dropout(f, drop, rng);
    f = num::add_rowvec(num::matmul(f, lp.ff2_w), lp.ff2_b);
    h = num::layer_norm_rows(num::add(h, f), lp.ln2_gain, lp.ln2_shift);
  }

  ForwardResult out;
  out.hidden = num::row(h, mask_pos);
  out.logits = num::matvec(params.embed, out.hidden);  // tied output head
  return out;
}

Tensor mkm_loss(const Tensor& logits, int32_t target, LossKind kind) {
  switch (kind) {
    case LossKind::CrossEntropy: return num::cross_entropy(logits, target);
    case LossKind::BinaryCrossEntropy: return num::bce_with_logits(logits, target);
  }
  throw std::logic_error("bad loss kind");
}

Tensor contextual_loss(const Tensor& c_t, const std::vector<double>& c_prev,
                       const std::vector<std::vector<double>>& negatives, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("contextual_loss: tau must be > 0");
  std::vector<Tensor> sims;
  sims.reserve(negatives.size() + 1);
  sims.push_back(num::cosine_const(c_t, c_prev));
  for (const auto& neg : negatives) sims.push_back(num::cosine_const(c_t, neg));
  Tensor logits = num::scale(num::stack_scalars(sims), 1.0 / tau);
  return num::cross_entropy(logits, 0);
}

void ContrastiveBank::update(int64_t center_key, const Tensor& c) {
  entries_[center_key] = c.values();
}

const std::vector<double>* ContrastiveBank::lookup(int64_t center_key) const {
  auto it = entries_.find(center_key);
  return it == entries_.end() ? nullptr : &it->second;
}

int import_embeddings(const KnowledgeGraph& kg, ModelParams& params, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file " + path);
  const int d = params.embed.cols();
  std::string line;
  size_t lineno = 0;
  int applied = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected two columns");
    const std::string label = line.substr(0, tab);
    const int32_t node = kg.node_id(label);
    if (node < 0) continue;  // label not in this KG's vocabulary
    std::istringstream vec(line.substr(tab + 1));
    std::vector<double> vals;
    double x;
    while (vec >> x) vals.push_back(x);
    if (static_cast<int>(vals.size()) != d)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": vector of " +
                               std::to_string(vals.size()) + " floats, model expects " +
                               std::to_string(d));
    std::copy(vals.begin(), vals.end(),
              params.embed.values().begin() + static_cast<ptrdiff_t>(node) * d);
    ++applied;
  }
  return applied;
}

}  // namespace relphormer
