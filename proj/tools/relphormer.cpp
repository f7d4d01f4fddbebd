#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "relphormer/checkpoint.hpp"
#include "relphormer/config.hpp"
#include "relphormer/kg.hpp"
#include "relphormer/model.hpp"
#include "relphormer/synth.hpp"
#include "relphormer/trainer.hpp"

namespace {

using json = nlohmann::json;
using namespace relphormer;

// exit codes: 0 ok, 2 input error, 3 numerical failure, 4 checkpoint
// mismatch, 5 vocabulary miss
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitVocab = 5;

struct VocabMiss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("no such file: " + path);
}

KnowledgeGraph load_kg(const RunConfig& cfg) {
  require_file(cfg.data_train);
  if (!cfg.data_valid.empty()) require_file(cfg.data_valid);
  if (!cfg.data_test.empty()) require_file(cfg.data_test);
  return KnowledgeGraph::load(cfg.data_train, cfg.data_valid, cfg.data_test);
}

ModelConfig model_config(const RunConfig& cfg, const KnowledgeGraph& kg) {
  ModelConfig m = cfg.model;
  m.vocab = kg.vocab_size();
  m.validate();
  return m;
}

int cmd_prepare(const std::string& train, const std::string& valid, const std::string& test,
                const std::string& out) {
  require_file(train);
  if (!valid.empty()) require_file(valid);
  if (!test.empty()) require_file(test);
  KnowledgeGraph kg = KnowledgeGraph::load(train, valid, test);
  if (kg.valid().empty()) std::cerr << "warning: valid split is empty\n";
  if (kg.test().empty()) std::cerr << "warning: test split is empty\n";

  std::filesystem::create_directories(out);
  kg.write_tsv(Split::Train, out + "/train.tsv");
  kg.write_tsv(Split::Valid, out + "/valid.tsv");
  kg.write_tsv(Split::Test, out + "/test.tsv");

  json hist = json::object();
  for (const auto& [deg, count] : kg.degree_histogram()) hist[std::to_string(deg)] = count;
  json stats{{"entities", kg.num_entities()},
             {"relations", kg.num_relations()},
             {"train", kg.train().size()},
             {"valid", kg.valid().size()},
             {"test", kg.test().size()},
             {"vocab", kg.vocab_size()},
             {"degree_histogram", hist}};
  std::ofstream sf(out + "/stats.json");
  sf << stats.dump(2) << "\n";
  std::cout << stats.dump() << "\n";
  return 0;
}

int cmd_synth(const std::string& name, const std::string& out, uint64_t seed) {
  SynthDataset ds;
  if (name == "synth50")
    ds = make_synth50();
  else if (name == "umls135")
    ds = make_umls135(seed);
  else
    throw ConfigError("unknown synthetic dataset '" + name + "' (synth50|umls135)");
  ds.write(out);
  json j{{"dataset", name},
         {"train", ds.train.size()},
         {"valid", ds.valid.size()},
         {"test", ds.test.size()},
         {"dir", out}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_sample(const std::string& config_path, const std::vector<std::string>& overrides,
               int count) {
  RunConfig cfg = load_run_config(config_path, overrides, std::cerr);
  KnowledgeGraph kg = load_kg(cfg);
  Rng rng(cfg.train.seed);
  std::vector<int32_t> order = sample_center_order(kg, rng);
  for (int i = 0; i < count; ++i) {
    const int32_t idx = order[static_cast<size_t>(i) % order.size()];
    ContextSubgraph sub = sample_context(kg, kg.train()[static_cast<size_t>(idx)], idx,
                                         cfg.train.k_context, rng, cfg.train.uniform_context);
    MaskedSample ms = mask_center(kg, std::move(sub), cfg.train.policy, rng);
    json rows = json::array();
    for (int r = 0; r < ms.adjacency.n; ++r) {
      json row = json::array();
      for (int c = 0; c < ms.adjacency.n; ++c) row.push_back(ms.adjacency.at(r, c));
      rows.push_back(row);
    }
    json j{{"sequence", ms.sequence},
           {"adjacency", rows},
           {"target", ms.target},
           {"mask_slot", slot_name(ms.mask_slot)},
           {"center_key", ms.center_key}};
    std::cout << j.dump() << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig cfg = load_run_config(config_path, overrides, std::cerr);
  KnowledgeGraph kg = load_kg(cfg);
  ModelConfig mcfg = model_config(cfg, kg);
  cfg.train.validate();

  ModelParams params = ModelParams::init(mcfg, cfg.train.seed);
  if (!cfg.data_embeddings.empty()) {
    require_file(cfg.data_embeddings);
    const int rows = import_embeddings(kg, params, cfg.data_embeddings);
    std::cerr << "imported " << rows << " embedding rows\n";
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/train_log.jsonl");
  if (!log) throw ConfigError("cannot write to " + cfg.out_dir);

  TrainResult res = train(kg, mcfg, cfg.train, params, &log);
  save_checkpoint(cfg.out_dir + "/model.ckpt", params.named());

  json j{{"epochs_run", res.epochs_run},
         {"best_epoch", res.best_epoch},
         {"best_valid_mrr", res.best_mrr},
         {"final_loss_mkm", res.epoch_loss_mkm.empty() ? 0.0 : res.epoch_loss_mkm.back()},
         {"checkpoint", cfg.out_dir + "/model.ckpt"}};
  std::ofstream rf(cfg.out_dir + "/result.json");
  rf << j.dump(2) << "\n";
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& ckpt, const std::string& split_name, const std::string& setting,
             int k_override) {
  RunConfig cfg = load_run_config(config_path, overrides, std::cerr);
  KnowledgeGraph kg = load_kg(cfg);
  ModelConfig mcfg = model_config(cfg, kg);

  ModelParams params = ModelParams::init(mcfg, cfg.train.seed);
  require_file(ckpt);
  params.load_from(load_checkpoint(ckpt));

  Split split;
  if (split_name == "train")
    split = Split::Train;
  else if (split_name == "valid")
    split = Split::Valid;
  else if (split_name == "test")
    split = Split::Test;
  else
    throw ConfigError("--split must be train|valid|test");
  if (setting != "raw" && setting != "filtered")
    throw ConfigError("--setting must be raw|filtered");

  const int K = k_override > 0 ? k_override : cfg.train.k_infer;
  Metrics m = evaluate(params, mcfg, kg, split, setting == "filtered", cfg.train.policy, K,
                       cfg.train.k_context, cfg.train.seed, cfg.train.avg_logits);
  std::cout << metrics_json(m, -1, split_name, 0.0, 0.0) << "\n";
  return 0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& ckpt, int queries, int k_override) {
  RunConfig cfg = load_run_config(config_path, overrides, std::cerr);
  KnowledgeGraph kg = load_kg(cfg);
  ModelConfig mcfg = model_config(cfg, kg);

  ModelParams params = ModelParams::init(mcfg, cfg.train.seed);
  if (!ckpt.empty()) {
    require_file(ckpt);
    params.load_from(load_checkpoint(ckpt));
  }
  const int K = k_override > 0 ? k_override : cfg.train.k_infer;
  BenchReport rep = bench_inference(params, mcfg, kg, queries, K, cfg.train.k_context,
                                    cfg.train.seed);
  std::cout << bench_json(rep) << "\n";
  return 0;
}

int cmd_inspect(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& ckpt, const std::string& triple_arg, int layer) {
  RunConfig cfg = load_run_config(config_path, overrides, std::cerr);
  KnowledgeGraph kg = load_kg(cfg);
  ModelConfig mcfg = model_config(cfg, kg);

  ModelParams params = ModelParams::init(mcfg, cfg.train.seed);
  if (!ckpt.empty()) {
    require_file(ckpt);
    params.load_from(load_checkpoint(ckpt));
  }

  std::istringstream ts(triple_arg);
  std::string hl, rl, tl;
  if (!(ts >> hl >> rl >> tl)) throw ConfigError("--triple wants three labels: \"h r t\"");
  Triple center;
  center.head = kg.entity_id(hl);
  center.rel = kg.relation_id(rl);
  center.tail = kg.entity_id(tl);
  if (center.head < 0) throw VocabMiss("unknown entity '" + hl + "'");
  if (center.rel < 0) throw VocabMiss("unknown relation '" + rl + "'");
  if (center.tail < 0) throw VocabMiss("unknown entity '" + tl + "'");
  if (layer < 0 || layer >= mcfg.layers)
    throw ConfigError("--layer out of range (model has " + std::to_string(mcfg.layers) + ")");

  Rng rng(cfg.train.seed);
  ContextSubgraph sub = sample_context(kg, center, -1, cfg.train.k_context, rng);
  linearize(kg, sub);
  MaskedSample ms;  // unmasked: the intact sub-graph is what gets inspected
  ms.sequence = sub.nodes;
  ms.adjacency = sub.adjacency;

  AttentionRecord rec;
  forward(params, mcfg, ms, nullptr, &rec);

  json nodes = json::array();
  for (int32_t n : ms.sequence)
    nodes.push_back(n == kg.global_id() ? std::string("[GLOBAL]") : kg.label(n));
  auto mat = [&](const std::vector<double>& flat) {
    json rows = json::array();
    for (int i = 0; i < rec.seq_len; ++i) {
      json r = json::array();
      for (int j = 0; j < rec.seq_len; ++j)
        r.push_back(flat[static_cast<size_t>(i) * rec.seq_len + j]);
      rows.push_back(r);
    }
    return rows;
  };
  json attn = json::array(), phi = json::array();
  for (const auto& head : rec.attn[static_cast<size_t>(layer)]) attn.push_back(mat(head));
  for (const auto& head : rec.phi) phi.push_back(mat(head));
  json j{{"triple", json::array({hl, rl, tl})},
         {"layer", layer},
         {"nodes", nodes},
         {"attention", attn},
         {"phi", phi}};
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relphormer: knowledge-graph transformer for link prediction"};
  app.require_subcommand(1);

  std::string train_tsv, valid_tsv, test_tsv, out_dir = "out";
  auto* prepare = app.add_subcommand("prepare", "build KG indexes and a stats report");
  prepare->add_option("--train", train_tsv)->required();
  prepare->add_option("--valid", valid_tsv);
  prepare->add_option("--test", test_tsv);
  prepare->add_option("--out", out_dir);

  std::string synth_name = "synth50", synth_out = "data/synth50";
  uint64_t synth_seed = 77;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--name", synth_name);
  synth->add_option("--out", synth_out);
  synth->add_option("--seed", synth_seed);

  std::string config_path;
  std::vector<std::string> overrides;
  int sample_count = 10;
  auto* sample_cmd = app.add_subcommand("sample", "dump masked samples as JSON-lines");
  sample_cmd->add_option("--config", config_path)->required();
  sample_cmd->add_option("--override", overrides);
  sample_cmd->add_option("--count", sample_count);

  auto* train_cmd = app.add_subcommand("train", "run the training loop");
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--override", overrides);
  int workers = 1;
  train_cmd->add_option("--workers", workers);

  std::string ckpt, split_name = "test", setting = "filtered";
  int k_samples = 0;
  auto* eval_cmd = app.add_subcommand("eval", "ranking metrics for a checkpoint");
  eval_cmd->add_option("--config", config_path)->required();
  eval_cmd->add_option("--override", overrides);
  eval_cmd->add_option("--checkpoint", ckpt)->required();
  eval_cmd->add_option("--split", split_name);
  eval_cmd->add_option("--setting", setting);
  eval_cmd->add_option("--K", k_samples);

  int queries = 50;
  auto* bench_cmd = app.add_subcommand("bench", "inference cost comparison");
  bench_cmd->add_option("--config", config_path)->required();
  bench_cmd->add_option("--override", overrides);
  bench_cmd->add_option("--checkpoint", ckpt);
  bench_cmd->add_option("--queries", queries);
  bench_cmd->add_option("--K", k_samples);

  std::string triple_arg;
  int layer = 0;
  auto* inspect_cmd = app.add_subcommand("inspect-attn", "dump attention and phi matrices");
  inspect_cmd->add_option("--config", config_path)->required();
  inspect_cmd->add_option("--override", overrides);
  inspect_cmd->add_option("--checkpoint", ckpt);
  inspect_cmd->add_option("--triple", triple_arg)->required();
  inspect_cmd->add_option("--layer", layer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(train_tsv, valid_tsv, test_tsv, out_dir);
    if (synth->parsed()) return cmd_synth(synth_name, synth_out, synth_seed);
    if (sample_cmd->parsed()) return cmd_sample(config_path, overrides, sample_count);
    if (train_cmd->parsed()) {
      if (workers != 1) std::cerr << "note: multi-worker training not built in; using 1\n";
      return cmd_train(config_path, overrides);
    }
    if (eval_cmd->parsed())
      return cmd_eval(config_path, overrides, ckpt, split_name, setting, k_samples);
    if (bench_cmd->parsed()) return cmd_bench(config_path, overrides, ckpt, queries, k_samples);
    if (inspect_cmd->parsed()) return cmd_inspect(config_path, overrides, ckpt, triple_arg, layer);
  } catch (const VocabMiss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVocab;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
