#include "relphormer/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace relphormer {

using json = nlohmann::json;

namespace {

struct Key {
  std::function<void(RunConfig&, const json&)> set;
  std::function<std::string(const RunConfig&)> show;
};

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "': cannot convert value " + v.dump());
  }
}

std::string show_bool(bool b) { return b ? "true" : "false"; }

std::string show_double(double d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

MaskPolicy parse_policy(const std::string& s) {
  if (s == "entity") return MaskPolicy::RandomEntity;
  if (s == "relation") return MaskPolicy::Relation;
  if (s == "head") return MaskPolicy::Head;
  if (s == "tail") return MaskPolicy::Tail;
  throw ConfigError("train.policy must be entity|relation|head|tail, got '" + s + "'");
}

const char* policy_name(MaskPolicy p) {
  switch (p) {
    case MaskPolicy::RandomEntity: return "entity";
    case MaskPolicy::Relation: return "relation";
    case MaskPolicy::Head: return "head";
    case MaskPolicy::Tail: return "tail";
  }
  return "?";
}

LossKind parse_loss(const std::string& s) {
  if (s == "ce") return LossKind::CrossEntropy;
  if (s == "bce") return LossKind::BinaryCrossEntropy;
  throw ConfigError("model.loss must be ce|bce, got '" + s + "'");
}

const std::map<std::string, Key>& key_table() {
  static const std::map<std::string, Key> table = {
      {"model.hidden",
       {[](RunConfig& c, const json& v) { c.model.hidden = as<int>(v, "model.hidden"); },
        [](const RunConfig& c) { return std::to_string(c.model.hidden); }}},
      {"model.layers",
       {[](RunConfig& c, const json& v) { c.model.layers = as<int>(v, "model.layers"); },
        [](const RunConfig& c) { return std::to_string(c.model.layers); }}},
      {"model.heads",
       {[](RunConfig& c, const json& v) { c.model.heads = as<int>(v, "model.heads"); },
        [](const RunConfig& c) { return std::to_string(c.model.heads); }}},
      {"model.ffn",
       {[](RunConfig& c, const json& v) { c.model.ffn = as<int>(v, "model.ffn"); },
        [](const RunConfig& c) { return std::to_string(c.model.ffn); }}},
      {"model.m",
       {[](RunConfig& c, const json& v) { c.model.m = as<int>(v, "model.m"); },
        [](const RunConfig& c) { return std::to_string(c.model.m); }}},
      {"model.tau",
       {[](RunConfig& c, const json& v) { c.model.tau = as<double>(v, "model.tau"); },
        [](const RunConfig& c) { return show_double(c.model.tau); }}},
      {"model.lambda",
       {[](RunConfig& c, const json& v) { c.model.lambda = as<double>(v, "model.lambda"); },
        [](const RunConfig& c) { return show_double(c.model.lambda); }}},
      {"model.dropout",
       {[](RunConfig& c, const json& v) { c.model.dropout = as<double>(v, "model.dropout"); },
        [](const RunConfig& c) { return show_double(c.model.dropout); }}},
      {"model.loss",
       {[](RunConfig& c, const json& v) { c.model.loss_kind = parse_loss(as<std::string>(v, "model.loss")); },
        [](const RunConfig& c) {
          return c.model.loss_kind == LossKind::CrossEntropy ? "ce" : "bce";
        }}},
      {"model.per_layer_bias",
       {[](RunConfig& c, const json& v) { c.model.per_layer_bias = as<bool>(v, "model.per_layer_bias"); },
        [](const RunConfig& c) { return show_bool(c.model.per_layer_bias); }}},
      {"model.use_struct_bias",
       {[](RunConfig& c, const json& v) { c.model.use_struct_bias = as<bool>(v, "model.use_struct_bias"); },
        [](const RunConfig& c) { return show_bool(c.model.use_struct_bias); }}},
      {"train.lr",
       {[](RunConfig& c, const json& v) { c.train.lr = as<double>(v, "train.lr"); },
        [](const RunConfig& c) { return show_double(c.train.lr); }}},
      {"train.batch",
       {[](RunConfig& c, const json& v) { c.train.batch = as<int>(v, "train.batch"); },
        [](const RunConfig& c) { return std::to_string(c.train.batch); }}},
      {"train.epochs",
       {[](RunConfig& c, const json& v) { c.train.epochs = as<int>(v, "train.epochs"); },
        [](const RunConfig& c) { return std::to_string(c.train.epochs); }}},
      {"train.warmup",
       {[](RunConfig& c, const json& v) { c.train.warmup = as<double>(v, "train.warmup"); },
        [](const RunConfig& c) { return show_double(c.train.warmup); }}},
      {"train.clip",
       {[](RunConfig& c, const json& v) { c.train.clip = as<double>(v, "train.clip"); },
        [](const RunConfig& c) { return show_double(c.train.clip); }}},
      {"train.weight_decay",
       {[](RunConfig& c, const json& v) { c.train.weight_decay = as<double>(v, "train.weight_decay"); },
        [](const RunConfig& c) { return show_double(c.train.weight_decay); }}},
      {"train.patience",
       {[](RunConfig& c, const json& v) { c.train.patience = as<int>(v, "train.patience"); },
        [](const RunConfig& c) { return std::to_string(c.train.patience); }}},
      {"train.k_context",
       {[](RunConfig& c, const json& v) { c.train.k_context = as<int>(v, "train.k_context"); },
        [](const RunConfig& c) { return std::to_string(c.train.k_context); }}},
      {"train.k_infer",
       {[](RunConfig& c, const json& v) { c.train.k_infer = as<int>(v, "train.k_infer"); },
        [](const RunConfig& c) { return std::to_string(c.train.k_infer); }}},
      {"train.k_valid",
       {[](RunConfig& c, const json& v) { c.train.k_valid = as<int>(v, "train.k_valid"); },
        [](const RunConfig& c) { return std::to_string(c.train.k_valid); }}},
      {"train.seed",
       {[](RunConfig& c, const json& v) { c.train.seed = as<uint64_t>(v, "train.seed"); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"train.policy",
       {[](RunConfig& c, const json& v) { c.train.policy = parse_policy(as<std::string>(v, "train.policy")); },
        [](const RunConfig& c) { return policy_name(c.train.policy); }}},
      {"train.avg_logits",
       {[](RunConfig& c, const json& v) { c.train.avg_logits = as<bool>(v, "train.avg_logits"); },
        [](const RunConfig& c) { return show_bool(c.train.avg_logits); }}},
      {"train.uniform_context",
       {[](RunConfig& c, const json& v) { c.train.uniform_context = as<bool>(v, "train.uniform_context"); },
        [](const RunConfig& c) { return show_bool(c.train.uniform_context); }}},
      {"data.train",
       {[](RunConfig& c, const json& v) { c.data_train = as<std::string>(v, "data.train"); },
        [](const RunConfig& c) { return c.data_train; }}},
      {"data.valid",
       {[](RunConfig& c, const json& v) { c.data_valid = as<std::string>(v, "data.valid"); },
        [](const RunConfig& c) { return c.data_valid; }}},
      {"data.test",
       {[](RunConfig& c, const json& v) { c.data_test = as<std::string>(v, "data.test"); },
        [](const RunConfig& c) { return c.data_test; }}},
      {"data.embeddings",
       {[](RunConfig& c, const json& v) { c.data_embeddings = as<std::string>(v, "data.embeddings"); },
        [](const RunConfig& c) { return c.data_embeddings; }}},
      {"out.dir",
       {[](RunConfig& c, const json& v) { c.out_dir = as<std::string>(v, "out.dir"); },
        [](const RunConfig& c) { return c.out_dir; }}},
  };
  return table;
}

// "lambda" -> "model.lambda" when the suffix is unique.
std::string resolve_key(const std::string& key) {
  const auto& table = key_table();
  if (table.count(key)) return key;
  if (key.find('.') == std::string::npos) {
    std::string hit;
    for (const auto& [full, k] : table) {
      if (full.size() > key.size() && full.compare(full.size() - key.size(), key.size(), key) == 0 &&
          full[full.size() - key.size() - 1] == '.') {
        if (!hit.empty()) throw ConfigError("config key '" + key + "' is ambiguous");
        hit = full;
      }
    }
    if (!hit.empty()) return hit;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

json parse_override_value(const std::string& raw) {
  json v = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) return json(raw);  // unquoted strings (paths, names)
  return v;
}

RunConfig build(const json& file_entries, const std::vector<std::string>& overrides,
                std::ostream& defaults_log) {
  RunConfig cfg;
  std::map<std::string, json> pending;
  for (auto it = file_entries.begin(); it != file_entries.end(); ++it)
    pending[resolve_key(it.key())] = it.value();
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + ov + "' is not of the form key=value");
    pending[resolve_key(ov.substr(0, eq))] = parse_override_value(ov.substr(eq + 1));
  }
  if (!pending.count("train.seed")) {
    if (const char* env = std::getenv("RELPHORMER_SEED")) {
      json v = json::parse(env, nullptr, /*allow_exceptions=*/false);
      if (!v.is_number_unsigned())
        throw ConfigError("RELPHORMER_SEED must be a non-negative integer, got '" +
                          std::string(env) + "'");
      pending["train.seed"] = v;
    }
  }
  for (const auto& [key, k] : key_table()) {
    auto it = pending.find(key);
    if (it != pending.end())
      k.set(cfg, it->second);
    else
      defaults_log << "config default: " << key << " = " << k.show(cfg) << "\n";
  }
  return cfg;
}

}  // namespace

std::vector<std::string> known_config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, k] : key_table()) out.push_back(key);
  return out;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          std::ostream& defaults_log) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json entries = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (entries.is_discarded() || !entries.is_object())
    throw ConfigError("config file " + path + " is not a JSON object");
  return build(entries, overrides, defaults_log);
}

RunConfig config_from_overrides(const std::vector<std::string>& overrides,
                                std::ostream& defaults_log) {
  return build(json::object(), overrides, defaults_log);
}

}  // namespace relphormer
