#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "relphormer/model.hpp"
#include "relphormer/trainer.hpp"

namespace relphormer {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Union of model + train settings plus dataset paths, loaded from a flat
// dotted-key JSON object. model.vocab is always derived from the KG, never
// configured.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_train, data_valid, data_test;
  std::string data_embeddings;  // optional init TSV
  std::string out_dir = "out";
};

// Parses the file, then applies overrides ("key=value"; a bare key with no dot
// resolves by unique suffix, e.g. "lambda" -> "model.lambda"). Unknown keys
// are rejected. Every key left at its default is logged to `defaults_log`.
// train.seed falls back to RELPHORMER_SEED when set nowhere else.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          std::ostream& defaults_log);

// Override application without a file (all defaults baseline).
RunConfig config_from_overrides(const std::vector<std::string>& overrides,
                                std::ostream& defaults_log);

std::vector<std::string> known_config_keys();

}  // namespace relphormer
