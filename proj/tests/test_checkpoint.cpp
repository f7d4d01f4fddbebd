#include "doctest.h"
#include "relphormer/checkpoint.hpp"
#include "relphormer/model.hpp"
#include "testutil.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace relphormer;
using num::Tensor;

namespace {

struct TempPath {
  std::string path;
  TempPath() {
    path = (std::filesystem::temp_directory_path() /
            ("ckpt_" + std::to_string(reinterpret_cast<uintptr_t>(this)) + ".bin"))
               .string();
  }
  ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("checkpoint round-trips names, shapes and exact values") {
  TempPath tmp;
  Tensor a = Tensor::from({2, 3}, {1.5, -2.25, 3.0, 0.0, -0.0, 1e-300});
  Tensor b = Tensor::from({4}, {0.1, 0.2, 0.3, 0.4});
  Tensor s = Tensor::scalar(42.0);
  save_checkpoint(tmp.path, {{"a", a}, {"b", b}, {"s", s}});

  auto loaded = load_checkpoint(tmp.path);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].first == "a");
  CHECK(loaded[0].second.shape() == std::vector<int>{2, 3});
  for (size_t i = 0; i < a.size(); ++i) CHECK(loaded[0].second.values()[i] == a.values()[i]);
  CHECK(loaded[1].first == "b");
  CHECK(loaded[1].second.values() == b.values());
  CHECK(loaded[2].second.item() == 42.0);
}

TEST_CASE("model params survive a save/load round trip") {
  TempPath tmp;
  ModelConfig cfg;
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.ffn = 16;
  cfg.vocab = 11;
  ModelParams params = ModelParams::init(cfg, 77);
  save_checkpoint(tmp.path, params.named());

  ModelParams fresh = ModelParams::init(cfg, 1);
  fresh.load_from(load_checkpoint(tmp.path));
  auto want = params.named();
  auto got = fresh.named();
  REQUIRE(want.size() == got.size());
  for (size_t t = 0; t < want.size(); ++t) {
    CHECK(want[t].first == got[t].first);
    const auto& wv = want[t].second.values();
    const auto& gv = got[t].second.values();
    REQUIRE(wv.size() == gv.size());
    for (size_t i = 0; i < wv.size(); ++i) CHECK(wv[i] == gv[i]);
  }
}

TEST_CASE("missing file raises CheckpointError") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.ckpt"), CheckpointError);
}

TEST_CASE("bad magic raises CheckpointError") {
  TempPath tmp;
  std::ofstream out(tmp.path, std::ios::binary);
  out << "NOPE";
  uint32_t version = kCheckpointVersion, count = 0;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.close();
  CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path), doctest::Contains("magic"), CheckpointError);
}

TEST_CASE("unsupported version raises CheckpointError") {
  TempPath tmp;
  std::ofstream out(tmp.path, std::ios::binary);
  out << "RLPH";
  uint32_t version = kCheckpointVersion + 9, count = 0;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.close();
  CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path), doctest::Contains("version"), CheckpointError);
}

TEST_CASE("truncated payload raises CheckpointError") {
  TempPath tmp;
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  save_checkpoint(tmp.path, {{"a", a}});
  auto size = std::filesystem::file_size(tmp.path);
  std::filesystem::resize_file(tmp.path, size - 9);
  CHECK_THROWS_AS(load_checkpoint(tmp.path), CheckpointError);
}

TEST_CASE("load_from rejects missing, extra and reshaped tensors") {
  ModelConfig cfg;
  cfg.hidden = 4;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ffn = 8;
  cfg.vocab = 7;
  ModelParams params = ModelParams::init(cfg, 3);

  auto good = params.named();
  auto missing = good;
  missing.pop_back();
  CHECK_THROWS_WITH_AS(params.load_from(missing), doctest::Contains("missing"), CheckpointError);

  auto extra = good;
  extra.emplace_back("bogus", Tensor::zeros({1}));
  CHECK_THROWS_WITH_AS(params.load_from(extra), doctest::Contains("unexpected"), CheckpointError);

  auto reshaped = good;
  reshaped[0].second = Tensor::zeros({2, 2});
  CHECK_THROWS_WITH_AS(params.load_from(reshaped), doctest::Contains("shape"), CheckpointError);
}
