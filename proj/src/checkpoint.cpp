#include "relphormer/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace relphormer {

namespace {

constexpr char kMagic[4] = {'R', 'L', 'P', 'H'};

template <typename T>
void write_le(std::ofstream& out, T v) {
  // x86-64 target; host order is little-endian
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, num::Tensor>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(kMagic, 4);
  write_le<uint32_t>(out, kCheckpointVersion);
  write_le<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_le<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<uint32_t>(out, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_le<uint64_t>(out, static_cast<uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write failed for " + path);
}

std::vector<std::pair<std::string, num::Tensor>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError(path + ": bad magic, not a checkpoint");
  const uint32_t version = read_le<uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw CheckpointError(path + ": unsupported format version " + std::to_string(version));
  const uint32_t count = read_le<uint32_t>(in, path);
  std::vector<std::pair<std::string, num::Tensor>> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_le<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t rank = read_le<uint32_t>(in, path);
    std::vector<int> shape(rank);
    size_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(read_le<uint64_t>(in, path));
      total *= static_cast<size_t>(shape[d]);
    }
    std::vector<double> values(total);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw CheckpointError(path + ": truncated tensor payload for " + name);
    out.emplace_back(std::move(name), num::Tensor::from(std::move(shape), std::move(values)));
  }
  return out;
}

}  // namespace relphormer
