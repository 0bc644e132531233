#include "beetag/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace beetag::nn {

namespace {

template <typename T>
void put(std::ofstream& f, T v) {
  // the build targets little-endian hosts; layout is little-endian by fiat
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw std::runtime_error(path + ": truncated checkpoint");
  return v;
}

void put_floats(std::ofstream& f, const std::vector<float>& v) {
  f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
}

void get_floats(std::ifstream& f, std::vector<float>& v, size_t n, const std::string& path) {
  v.resize(n);
  f.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * 4));
  if (!f) throw std::runtime_error(path + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write("BBNN", 4);
  put<uint16_t>(f, 1);
  put<uint32_t>(f, uint32_t(ck.descriptor.size()));
  f.write(ck.descriptor.data(), std::streamsize(ck.descriptor.size()));
  put<uint64_t>(f, ck.epoch);
  put<uint64_t>(f, ck.seed);
  put<uint32_t>(f, uint32_t(ck.learn.size()));
  put<uint32_t>(f, uint32_t(ck.buffers.size()));
  put_floats(f, ck.learn);
  put_floats(f, ck.buffers);
  if (!ck.momentum.empty() && ck.momentum.size() != ck.learn.size())
    throw std::invalid_argument("checkpoint: momentum size must match learnables");
  put<uint8_t>(f, ck.momentum.empty() ? 0 : 1);
  if (!ck.momentum.empty()) put_floats(f, ck.momentum);
  if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "BBNN", 4) != 0)
    throw std::runtime_error(path + ": not a model checkpoint");
  uint16_t version = get<uint16_t>(f, path);
  if (version != 1) throw std::runtime_error(path + ": unsupported checkpoint version");
  Checkpoint ck;
  uint32_t desc_len = get<uint32_t>(f, path);
  ck.descriptor.resize(desc_len);
  f.read(ck.descriptor.data(), desc_len);
  if (!f) throw std::runtime_error(path + ": truncated checkpoint");
  ck.epoch = get<uint64_t>(f, path);
  ck.seed = get<uint64_t>(f, path);
  uint32_t n_learn = get<uint32_t>(f, path);
  uint32_t n_buf = get<uint32_t>(f, path);
  get_floats(f, ck.learn, n_learn, path);
  get_floats(f, ck.buffers, n_buf, path);
  if (get<uint8_t>(f, path)) get_floats(f, ck.momentum, n_learn, path);
  return ck;
}

}  // namespace beetag::nn
