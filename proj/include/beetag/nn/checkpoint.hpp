#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace beetag::nn {

// On-disk layout (little-endian, see docs/formats.md):
//   magic "BBNN", version u16, desc_len u32, descriptor bytes,
//   epoch u64, seed u64, n_learn u32, n_buf u32,
//   learn f32[n_learn], buf f32[n_buf],
//   has_momentum u8, momentum f32[n_learn] if present
struct Checkpoint {
  std::string descriptor;  // model name + network spec, see nn/spec.hpp
  uint64_t epoch = 0;
  uint64_t seed = 0;
  std::vector<float> learn;
  std::vector<float> buffers;
  std::vector<float> momentum;  // empty when not saved
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace beetag::nn
