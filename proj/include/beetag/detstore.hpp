#pragma once
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace beetag {

// Binary shard format (little-endian; field table in docs/formats.md):
//   header: magic "BBDT", version u16 (=1), camera_id u8, frame_count u32
//   per frame: frame_id u64, timestamp_us u64, det_count u16, then det_count
//   36-byte records: x, y, z_rot, y_rot, x_rot (f32), 12 quantized bit
//   probabilities (u8, q = round(p*255)), saliency (f32)

struct DetectionRecord {
  float x = 0, y = 0;                 // full-resolution px
  float z_rot = 0, y_rot = 0, x_rot = 0;  // radians in (-pi, pi]
  std::array<uint8_t, 12> bit_q{};    // quantized bit probabilities
  float saliency = 0;
};

struct FrameBlock {
  uint64_t frame_id = 0;
  uint64_t timestamp_us = 0;
  std::vector<DetectionRecord> dets;
};

struct Shard {
  uint8_t camera_id = 0;
  std::vector<FrameBlock> frames;  // strictly increasing frame_id
};

// round-trip error bounded by 1/510
inline uint8_t quantize_prob(double p) {
  p = p < 0 ? 0 : (p > 1 ? 1 : p);
  return uint8_t(p * 255.0 + 0.5);
}
inline float dequantize_prob(uint8_t q) { return float(q) / 255.f; }

class ShardFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
// magic bytes are not "BBDT"
class ShardMagicError : public ShardFormatError {
public:
  using ShardFormatError::ShardFormatError;
};
// file ends before the declared content
class ShardTruncatedError : public ShardFormatError {
public:
  using ShardFormatError::ShardFormatError;
};
// unsupported version field
class ShardVersionError : public ShardFormatError {
public:
  using ShardFormatError::ShardFormatError;
};

void write_shard(const Shard& shard, const std::string& path);
Shard read_shard(const std::string& path);

// YYYY/MM/DD/camN/shard_K.bbdt; lexicographic order of the date part equals
// chronological order
std::string shard_path(int year, int month, int day, int camera_id, int shard_index);

}  // namespace beetag
