#include "beetag/detstore.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace beetag {

namespace {
constexpr char kMagic[4] = {'B', 'B', 'D', 'T'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));  // host is little-endian (static_assert below)
}

static_assert(std::endian::native == std::endian::little, "shard writer assumes little-endian");

class Reader {
public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  template <typename T>
  T get(const char* what, long frame = -1) {
    if (pos_ + sizeof(T) > data_.size()) {
      std::string msg = "unexpected end of shard in " + path_ + " reading " + what;
      if (frame >= 0) msg += " (frame " + std::to_string(frame) + ")";
      throw ShardTruncatedError(msg);
    }
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void get_bytes(void* dst, size_t n, const char* what, long frame) {
    if (pos_ + n > data_.size())
      throw ShardTruncatedError("unexpected end of shard in " + path_ + " reading " +
                                std::string(what) + " (frame " + std::to_string(frame) + ")");
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

private:
  const std::string& data_;
  std::string path_;
  size_t pos_ = 0;
};
}  // namespace

void write_shard(const Shard& shard, const std::string& path) {
  for (size_t i = 1; i < shard.frames.size(); ++i)
    if (shard.frames[i].frame_id <= shard.frames[i - 1].frame_id)
      throw std::invalid_argument("write_shard: frames must be strictly increasing by frame_id");
  if (shard.frames.size() > 0xffffffffull)
    throw std::invalid_argument("write_shard: too many frames");

  std::string buf;
  buf.append(kMagic, 4);
  put(buf, kVersion);
  put(buf, shard.camera_id);
  put(buf, uint32_t(shard.frames.size()));
  for (const auto& f : shard.frames) {
    if (f.dets.size() > 0xffffull)
      throw std::invalid_argument("write_shard: too many detections in one frame");
    put(buf, f.frame_id);
    put(buf, f.timestamp_us);
    put(buf, uint16_t(f.dets.size()));
    for (const auto& d : f.dets) {
      put(buf, d.x);
      put(buf, d.y);
      put(buf, d.z_rot);
      put(buf, d.y_rot);
      put(buf, d.x_rot);
      buf.append(reinterpret_cast<const char*>(d.bit_q.data()), 12);
      put(buf, d.saliency);
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_shard: cannot open " + path);
  os.write(buf.data(), std::streamsize(buf.size()));
  if (!os) throw std::runtime_error("write_shard: write failed for " + path);
}

Shard read_shard(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_shard: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  Reader r(data, path);
  char magic[4];
  r.get_bytes(magic, 4, "magic", -1);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ShardMagicError(path + " is not a detection shard");
  uint16_t version = r.get<uint16_t>("version");
  if (version != kVersion)
    throw ShardVersionError("unsupported shard version " + std::to_string(version) + " in " +
                            path);

  Shard shard;
  shard.camera_id = r.get<uint8_t>("camera id");
  uint32_t frame_count = r.get<uint32_t>("frame count");
  shard.frames.reserve(frame_count);
  for (uint32_t fi = 0; fi < frame_count; ++fi) {
    FrameBlock f;
    f.frame_id = r.get<uint64_t>("frame id", fi);
    f.timestamp_us = r.get<uint64_t>("timestamp", fi);
    uint16_t n = r.get<uint16_t>("detection count", fi);
    f.dets.resize(n);
    for (uint16_t di = 0; di < n; ++di) {
      auto& d = f.dets[di];
      d.x = r.get<float>("detection", fi);
      d.y = r.get<float>("detection", fi);
      d.z_rot = r.get<float>("detection", fi);
      d.y_rot = r.get<float>("detection", fi);
      d.x_rot = r.get<float>("detection", fi);
      r.get_bytes(d.bit_q.data(), 12, "detection bits", fi);
      d.saliency = r.get<float>("detection", fi);
    }
    shard.frames.push_back(std::move(f));
  }
  return shard;
}

std::string shard_path(int year, int month, int day, int camera_id, int shard_index) {
  bool valid = year >= 0 && year <= 9999 && month >= 1 && month <= 12 && day >= 1 && day <= 31 &&
               camera_id >= 0 && shard_index >= 0;
  if (!valid) throw std::invalid_argument("shard_path: invalid date or ids");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d/%02d/%02d/cam%d/shard_%d.bbdt", year, month, day,
                camera_id, shard_index);
  return buf;
}

}  // namespace beetag
