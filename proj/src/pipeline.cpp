#include "beetag/pipeline.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "beetag/imgproc.hpp"

namespace beetag {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

FrameResult process_frame(const GrayImage& frame, const PipelineConfig& cfg, LocalizerNet& loc,
                          DecoderNet& dec) {
  auto t0 = Clock::now();
  GrayImage pre = clahe(frame, cfg.clahe_tiles, cfg.clahe_tiles, cfg.clahe_clip);
  SaliencyMap sal = infer_saliency_preprocessed(pre, loc);

  CandidateParams cp;
  cp.threshold = cfg.threshold;
  cp.nms_radius = cfg.nms_radius;
  cp.morph_open_radius = cfg.morph_open_radius;
  cp.merge_dist = cfg.merge_dist;
  std::vector<Candidate> cands = extract_candidates(sal, cp);

  std::vector<GrayImage> patches;
  std::vector<std::pair<int, int>> corners;
  patches.reserve(cands.size());
  for (const auto& c : cands) {
    int tlx = int(std::lround(c.x)) - 32;
    int tly = int(std::lround(c.y)) - 32;
    GrayImage p(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) p.at(y, x) = pre.at_clamped(tly + y, tlx + x);
    patches.push_back(std::move(p));
    corners.push_back({tlx, tly});
  }
  std::vector<DecodedTag> decoded = decode_patches(patches, dec);

  FrameResult res;
  res.dets.reserve(decoded.size());
  for (size_t i = 0; i < decoded.size(); ++i) {
    const auto& d = decoded[i];
    DetectionRecord rec;
    rec.x = float(corners[i].first + 32.0 + d.offset_dx);
    rec.y = float(corners[i].second + 32.0 + d.offset_dy);
    rec.z_rot = float(d.z_rot);
    rec.y_rot = float(d.y_rot);
    rec.x_rot = float(d.x_rot);
    for (int b = 0; b < 12; ++b) rec.bit_q[b] = quantize_prob(d.bit_probs[b]);
    rec.saliency = float(cands[i].saliency);
    res.dets.push_back(rec);
  }
  res.seconds = seconds_since(t0);
  return res;
}

namespace {
void flush_shard(Shard& shard, const PipelineConfig& cfg, PipelineStats& stats) {
  if (shard.frames.empty()) return;
  std::string rel = shard_path(cfg.date_year, cfg.date_month, cfg.date_day, cfg.camera_id,
                               int(shard.frames.front().frame_id));
  fs::path full = fs::path(cfg.out_dir) / rel;
  try {
    fs::create_directories(full.parent_path());
    write_shard(shard, full.string());
    stats.shards_written.push_back(rel);
  } catch (const std::exception& e) {
    stats.item_errors.push_back(full.string() + ": " + e.what());
  }
  shard.frames.clear();
}
}  // namespace

PipelineStats run_pipeline(std::vector<FrameInput> frames, const PipelineConfig& cfg,
                           LocalizerNet& loc, DecoderNet& dec) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("run_pipeline: out_dir not set");
  std::sort(frames.begin(), frames.end(),
            [](const FrameInput& a, const FrameInput& b) { return a.frame_id < b.frame_id; });
  for (size_t i = 1; i < frames.size(); ++i)
    if (frames[i].frame_id == frames[i - 1].frame_id)
      throw std::invalid_argument("run_pipeline: duplicate frame_id " +
                                  std::to_string(frames[i].frame_id));

  PipelineStats stats;
  Shard shard;
  shard.camera_id = uint8_t(cfg.camera_id);
  for (const auto& fi : frames) {
    GrayImage img;
    try {
      img = read_pgm(fi.path);
    } catch (const std::exception& e) {
      stats.item_errors.push_back(fi.path + ": " + e.what());
      ++stats.frames_failed;
      continue;
    }
    FrameBlock block;
    block.frame_id = fi.frame_id;
    block.timestamp_us = fi.timestamp_us;
    try {
      FrameResult fr = process_frame(img, cfg, loc, dec);
      block.dets = std::move(fr.dets);
      stats.inference_seconds += fr.seconds;
    } catch (const std::exception& e) {
      stats.item_errors.push_back(fi.path + ": " + e.what());
      ++stats.frames_failed;
      continue;
    }
    stats.tags_decoded += block.dets.size();
    ++stats.frames_processed;
    shard.frames.push_back(std::move(block));
    if (int(shard.frames.size()) >= cfg.shard_size) flush_shard(shard, cfg, stats);
  }
  flush_shard(shard, cfg, stats);
  return stats;
}

std::vector<FrameRange> split_ranges(size_t n, int n_ranges) {
  if (n_ranges < 1) throw std::invalid_argument("split_ranges: need at least one range");
  std::vector<FrameRange> out;
  size_t base = n / size_t(n_ranges), rem = n % size_t(n_ranges);
  size_t begin = 0;
  for (int i = 0; i < n_ranges; ++i) {
    size_t len = base + (size_t(i) < rem ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

ShardedResult run_sharded(const std::vector<FrameInput>& frames,
                          const std::vector<FrameRange>& ranges, int n_workers,
                          const PipelineConfig& cfg, LocalizerNet& loc, DecoderNet& dec) {
  if (n_workers < 1) throw std::invalid_argument("run_sharded: need at least one worker");
  std::vector<FrameRange> sorted = ranges;
  std::sort(sorted.begin(), sorted.end(),
            [](const FrameRange& a, const FrameRange& b) { return a.begin < b.begin; });
  for (const auto& r : sorted)
    if (r.end < r.begin || r.end > frames.size())
      throw std::invalid_argument("run_sharded: range outside the frame list");
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].begin < sorted[i - 1].end)
      throw std::invalid_argument("run_sharded: overlapping frame ranges");

  auto t0 = Clock::now();
  ShardedResult res;
  std::vector<pid_t> alive;

  auto reap = [&](bool block) {
    while (!alive.empty()) {
      int status = 0;
      pid_t pid = waitpid(-1, &status, block ? 0 : WNOHANG);
      if (pid <= 0) break;
      alive.erase(std::remove(alive.begin(), alive.end(), pid), alive.end());
      if (WIFEXITED(status)) {
        int code = WEXITSTATUS(status);
        if (code == 2)
          ++res.workers_partial;
        else if (code != 0)
          ++res.workers_failed;
      } else {
        ++res.workers_failed;
      }
      if (block) break;
    }
  };

  for (const auto& r : ranges) {
    while (int(alive.size()) >= n_workers) reap(true);
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("run_sharded: fork failed");
    if (pid == 0) {
      int code = 0;
      try {
        std::vector<FrameInput> slice(frames.begin() + long(r.begin),
                                      frames.begin() + long(r.end));
        PipelineStats st = run_pipeline(std::move(slice), cfg, loc, dec);
        if (!st.item_errors.empty()) code = 2;
      } catch (const std::exception&) {
        code = 1;
      }
      _exit(code);
    }
    alive.push_back(pid);
    ++res.workers_spawned;
  }
  while (!alive.empty()) reap(true);
  res.wall_seconds = seconds_since(t0);
  return res;
}

std::vector<FrameBlock> read_all_shards(const std::string& root) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".bbdt")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());

  std::vector<FrameBlock> blocks;
  for (const auto& p : paths) {
    Shard s = read_shard(p);
    for (auto& f : s.frames) blocks.push_back(std::move(f));
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const FrameBlock& a, const FrameBlock& b) { return a.frame_id < b.frame_id; });
  return blocks;
}

}  // namespace beetag
