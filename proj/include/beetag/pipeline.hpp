#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "beetag/config.hpp"
#include "beetag/decoder.hpp"
#include "beetag/detstore.hpp"
#include "beetag/localizer.hpp"

namespace beetag {

struct FrameInput {
  uint64_t frame_id = 0;
  uint64_t timestamp_us = 0;
  std::string path;  // PGM image
};

struct PipelineStats {
  uint64_t frames_processed = 0;
  uint64_t frames_failed = 0;
  uint64_t tags_decoded = 0;
  double inference_seconds = 0;  // preprocessing + networks + extraction; no file I/O
  std::vector<std::string> item_errors;
  std::vector<std::string> shards_written;  // relative to out_dir
};

struct FrameResult {
  std::vector<DetectionRecord> dets;
  double seconds = 0;  // inference time for this frame
};

// one frame end to end: CLAHE -> saliency -> candidates -> 64 px
// edge-clamped patches at the candidate centers -> batched decode -> centers
// refined by the decoder offsets
FrameResult process_frame(const GrayImage& frame, const PipelineConfig& cfg, LocalizerNet& loc,
                          DecoderNet& dec);

// processes frames in ascending frame_id order and writes shards of
// cfg.shard_size frames under cfg.out_dir using the detstore layout; the
// shard index is the first frame_id in the shard. Per-frame failures are
// collected, not fatal.
PipelineStats run_pipeline(std::vector<FrameInput> frames, const PipelineConfig& cfg,
                           LocalizerNet& loc, DecoderNet& dec);

struct FrameRange {
  size_t begin = 0, end = 0;  // [begin, end) indices into the frame list
};

struct ShardedResult {
  int workers_spawned = 0;
  int workers_failed = 0;     // nonzero exit or signal
  int workers_partial = 0;    // finished with per-item errors
  double wall_seconds = 0;
};

// forks one child per range, at most n_workers alive at a time; children
// share nothing and write disjoint shards, so the merged output is a pure
// filesystem union. Overlapping ranges are a configuration error.
ShardedResult run_sharded(const std::vector<FrameInput>& frames,
                          const std::vector<FrameRange>& ranges, int n_workers,
                          const PipelineConfig& cfg, LocalizerNet& loc, DecoderNet& dec);

// evenly split [0, n) into n_ranges contiguous ranges
std::vector<FrameRange> split_ranges(size_t n, int n_ranges);

// all frame blocks from every .bbdt under root, merged and sorted by frame_id
std::vector<FrameBlock> read_all_shards(const std::string& root);

}  // namespace beetag
