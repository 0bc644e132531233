#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "beetag/tagcodec.hpp"

namespace beetag {

struct TrackPoint {
  uint64_t frame_id = 0;
  double x = 0, y = 0;  // full-resolution px
  std::array<float, 12> probs{};
  double confidence = 0;
};

struct Track {
  std::vector<TrackPoint> points;      // frame_id strictly increasing
  std::array<float, 12> mean_probs{};  // filled by consolidate
  TagId assigned_id{0};
};

// greedy nearest-neighbor linking: per frame transition all (track, new
// detection) pairs within gate_radius are resolved in ascending distance
// order (ties by lower track then detection index); unmatched detections
// start new tracks; a track stays matchable while at most max_gap frames
// are missing
std::vector<Track> link(const std::vector<std::vector<TrackPoint>>& frames, double gate_radius,
                        int max_gap = 1);

// per-bit arithmetic mean over the path, then threshold decode
void consolidate(Track& track);

}  // namespace beetag
