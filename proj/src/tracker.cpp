#include "beetag/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beetag {

std::vector<Track> link(const std::vector<std::vector<TrackPoint>>& frames, double gate_radius,
                        int max_gap) {
  if (gate_radius <= 0) throw std::invalid_argument("link: gate_radius must be positive");
  if (max_gap < 0) throw std::invalid_argument("link: max_gap must be >= 0");

  std::vector<Track> tracks;
  std::vector<int> last_seen;  // outer frame index of each track's last point

  for (int t = 0; t < int(frames.size()); ++t) {
    const auto& dets = frames[t];

    std::vector<int> active;
    for (int a = 0; a < int(tracks.size()); ++a)
      if (t - last_seen[a] <= max_gap + 1) active.push_back(a);

    struct Pair {
      double d;
      int track, det;
    };
    std::vector<Pair> pairs;
    for (int a : active) {
      const auto& tail = tracks[a].points.back();
      for (int j = 0; j < int(dets.size()); ++j) {
        double d = std::hypot(dets[j].x - tail.x, dets[j].y - tail.y);
        if (d <= gate_radius) pairs.push_back({d, a, j});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.d != b.d) return a.d < b.d;
      if (a.track != b.track) return a.track < b.track;
      return a.det < b.det;
    });

    std::vector<char> track_used(tracks.size(), 0), det_used(dets.size(), 0);
    for (const auto& p : pairs) {
      if (track_used[p.track] || det_used[p.det]) continue;
      track_used[p.track] = 1;
      det_used[p.det] = 1;
      tracks[p.track].points.push_back(dets[p.det]);
      last_seen[p.track] = t;
    }
    for (int j = 0; j < int(dets.size()); ++j) {
      if (det_used[j]) continue;
      tracks.push_back(Track{{dets[j]}, {}, TagId{0}});
      last_seen.push_back(t);
    }
  }
  return tracks;
}

void consolidate(Track& track) {
  if (track.points.empty()) throw std::invalid_argument("consolidate: empty track");
  std::array<double, 12> mean{};
  for (const auto& p : track.points)
    for (int i = 0; i < 12; ++i) mean[i] += p.probs[i];
  for (int i = 0; i < 12; ++i) {
    mean[i] /= double(track.points.size());
    track.mean_probs[i] = float(mean[i]);
  }
  track.assigned_id = decode_bits(mean).first;
}

}  // namespace beetag
