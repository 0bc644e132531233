#pragma once
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "beetag/image.hpp"
#include "beetag/localizer.hpp"
#include "beetag/synthgen.hpp"
#include "beetag/tagcodec.hpp"

namespace beetag {

struct MatchResult {
  std::vector<std::pair<int, int>> matches;  // (gt index, detection index)
  std::vector<int> misses;                   // unmatched gt indices
  std::vector<int> false_positives;          // unmatched detection indices
};

// greedy one-to-one matching in ascending distance order within d_match px
MatchResult match_detections(const std::vector<TagLabel>& gt, const std::vector<Candidate>& det,
                             double d_match);

// mhd = mean Hamming distance between true bits and thresholded probabilities;
// accuracy = fraction of pairs with zero bit errors
std::pair<double, double> score_decoding(
    const std::vector<std::pair<BitVector, std::array<float, 12>>>& pairs);

struct ConfPoint {
  double discard_fraction = 0;
  double accuracy = 0;
};

// items are (confidence, decoded-correctly); for each discard fraction f the
// accuracy over the top round((1-f)*n) items by confidence (stable order on
// ties); an empty kept set scores 1.0 vacuously
std::vector<ConfPoint> confidence_curve(const std::vector<std::pair<double, bool>>& items,
                                        const std::vector<double>& fractions);

// wall-clock inference seconds / tags decoded, in ms
double time_per_tag(double inference_seconds, uint64_t tags_decoded);

struct EvalReport {
  double recall = 0, precision = 0;
  bool precision_vacuous = false;  // no detections claimed; precision reported as 1.0
  double mhd = 0, accuracy = 0;
  double ms_per_tag = 0;
  std::vector<ConfPoint> conf_curve;
};

std::string report_text(const EvalReport& r);
std::string report_kv(const EvalReport& r);

struct OverlayItem {
  double x = 0, y = 0;  // full-resolution px
  double z_rot = 0;
  int id = 0;
  double confidence = 1.0;
};

// draws, per detection: a circle at the tag radius, a line along the
// in-plane orientation, and the decoded id in a small pixel font; mark
// intensity scales with confidence
GrayImage render_overlay(const GrayImage& frame, const std::vector<OverlayItem>& items,
                         double tag_radius = 22.0);

}  // namespace beetag
