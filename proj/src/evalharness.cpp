#include "beetag/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace beetag {

MatchResult match_detections(const std::vector<TagLabel>& gt, const std::vector<Candidate>& det,
                             double d_match) {
  if (d_match <= 0) throw std::invalid_argument("match_detections: d_match must be positive");

  struct Pair {
    double d;
    int gi, di;
  };
  std::vector<Pair> pairs;
  for (int gi = 0; gi < int(gt.size()); ++gi)
    for (int di = 0; di < int(det.size()); ++di) {
      double d = std::hypot(gt[gi].pose.center_x - det[di].x, gt[gi].pose.center_y - det[di].y);
      if (d <= d_match) pairs.push_back({d, gi, di});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.di < b.di;
  });

  MatchResult res;
  std::vector<char> gt_used(gt.size(), 0), det_used(det.size(), 0);
  for (const auto& p : pairs) {
    if (gt_used[p.gi] || det_used[p.di]) continue;
    gt_used[p.gi] = 1;
    det_used[p.di] = 1;
    res.matches.push_back({p.gi, p.di});
  }
  for (int gi = 0; gi < int(gt.size()); ++gi)
    if (!gt_used[gi]) res.misses.push_back(gi);
  for (int di = 0; di < int(det.size()); ++di)
    if (!det_used[di]) res.false_positives.push_back(di);
  return res;
}

std::pair<double, double> score_decoding(
    const std::vector<std::pair<BitVector, std::array<float, 12>>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("score_decoding: no matched pairs");
  long total_errors = 0, perfect = 0;
  for (const auto& [bits, probs] : pairs) {
    int errors = 0;
    for (int i = 0; i < 12; ++i) {
      int decoded = probs[i] >= 0.5f ? 1 : 0;
      errors += decoded != bits[i];
    }
    total_errors += errors;
    perfect += errors == 0;
  }
  double n = double(pairs.size());
  return {total_errors / n, perfect / n};
}

std::vector<ConfPoint> confidence_curve(const std::vector<std::pair<double, bool>>& items,
                                        const std::vector<double>& fractions) {
  for (size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0))
      throw std::invalid_argument("confidence_curve: fractions must lie in [0,1)");
    if (i > 0 && fractions[i] <= fractions[i - 1])
      throw std::invalid_argument("confidence_curve: fractions must be strictly increasing");
  }
  std::vector<int> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return items[a].first > items[b].first; });

  std::vector<ConfPoint> curve;
  curve.reserve(fractions.size());
  for (double f : fractions) {
    size_t k = size_t(std::llround((1.0 - f) * double(items.size())));
    long correct = 0;
    for (size_t i = 0; i < k; ++i) correct += items[order[i]].second;
    curve.push_back({f, k == 0 ? 1.0 : double(correct) / double(k)});
  }
  return curve;
}

double time_per_tag(double inference_seconds, uint64_t tags_decoded) {
  if (tags_decoded == 0) throw std::invalid_argument("time_per_tag: no tags decoded");
  return inference_seconds * 1000.0 / double(tags_decoded);
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "recall      %.4f\n", r.recall);
  os << line;
  std::snprintf(line, sizeof line, "precision   %.4f%s\n", r.precision,
                r.precision_vacuous ? "  (vacuous: no detections claimed)" : "");
  os << line;
  std::snprintf(line, sizeof line, "mhd         %.4f\n", r.mhd);
  os << line;
  std::snprintf(line, sizeof line, "accuracy    %.4f\n", r.accuracy);
  os << line;
  std::snprintf(line, sizeof line, "ms_per_tag  %.4f\n", r.ms_per_tag);
  os << line;
  for (const auto& p : r.conf_curve) {
    std::snprintf(line, sizeof line, "conf_curve  discard=%.2f accuracy=%.4f\n",
                  p.discard_fraction, p.accuracy);
    os << line;
  }
  return os.str();
}

std::string report_kv(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "recall=%.6f\nprecision=%.6f\nprecision_vacuous=%d\n",
                r.recall, r.precision, int(r.precision_vacuous));
  os << line;
  std::snprintf(line, sizeof line, "mhd=%.6f\naccuracy=%.6f\nms_per_tag=%.6f\n", r.mhd,
                r.accuracy, r.ms_per_tag);
  os << line;
  for (const auto& p : r.conf_curve) {
    std::snprintf(line, sizeof line, "conf_curve_%.2f=%.6f\n", p.discard_fraction, p.accuracy);
    os << line;
  }
  return os.str();
}

namespace {
// 3x5 digit glyphs, one row per entry, 3 low bits used
constexpr uint8_t kFont[10][5] = {
    {0b111, 0b101, 0b101, 0b101, 0b111}, {0b010, 0b110, 0b010, 0b010, 0b111},
    {0b111, 0b001, 0b111, 0b100, 0b111}, {0b111, 0b001, 0b111, 0b001, 0b111},
    {0b101, 0b101, 0b111, 0b001, 0b001}, {0b111, 0b100, 0b111, 0b001, 0b111},
    {0b111, 0b100, 0b111, 0b101, 0b111}, {0b111, 0b001, 0b010, 0b010, 0b010},
    {0b111, 0b101, 0b111, 0b101, 0b111}, {0b111, 0b101, 0b111, 0b001, 0b111}};

void put_px(GrayImage& img, int x, int y, float v) {
  if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
  img.at(y, x) = std::max(img.at(y, x), v);
}

void draw_digit(GrayImage& img, int digit, int x0, int y0, int scale, float v) {
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) {
      if (!((kFont[digit][r] >> (2 - c)) & 1)) continue;
      for (int sy = 0; sy < scale; ++sy)
        for (int sx = 0; sx < scale; ++sx)
          put_px(img, x0 + c * scale + sx, y0 + r * scale + sy, v);
    }
}
}  // namespace

GrayImage render_overlay(const GrayImage& frame, const std::vector<OverlayItem>& items,
                         double tag_radius) {
  GrayImage out = frame;
  for (const auto& it : items) {
    float v = float(0.35 + 0.65 * std::clamp(it.confidence, 0.0, 1.0));

    int steps = std::max(32, int(tag_radius * 8));
    for (int s = 0; s < steps; ++s) {
      double a = 2.0 * 3.14159265358979323846 * s / steps;
      put_px(out, int(std::lround(it.x + tag_radius * std::cos(a))),
             int(std::lround(it.y + tag_radius * std::sin(a))), v);
    }
    for (int s = 0; s <= int(tag_radius); ++s)
      put_px(out, int(std::lround(it.x + s * std::cos(it.z_rot))),
             int(std::lround(it.y + s * std::sin(it.z_rot))), v);

    int id = std::clamp(it.id, 0, 4095);
    char text[8];
    std::snprintf(text, sizeof text, "%04d", id);
    int scale = 2, adv = 3 * scale + scale;  // glyph width + 1 glyph-pixel gap
    int x0 = int(std::lround(it.x)) - 2 * adv + scale / 2;
    int y0 = int(std::lround(it.y + tag_radius)) + 3;
    for (int i = 0; i < 4; ++i) draw_digit(out, text[i] - '0', x0 + i * adv, y0, scale, v);
  }
  return out;
}

}  // namespace beetag
