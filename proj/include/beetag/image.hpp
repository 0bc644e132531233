#pragma once
#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

namespace beetag {

// Row-major grayscale image, values nominally in [0, 1].
struct GrayImage {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  GrayImage() = default;
  GrayImage(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

  float& at(int y, int x) { return v[size_t(y) * w + x]; }
  float at(int y, int x) const { return v[size_t(y) * w + x]; }

  // clamp-to-edge read
  float at_clamped(int y, int x) const {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return v[size_t(y) * w + x];
  }

  // bilinear sample at continuous position (x, y), pixel centers at integers
  float sample_bilinear(float y, float x) const {
    int y0 = int(std::floor(y)), x0 = int(std::floor(x));
    float fy = y - y0, fx = x - x0;
    float a = at_clamped(y0, x0), b = at_clamped(y0, x0 + 1);
    float c = at_clamped(y0 + 1, x0), d = at_clamped(y0 + 1, x0 + 1);
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
  }

  void clamp01() {
    for (auto& x : v) x = std::clamp(x, 0.f, 1.f);
  }
};

}  // namespace beetag
