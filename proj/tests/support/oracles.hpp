// Brute-force reference implementations the optimized kernels are tested
// against. These intentionally share no code with src/: each is written in
// the most literal form the definition allows.
#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "beetag/image.hpp"
#include "beetag/nn/tensor.hpp"

namespace oracles {

// quadruple-loop 2d convolution (cross-correlation, like the engine),
// weights laid out (out_c, in_c, k, k), zero padding
template <typename T>
beetag::nn::Ten4<T> conv2d(const beetag::nn::Ten4<T>& x, const std::vector<T>& w,
                           const std::vector<T>& b, int out_c, int k, int stride, int pad) {
  int oh = (x.h + 2 * pad - k) / stride + 1;
  int ow = (x.w + 2 * pad - k) / stride + 1;
  beetag::nn::Ten4<T> y(x.n, out_c, oh, ow);
  for (int in = 0; in < x.n; ++in)
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = b[oc];
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                int sy = oy * stride + ky - pad;
                int sx = ox * stride + kx - pad;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                acc += w[((size_t(oc) * x.c + ic) * k + ky) * k + kx] * x.at(in, ic, sy, sx);
              }
          y.at(in, oc, oy, ox) = acc;
        }
  return y;
}

// per-pixel extreme over the clamped (2r+1)^2 window
inline beetag::GrayImage window_max(const beetag::GrayImage& img, int radius) {
  beetag::GrayImage out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float best = -1e30f;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          int sy = std::clamp(y + dy, 0, img.h - 1);
          int sx = std::clamp(x + dx, 0, img.w - 1);
          best = std::max(best, img.at(sy, sx));
        }
      out.at(y, x) = best;
    }
  return out;
}

inline beetag::GrayImage window_min(const beetag::GrayImage& img, int radius) {
  beetag::GrayImage out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float best = 1e30f;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          int sy = std::clamp(y + dy, 0, img.h - 1);
          int sx = std::clamp(x + dx, 0, img.w - 1);
          best = std::min(best, img.at(sy, sx));
        }
      out.at(y, x) = best;
    }
  return out;
}

// plain global histogram equalization, 256 bins, midpoint-CDF convention:
// m(b) = (cdf(b-1) + hist(b)/2) / n
inline beetag::GrayImage hist_equalize(const beetag::GrayImage& img) {
  auto bin_of = [](float v) { return std::clamp(int(v * 256.0f), 0, 255); };
  std::vector<double> hist(256, 0.0);
  for (float v : img.v) hist[bin_of(v)] += 1.0;
  double n = double(img.v.size());
  std::vector<double> mapping(256);
  double cdf_before = 0.0;
  for (int b = 0; b < 256; ++b) {
    mapping[b] = (cdf_before + hist[b] / 2.0) / n;
    cdf_before += hist[b];
  }
  beetag::GrayImage out(img.h, img.w);
  for (size_t i = 0; i < img.v.size(); ++i) out.v[i] = float(mapping[bin_of(img.v[i])]);
  return out;
}

// id -> 12 bits, most significant first, via repeated division
inline std::vector<int> id_bits(int id) {
  std::vector<int> rev;
  int v = id;
  for (int i = 0; i < 12; ++i) {
    rev.push_back(v % 2);
    v /= 2;
  }
  return std::vector<int>(rev.rbegin(), rev.rend());
}

// strict local maxima under the max-filter convention: keep (y, x) iff its
// value equals the window max and exceeds the threshold
inline std::vector<std::pair<int, int>> local_peaks(const beetag::GrayImage& img, int radius,
                                                    double threshold) {
  beetag::GrayImage m = window_max(img, radius);
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      if (img.at(y, x) > threshold && img.at(y, x) == m.at(y, x)) out.push_back({y, x});
  return out;
}

}  // namespace oracles
