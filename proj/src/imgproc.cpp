#include "beetag/imgproc.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace beetag {

namespace {

constexpr int kBins = 256;

inline int value_bin(float v) {
  int b = int(v * kBins);
  return std::clamp(b, 0, kBins - 1);
}

// midpoint-CDF lookup table for one (possibly clipped) histogram
void build_lut(const std::array<double, kBins>& hist, double n, float* lut) {
  double cum = 0.0;
  for (int b = 0; b < kBins; ++b) {
    lut[b] = float((cum + hist[b] * 0.5) / n);
    cum += hist[b];
  }
}

struct AxisBlend {
  std::vector<int> i0, i1;
  std::vector<float> f;
};

// per-pixel blend between the two nearest tile centers along one axis
AxisBlend make_axis_blend(int extent, int tiles, const std::vector<double>& centers) {
  AxisBlend ab;
  ab.i0.resize(extent);
  ab.i1.resize(extent);
  ab.f.resize(extent);
  for (int p = 0; p < extent; ++p) {
    if (p <= centers.front() || tiles == 1) {
      ab.i0[p] = ab.i1[p] = 0;
      ab.f[p] = 0.f;
    } else if (p >= centers.back()) {
      ab.i0[p] = ab.i1[p] = tiles - 1;
      ab.f[p] = 0.f;
    } else {
      int t = 0;
      while (p >= centers[t + 1]) ++t;
      ab.i0[p] = t;
      ab.i1[p] = t + 1;
      ab.f[p] = float((p - centers[t]) / (centers[t + 1] - centers[t]));
    }
  }
  return ab;
}

}  // namespace

GrayImage clahe(const GrayImage& img, int tile_rows, int tile_cols, double clip_limit) {
  if (tile_rows < 1 || tile_cols < 1) throw std::invalid_argument("clahe: tiles must be >= 1");
  if (clip_limit < 1.0) throw std::invalid_argument("clahe: clip_limit must be >= 1");
  if (img.h < tile_rows || img.w < tile_cols)
    throw std::invalid_argument("clahe: image smaller than tile grid");

  std::vector<int> row_start(tile_rows + 1), col_start(tile_cols + 1);
  for (int r = 0; r <= tile_rows; ++r) row_start[r] = int(int64_t(r) * img.h / tile_rows);
  for (int c = 0; c <= tile_cols; ++c) col_start[c] = int(int64_t(c) * img.w / tile_cols);

  std::vector<double> row_center(tile_rows), col_center(tile_cols);
  for (int r = 0; r < tile_rows; ++r)
    row_center[r] = 0.5 * (row_start[r] + row_start[r + 1] - 1);
  for (int c = 0; c < tile_cols; ++c)
    col_center[c] = 0.5 * (col_start[c] + col_start[c + 1] - 1);

  std::vector<float> luts(size_t(tile_rows) * tile_cols * kBins);
  for (int tr = 0; tr < tile_rows; ++tr) {
    for (int tc = 0; tc < tile_cols; ++tc) {
      std::array<double, kBins> hist{};
      for (int y = row_start[tr]; y < row_start[tr + 1]; ++y)
        for (int x = col_start[tc]; x < col_start[tc + 1]; ++x)
          hist[value_bin(img.at(y, x))] += 1.0;
      double n = double(row_start[tr + 1] - row_start[tr]) *
                 double(col_start[tc + 1] - col_start[tc]);
      double limit = clip_limit * n / kBins;
      double excess = 0.0;
      for (auto& h : hist) {
        if (h > limit) {
          excess += h - limit;
          h = limit;
        }
      }
      double add = excess / kBins;
      for (auto& h : hist) h += add;
      build_lut(hist, n, &luts[(size_t(tr) * tile_cols + tc) * kBins]);
    }
  }

  AxisBlend rows = make_axis_blend(img.h, tile_rows, row_center);
  AxisBlend cols = make_axis_blend(img.w, tile_cols, col_center);

  GrayImage out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    const float* lut_r0 = &luts[size_t(rows.i0[y]) * tile_cols * kBins];
    const float* lut_r1 = &luts[size_t(rows.i1[y]) * tile_cols * kBins];
    float fy = rows.f[y];
    for (int x = 0; x < img.w; ++x) {
      int b = value_bin(img.at(y, x));
      float fx = cols.f[x];
      float top = lut_r0[size_t(cols.i0[x]) * kBins + b] * (1 - fx) +
                  lut_r0[size_t(cols.i1[x]) * kBins + b] * fx;
      float bot = lut_r1[size_t(cols.i0[x]) * kBins + b] * (1 - fx) +
                  lut_r1[size_t(cols.i1[x]) * kBins + b] * fx;
      out.at(y, x) = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
  GrayImage out(out_h, out_w);
  double sy = out_h > 1 ? double(img.h - 1) / (out_h - 1) : 0.0;
  double sx = out_w > 1 ? double(img.w - 1) / (out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      out.at(y, x) = img.sample_bilinear(float(y * sy), float(x * sx));
  return out;
}

GrayImage downsample4(const GrayImage& img) {
  GrayImage out(img.h / 4, img.w / 4);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      int sy = 4 * y + 1, sx = 4 * x + 1;
      out.at(y, x) = 0.25f * (img.at(sy, sx) + img.at(sy, sx + 1) +
                              img.at(sy + 1, sx) + img.at(sy + 1, sx + 1));
    }
  }
  return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = float(v);
    sum += v;
  }
  for (auto& v : k) v = float(v / sum);

  GrayImage tmp(img.h, img.w), out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img.at_clamped(y, x + i);
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at_clamped(y + i, x);
      out.at(y, x) = acc;
    }
  return out;
}

namespace {

template <typename Cmp>
GrayImage window_extreme(const GrayImage& img, int radius, Cmp better) {
  GrayImage tmp(img.h, img.w), out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      float best = img.at(y, std::clamp(x - radius, 0, img.w - 1));
      for (int i = -radius + 1; i <= radius; ++i) {
        float v = img.at_clamped(y, x + i);
        if (better(v, best)) best = v;
      }
      tmp.at(y, x) = best;
    }
  }
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      float best = tmp.at(std::clamp(y - radius, 0, img.h - 1), x);
      for (int i = -radius + 1; i <= radius; ++i) {
        float v = tmp.at_clamped(y + i, x);
        if (better(v, best)) best = v;
      }
      out.at(y, x) = best;
    }
  }
  return out;
}

}  // namespace

GrayImage max_filter(const GrayImage& img, int radius) {
  if (radius < 1) throw std::invalid_argument("max_filter: radius must be >= 1");
  return window_extreme(img, radius, [](float a, float b) { return a > b; });
}

GrayImage morph_erode(const GrayImage& img, int radius) {
  return window_extreme(img, radius, [](float a, float b) { return a < b; });
}

GrayImage morph_dilate(const GrayImage& img, int radius) {
  return window_extreme(img, radius, [](float a, float b) { return a > b; });
}

GrayImage morph_open(const GrayImage& img, int radius) {
  return morph_dilate(morph_erode(img, radius), radius);
}

GrayImage morph_close(const GrayImage& img, int radius) {
  return morph_erode(morph_dilate(img, radius), radius);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  auto next_token = [&]() -> std::string {
    std::string t;
    int c;
    while ((c = f.get()) != EOF) {
      if (c == '#') {
        while ((c = f.get()) != EOF && c != '\n') {
        }
      } else if (!std::isspace(c)) {
        t.push_back(char(c));
        while ((c = f.peek()) != EOF && !std::isspace(c) && c != '#') t.push_back(char(f.get()));
        return t;
      }
    }
    return t;
  };
  if (next_token() != "P5") throw std::runtime_error(path + ": not a binary PGM");
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w < 1 || h < 1) throw std::runtime_error(path + ": bad PGM dimensions");
  if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 supported");
  f.get();  // single whitespace byte after maxval
  std::vector<unsigned char> raw(size_t(h) * w);
  f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (size_t(f.gcount()) != raw.size()) throw std::runtime_error(path + ": truncated PGM data");
  GrayImage img(h, w);
  for (size_t i = 0; i < raw.size(); ++i) img.v[i] = raw[i] / 255.f;
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> raw(img.v.size());
  for (size_t i = 0; i < img.v.size(); ++i)
    raw[i] = (unsigned char)std::lround(std::clamp(img.v[i], 0.f, 1.f) * 255.f);
  f.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace beetag
