#include "beetag/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "beetag/imgproc.hpp"

namespace beetag {

Preset preset_from_name(const std::string& name) {
  if (name == "clean") return Preset::clean;
  if (name == "moderate") return Preset::moderate;
  if (name == "hard") return Preset::hard;
  throw std::invalid_argument("unknown preset: " + name);
}

const char* preset_name(Preset p) {
  switch (p) {
    case Preset::clean: return "clean";
    case Preset::moderate: return "moderate";
    default: return "hard";
  }
}

AugmentParams sample_augment_params(Preset p, Rng& rng) {
  AugmentParams a;
  a.background_texture_seed = rng.next_u32();
  if (p == Preset::clean) return a;
  double s = p == Preset::moderate ? 0.5 : 1.0;
  a.blur_sigma = rng.uniform(0.0, 1.5 * s);
  a.noise_sigma = rng.uniform(0.0, 0.08 * s);
  a.brightness_shift = rng.uniform(-0.15 * s, 0.15 * s);
  a.contrast_scale = rng.uniform(1.0 - 0.3 * s, 1.0 + 0.3 * s);
  a.elastic_alpha = rng.uniform(0.0, 2.0 * s);
  a.elastic_sigma = 4.0;
  return a;
}

namespace {

// layered value noise: coarse uniform grids upsampled bilinearly
GrayImage value_noise(int h, int w, Rng& rng) {
  struct Octave { int scale; float amp; };
  const Octave octaves[] = {{64, 0.13f}, {24, 0.09f}, {9, 0.06f}};
  GrayImage out(h, w, 0.5f);
  for (auto [scale, amp] : octaves) {
    int gh = h / scale + 2, gw = w / scale + 2;
    GrayImage grid(gh, gw);
    for (auto& v : grid.v) v = float(rng.uniform(-1.0, 1.0));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(y, x) += amp * grid.sample_bilinear(float(y) / scale, float(x) / scale);
  }
  out.clamp01();
  return out;
}

// filled rotated ellipse, 2x2 supersampled coverage
void draw_ellipse(GrayImage& img, double cx, double cy, double ax, double ay,
                  double angle, float value) {
  double ca = std::cos(angle), sa = std::sin(angle);
  double ext = std::max(ax, ay) + 1.0;
  int x0 = std::max(0, int(cx - ext)), x1 = std::min(img.w - 1, int(cx + ext));
  int y0 = std::max(0, int(cy - ext)), y1 = std::min(img.h - 1, int(cy + ext));
  const double sub[2] = {0.25, 0.75};
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double cover = 0.0;
      for (double oy : sub)
        for (double ox : sub) {
          double dx = x + ox - cx, dy = y + oy - cy;
          double ux = (ca * dx + sa * dy) / ax;
          double uy = (-sa * dx + ca * dy) / ay;
          if (ux * ux + uy * uy <= 1.0) cover += 0.25;
        }
      if (cover > 0.0) {
        float& px = img.at(y, x);
        px = px * float(1.0 - cover) + value * float(cover);
      }
    }
  }
}

// bee body under a marker: dark elongated ellipse aligned with the tag,
// shifted backwards so the marker sits on the thorax
void draw_body(GrayImage& img, double cx, double cy, double z_rot, Rng& rng) {
  double along = rng.uniform(28.0, 36.0), across = rng.uniform(13.0, 18.0);
  double back = rng.uniform(6.0, 14.0);
  double bx = cx - std::cos(z_rot) * back, by = cy - std::sin(z_rot) * back;
  draw_ellipse(img, bx, by, along, across, z_rot, float(rng.uniform(0.12, 0.28)));
}

GrayImage elastic_deform(const GrayImage& img, double alpha, double sigma, Rng& rng) {
  GrayImage fx(img.h, img.w), fy(img.h, img.w);
  for (auto& v : fx.v) v = float(rng.uniform(-1.0, 1.0));
  for (auto& v : fy.v) v = float(rng.uniform(-1.0, 1.0));
  fx = gaussian_blur(fx, sigma);
  fy = gaussian_blur(fy, sigma);
  float max_abs = 1e-9f;
  for (auto v : fx.v) max_abs = std::max(max_abs, std::fabs(v));
  for (auto v : fy.v) max_abs = std::max(max_abs, std::fabs(v));
  float scale = float(alpha) / max_abs;
  GrayImage out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      out.at(y, x) = img.sample_bilinear(y + fy.at(y, x) * scale, x + fx.at(y, x) * scale);
  return out;
}

void composite_tag(GrayImage& frame, const TagLabel& label, const TagGeometry& geom) {
  int patch = 64;
  int tlx = int(std::lround(label.pose.center_x)) - patch / 2;
  int tly = int(std::lround(label.pose.center_y)) - patch / 2;
  TagPose local = label.pose;
  local.center_x = label.pose.center_x - tlx;
  local.center_y = label.pose.center_y - tly;
  GrayImage value, alpha;
  rasterize_tag_alpha(label.bits, local, geom, patch, value, alpha);
  for (int y = 0; y < patch; ++y) {
    int fy = tly + y;
    if (fy < 0 || fy >= frame.h) continue;
    for (int x = 0; x < patch; ++x) {
      int fx = tlx + x;
      if (fx < 0 || fx >= frame.w) continue;
      float a = alpha.at(y, x);
      frame.at(fy, fx) = frame.at(fy, fx) * (1 - a) + value.at(y, x) * a;
    }
  }
}

TagPose sample_pose(Rng& rng) {
  TagPose pose;
  pose.z_rot = M_PI - 2.0 * M_PI * rng.uniform();
  pose.y_rot = rng.uniform(-M_PI / 6.0, M_PI / 6.0);
  pose.x_rot = rng.uniform(-M_PI / 6.0, M_PI / 6.0);
  return pose;
}

}  // namespace

GrayImage augment(const GrayImage& img, const AugmentParams& params, uint64_t rng_seed) {
  Rng rng(rng_seed);
  GrayImage out = img;
  if (params.elastic_alpha > 0.0)
    out = elastic_deform(out, params.elastic_alpha, params.elastic_sigma, rng);
  if (params.blur_sigma > 0.0) out = gaussian_blur(out, params.blur_sigma);
  if (params.contrast_scale != 1.0 || params.brightness_shift != 0.0)
    for (auto& v : out.v)
      v = (v - 0.5f) * float(params.contrast_scale) + 0.5f + float(params.brightness_shift);
  if (params.noise_sigma > 0.0)
    for (auto& v : out.v) v += float(rng.normal() * params.noise_sigma);
  out.clamp01();
  return out;
}

std::pair<GrayImage, TagLabel> generate_patch(uint64_t rng_seed, const AugmentParams& params) {
  Rng rng(rng_seed);
  TagGeometry geom;
  TagLabel label;
  label.id = TagId{int(rng.uniform_int(4096))};
  label.bits = encode_id(label.id);
  label.pose = sample_pose(rng);
  label.pose.center_x = 32.0 + rng.uniform(-8.0, 8.0);
  label.pose.center_y = 32.0 + rng.uniform(-8.0, 8.0);

  Rng bg_rng = rng.fork(params.background_texture_seed);
  GrayImage img = value_noise(64, 64, bg_rng);
  draw_body(img, label.pose.center_x, label.pose.center_y, label.pose.z_rot, rng);

  GrayImage value, alpha;
  TagPose pose = label.pose;
  rasterize_tag_alpha(label.bits, pose, geom, 64, value, alpha);
  for (size_t i = 0; i < img.v.size(); ++i)
    img.v[i] = img.v[i] * (1 - alpha.v[i]) + value.v[i] * alpha.v[i];

  uint64_t aug_seed = (uint64_t(rng.next_u32()) << 32) | rng.next_u32();
  return {augment(img, params, aug_seed), label};
}

std::pair<GrayImage, TagLabel> generate_patch(uint64_t rng_seed, Preset preset) {
  Rng prng(rng_seed ^ 0x5eedf00dull);
  return generate_patch(rng_seed, sample_augment_params(preset, prng));
}

FrameScene generate_frame(uint64_t rng_seed, int n_tags, int frame_h, int frame_w,
                          const AugmentParams& params) {
  if (n_tags < 0) throw std::invalid_argument("generate_frame: n_tags must be >= 0");
  Rng rng(rng_seed);
  TagGeometry geom;
  const double min_sep = std::max(128.0, 1.2 * 2.0 * geom.outer_radius_px);
  const double margin = 80.0;
  if (frame_h < 128 || frame_w < 128)
    throw std::invalid_argument("generate_frame: frame must be at least 128x128");
  if (n_tags > 0 && (frame_w <= 2 * margin || frame_h <= 2 * margin))
    throw std::runtime_error("generate_frame: frame too small to place tags");

  FrameScene scene;
  Rng bg_rng = rng.fork(params.background_texture_seed);
  scene.image = value_noise(frame_h, frame_w, bg_rng);

  // rejection sampling can jam at high densities; a fresh restart escapes
  // configurations that left no room for the remaining tags
  for (int round = 0; int(scene.labels.size()) < n_tags; ++round) {
    if (round == 16)
      throw std::runtime_error("generate_frame: cannot place tags with required separation");
    scene.labels.clear();
    int budget = 40 * n_tags;
    while (int(scene.labels.size()) < n_tags && budget >= 0) {
      double cx = rng.uniform(margin, frame_w - margin);
      double cy = rng.uniform(margin, frame_h - margin);
      bool ok = true;
      for (const auto& l : scene.labels) {
        if (std::max(std::fabs(cx - l.pose.center_x), std::fabs(cy - l.pose.center_y)) <
            min_sep) {
          ok = false;
          --budget;
          break;
        }
      }
      if (!ok) continue;
      TagLabel label;
      label.id = TagId{int(rng.uniform_int(4096))};
      label.bits = encode_id(label.id);
      label.pose = sample_pose(rng);
      label.pose.center_x = cx;
      label.pose.center_y = cy;
      scene.labels.push_back(label);
    }
  }

  // tagless distractors: bee bodies and bright patches away from the markers
  int n_distract = n_tags / 2 + 2;
  for (int i = 0; i < n_distract; ++i) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      double cx = rng.uniform(40.0, frame_w - 40.0);
      double cy = rng.uniform(40.0, frame_h - 40.0);
      bool clear = true;
      for (const auto& l : scene.labels) {
        double dx = cx - l.pose.center_x, dy = cy - l.pose.center_y;
        if (dx * dx + dy * dy < 100.0 * 100.0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      double angle = rng.uniform(-M_PI, M_PI);
      if (rng.uniform() < 0.7)
        draw_ellipse(scene.image, cx, cy, rng.uniform(26.0, 36.0), rng.uniform(12.0, 18.0),
                     angle, float(rng.uniform(0.12, 0.3)));
      else
        draw_ellipse(scene.image, cx, cy, rng.uniform(10.0, 22.0), rng.uniform(8.0, 16.0),
                     angle, float(rng.uniform(0.72, 0.86)));
      break;
    }
  }

  for (const auto& label : scene.labels) {
    draw_body(scene.image, label.pose.center_x, label.pose.center_y, label.pose.z_rot, rng);
    composite_tag(scene.image, label, geom);
  }

  AugmentParams frame_params = params;
  frame_params.elastic_alpha = 0.0;  // keeps stored centers exact
  uint64_t aug_seed = (uint64_t(rng.next_u32()) << 32) | rng.next_u32();
  scene.image = augment(scene.image, frame_params, aug_seed);
  return scene;
}

FrameScene generate_frame(uint64_t rng_seed, int n_tags, int frame_h, int frame_w,
                          Preset preset) {
  Rng prng(rng_seed ^ 0xf4a3e5eedull);
  return generate_frame(rng_seed, n_tags, frame_h, frame_w, sample_augment_params(preset, prng));
}

void write_sidecar(const std::vector<TagLabel>& labels, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  char line[160];
  for (const auto& l : labels) {
    std::snprintf(line, sizeof line, "%d %.6f %.6f %.6f %.6f %.6f\n", l.id.value,
                  l.pose.center_x, l.pose.center_y, l.pose.z_rot, l.pose.y_rot, l.pose.x_rot);
    f << line;
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<TagLabel> read_sidecar(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<TagLabel> labels;
  int id;
  double cx, cy, z, y, x;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (std::sscanf(line.c_str(), "%d %lf %lf %lf %lf %lf", &id, &cx, &cy, &z, &y, &x) != 6)
      throw std::runtime_error(path + ": malformed sidecar line: " + line);
    TagLabel l;
    l.id = TagId{id};
    l.bits = encode_id(l.id);
    l.pose = {z, y, x, cx, cy};
    labels.push_back(l);
  }
  return labels;
}

}  // namespace beetag
