#include "beetag/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "beetag/imgproc.hpp"
#include "beetag/nn/flatten.hpp"

namespace beetag {

namespace {
constexpr double kPi = 3.14159265358979323846;

double min_dist(double cx, double cy, const std::vector<TagLabel>& labels) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : labels) {
    double dx = cx - l.pose.center_x, dy = cy - l.pose.center_y;
    best = std::min(best, std::hypot(dx, dy));
  }
  return best;
}
}  // namespace

double make_target(double center_x, double center_y, const std::vector<TagLabel>& labels,
                   double sigma) {
  if (labels.empty()) return 0.0;
  double d = min_dist(center_x, center_y, labels);
  return std::exp(-d * d / (2.0 * sigma * sigma));
}

std::vector<LocTrainSample> sample_training_set(const std::vector<FrameScene>& scenes, int n,
                                                uint64_t seed, const LocSampleConfig& cfg) {
  if (n <= 0) return {};
  if (scenes.empty()) throw std::invalid_argument("sample_training_set: no scenes");
  std::vector<GrayImage> pre;
  pre.reserve(scenes.size());
  for (const auto& s : scenes) {
    if (s.image.h < 128 || s.image.w < 128)
      throw std::invalid_argument("sample_training_set: frames must be at least 128 px");
    pre.push_back(clahe(s.image, cfg.clahe_tiles, cfg.clahe_tiles, cfg.clahe_clip));
  }

  Rng rng(seed);
  int n_pos = int(std::lround(n * cfg.positive_ratio));
  int n_ann = int(std::lround(n * (1.0 - cfg.positive_ratio) * 0.5));
  double annulus_lo = cfg.sigma * 1.25, annulus_hi = cfg.sigma * 5.0;

  std::vector<LocTrainSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    int kind = k < n_pos ? 0 : (k < n_pos + n_ann ? 1 : 2);
    int si = int(rng.uniform_int(uint32_t(scenes.size())));
    const auto& labels = scenes[si].labels;
    const auto& img = pre[si];
    if (labels.empty()) kind = 2;

    double acx = 0, acy = 0, target = 0;
    int tlx = 0, tly = 0;
    // clamping the window can shift the center near frame edges, so retry
    // until the drawn kind's target condition holds for the actual center
    for (int attempt = 0; attempt < 8; ++attempt) {
      double cx, cy;
      if (kind == 0) {
        const auto& lab = labels[rng.uniform_int(uint32_t(labels.size()))];
        double r = cfg.sigma * std::sqrt(rng.uniform());
        double th = rng.uniform() * 2.0 * kPi;
        cx = lab.pose.center_x + r * std::cos(th);
        cy = lab.pose.center_y + r * std::sin(th);
      } else if (kind == 1) {
        const auto& lab = labels[rng.uniform_int(uint32_t(labels.size()))];
        double r = rng.uniform(annulus_lo, annulus_hi);
        double th = rng.uniform() * 2.0 * kPi;
        cx = lab.pose.center_x + r * std::cos(th);
        cy = lab.pose.center_y + r * std::sin(th);
      } else {
        cx = rng.uniform(64.0, img.w - 64.0);
        cy = rng.uniform(64.0, img.h - 64.0);
      }
      tlx = std::clamp(int(std::lround(cx)) - 64, 0, img.w - 128);
      tly = std::clamp(int(std::lround(cy)) - 64, 0, img.h - 128);
      acx = tlx + 64.0;
      acy = tly + 64.0;
      target = make_target(acx, acy, labels, cfg.sigma);
      bool ok = kind == 0 ? target > 0.5
              : kind == 1 ? target <= 0.5
                          : (labels.empty() || min_dist(acx, acy, labels) >= annulus_lo);
      if (ok) break;
    }

    GrayImage win(128, 128);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) win.at(y, x) = img.at(tly + y, tlx + x);
    out.push_back({downsample4(win), float(target)});
  }
  return out;
}

LocalizerNet train_localizer(const std::vector<LocTrainSample>& samples,
                             const LocTrainConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("train_localizer: no samples");
  for (const auto& s : samples)
    if (s.patch.h != 32 || s.patch.w != 32)
      throw std::invalid_argument("train_localizer: patches must be 32x32");

  LocalizerNet net(cfg.widths, cfg.dropout, cfg.seed);
  auto params = net.params();
  nn::Sgd<float> opt(cfg.sgd.learning_rate, cfg.sgd.momentum);
  Rng shuffle_rng(cfg.seed ^ 0x10ca112e5eedull);

  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  int bs_max = std::max(1, cfg.sgd.batch_size);
  for (int epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += size_t(bs_max)) {
      int bs = int(std::min(order.size() - start, size_t(bs_max)));
      nn::Ten4<float> x(bs, 1, 32, 32), t(bs, 1, 1, 1);
      for (int b = 0; b < bs; ++b) {
        const auto& s = samples[order[start + b]];
        std::copy(s.patch.v.begin(), s.patch.v.end(), x.ptr(b, 0));
        t.at(b, 0, 0, 0) = s.target;
      }
      auto p = net.forward(x, true);
      nn::Ten4<float> g;
      double loss = bce_loss(p, t, g);
      nn::Sgd<float>::zero_grads(params);
      net.backward(g);
      opt.step(params);
      loss_sum += loss * bs;
    }
    if (cfg.epoch_log) cfg.epoch_log(epoch, loss_sum / double(samples.size()));
  }
  return net;
}

nn::Checkpoint localizer_to_checkpoint(LocalizerNet& net, uint64_t epoch, uint64_t seed) {
  nn::Checkpoint ck;
  ck.descriptor = net.descriptor();
  ck.epoch = epoch;
  ck.seed = seed;
  auto ps = net.params();
  ck.learn = nn::flatten_params(ps);
  return ck;
}

LocalizerNet localizer_from_checkpoint(const nn::Checkpoint& ck) {
  auto [model, spec] = nn::spec_from_string(ck.descriptor);
  (void)spec;
  int v = 0, w0 = 0, w1 = 0, w2 = 0;
  double drop = 0;
  if (std::sscanf(model.c_str(), "localizer v=%d widths=%d,%d,%d dropout=%lf", &v, &w0, &w1,
                  &w2, &drop) != 5 ||
      v != 1)
    throw std::invalid_argument("checkpoint does not describe a localizer model");
  LocalizerNet net({w0, w1, w2}, drop, ck.seed);
  auto ps = net.params();
  nn::unflatten_params(ck.learn, ps);
  if (!ck.buffers.empty())
    throw std::invalid_argument("checkpoint buffer count mismatch");
  return net;
}

SaliencyMap infer_saliency_preprocessed(const GrayImage& preprocessed, LocalizerNet& net) {
  if (preprocessed.h < 128 || preprocessed.w < 128)
    throw std::invalid_argument("infer_saliency: frame must be at least 128 px");
  GrayImage small = downsample4(preprocessed);
  nn::Ten4<float> x(1, 1, small.h, small.w);
  std::copy(small.v.begin(), small.v.end(), x.ptr(0, 0));
  auto y = net.forward(x, false);
  SaliencyMap sal;
  sal.grid = GrayImage(y.h, y.w);
  std::copy(y.ptr(0, 0), y.ptr(0, 0) + size_t(y.h) * y.w, sal.grid.v.begin());
  return sal;
}

SaliencyMap infer_saliency(const GrayImage& frame, LocalizerNet& net, int clahe_tiles,
                           double clahe_clip) {
  return infer_saliency_preprocessed(clahe(frame, clahe_tiles, clahe_tiles, clahe_clip), net);
}

namespace {
// log-domain parabola through three samples; exact for a gaussian peak
double subcell_offset(double vm, double v0, double vp) {
  double lm = std::log(std::max(vm, 1e-12));
  double l0 = std::log(std::max(v0, 1e-12));
  double lp = std::log(std::max(vp, 1e-12));
  double denom = lm - 2.0 * l0 + lp;
  if (denom >= -1e-12) return 0.0;
  return std::clamp(0.5 * (lm - lp) / denom, -0.5, 0.5);
}
}  // namespace

std::vector<Candidate> extract_candidates(const SaliencyMap& sal, const CandidateParams& params) {
  const GrayImage* workp = &sal.grid;
  GrayImage opened;
  if (params.morph_open_radius >= 1) {
    opened = morph_open(sal.grid, params.morph_open_radius);
    workp = &opened;
  }
  const GrayImage& work = *workp;
  GrayImage mx = max_filter(work, params.nms_radius);

  struct Raw {
    int i, j;
    double x, y, s;
  };
  std::vector<Raw> raws;
  for (int i = 0; i < work.h; ++i)
    for (int j = 0; j < work.w; ++j) {
      float v = work.at(i, j);
      if (v < params.threshold || v != mx.at(i, j)) continue;
      double dx = 0, dy = 0;
      if (params.refine_subcell) {
        if (j > 0 && j + 1 < work.w) dx = subcell_offset(work.at(i, j - 1), v, work.at(i, j + 1));
        if (i > 0 && i + 1 < work.h) dy = subcell_offset(work.at(i - 1, j), v, work.at(i + 1, j));
      }
      raws.push_back({i, j, sal.cell_x(j + dx), sal.cell_y(i + dy), double(v)});
    }

  std::sort(raws.begin(), raws.end(), [](const Raw& a, const Raw& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  std::vector<Candidate> kept;
  for (const auto& r : raws) {
    bool dup = false;
    for (const auto& c : kept)
      if (std::hypot(r.x - c.x, r.y - c.y) < params.merge_dist) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back({r.x, r.y, r.s});
  }
  return kept;
}

}  // namespace beetag
