#include "beetag/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "beetag/imgproc.hpp"
#include "beetag/nn/flatten.hpp"

namespace beetag {

double confidence(const std::array<float, 12>& bit_probs) {
  double c = 1.0;
  for (float p : bit_probs) {
    if (!(p >= 0.f && p <= 1.f))
      throw std::invalid_argument("confidence: bit probability outside [0,1]");
    c *= 2.0 * std::fabs(0.5 - double(p));
  }
  return c;
}

DecSample make_dec_sample(const GrayImage& patch, const TagLabel& label) {
  if (patch.h != 64 || patch.w != 64)
    throw std::invalid_argument("make_dec_sample: patch must be 64x64");
  DecSample s;
  s.patch.resize(64 * 64);
  for (size_t i = 0; i < s.patch.size(); ++i)
    s.patch[i] = uint8_t(std::lround(std::clamp(patch.v[i], 0.f, 1.f) * 255.f));
  s.bits = label.bits;
  s.rot = {float(std::cos(label.pose.z_rot)), float(std::sin(label.pose.z_rot)),
           float(std::cos(label.pose.y_rot)), float(std::sin(label.pose.y_rot)),
           float(std::cos(label.pose.x_rot)), float(std::sin(label.pose.x_rot))};
  s.dx = float(label.pose.center_x - 32.0);
  s.dy = float(label.pose.center_y - 32.0);
  return s;
}

std::vector<DecSample> make_dec_dataset(int n, Preset preset, uint64_t seed) {
  Rng master(seed);
  std::vector<DecSample> out;
  out.reserve(size_t(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    uint64_t s = (uint64_t(master.next_u32()) << 32) | master.next_u32();
    auto [img, label] = generate_patch(s, preset);
    out.push_back(make_dec_sample(img, label));
  }
  return out;
}

namespace {
// random contrast-equalization: mimics the frame preprocessing the decoder
// sees at inference time, with varied tiling and clip limits
GrayImage maybe_clahe(GrayImage img, Rng& rng, double prob) {
  if (rng.uniform() >= prob) return img;
  static const int tile_choices[3] = {1, 2, 4};
  int tiles = tile_choices[rng.uniform_int(3)];
  double clip = rng.uniform(1.5, 3.0);
  return clahe(img, tiles, tiles, clip);
}
}  // namespace

DecoderNet train_decoder(const std::vector<DecSample>& dataset, const DecTrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_decoder: empty dataset");
  for (const auto& s : dataset)
    if (s.patch.size() != 64 * 64)
      throw std::invalid_argument("train_decoder: patches must be 64x64");

  DecoderNet net(cfg.start_filters, cfg.blocks_per_stage, cfg.head_units, cfg.seed);
  auto params = net.params();
  nn::Sgd<float> opt(cfg.sgd.learning_rate, cfg.sgd.momentum);
  Rng shuffle_rng(cfg.seed ^ 0xdec0de5eedull);
  Rng aug_rng(cfg.seed ^ 0xc1a4eaull);

  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  int bs_max = std::max(1, cfg.sgd.batch_size);
  const double inv255 = 1.0 / 255.0;

  for (int epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double bce_sum = 0, rot_sum = 0, off_sum = 0;
    for (size_t start = 0; start < order.size(); start += size_t(bs_max)) {
      int bs = int(std::min(order.size() - start, size_t(bs_max)));
      nn::Ten4<float> x(bs, 1, 64, 64), tb(bs, 12, 1, 1), tr(bs, 8, 1, 1);
      for (int b = 0; b < bs; ++b) {
        const auto& s = dataset[order[start + b]];
        GrayImage img(64, 64);
        for (size_t i = 0; i < s.patch.size(); ++i) img.v[i] = float(s.patch[i] * inv255);
        img = maybe_clahe(std::move(img), aug_rng, cfg.clahe_prob);
        std::copy(img.v.begin(), img.v.end(), x.ptr(b, 0));
        for (int i = 0; i < 12; ++i) tb.at(b, i, 0, 0) = float(s.bits[i]);
        for (int i = 0; i < 6; ++i) tr.at(b, i, 0, 0) = s.rot[i];
        tr.at(b, 6, 0, 0) = s.dx / 8.f;
        tr.at(b, 7, 0, 0) = s.dy / 8.f;
      }

      auto out = net.forward(x, true);
      nn::Ten4<float> gb;
      double bce = nn::bce_loss(out.bit_probs, tb, gb);

      nn::Ten4<float> gr(bs, 8, 1, 1);
      double se_rot = 0, se_off = 0;
      double inv_rot = 1.0 / (double(bs) * 6), inv_off = 1.0 / (double(bs) * 2);
      for (int b = 0; b < bs; ++b)
        for (int j = 0; j < 8; ++j) {
          double d = double(out.reg.at(b, j, 0, 0)) - double(tr.at(b, j, 0, 0));
          if (j < 6) {
            se_rot += d * d;
            gr.at(b, j, 0, 0) = float(cfg.lambda * 2.0 * d * inv_rot);
          } else {
            se_off += d * d;
            gr.at(b, j, 0, 0) = float(cfg.lambda * 2.0 * d * inv_off);
          }
        }

      nn::Sgd<float>::zero_grads(params);
      net.backward(gb, gr);
      opt.step(params);
      bce_sum += bce * bs;
      rot_sum += se_rot * inv_rot * bs;
      off_sum += se_off * inv_off * bs;
    }
    double n = double(dataset.size());
    if (cfg.epoch_log) cfg.epoch_log(epoch, bce_sum / n, rot_sum / n, off_sum / n);
  }
  return net;
}

nn::Checkpoint decoder_to_checkpoint(DecoderNet& net, uint64_t epoch, uint64_t seed) {
  nn::Checkpoint ck;
  ck.descriptor = net.descriptor();
  ck.epoch = epoch;
  ck.seed = seed;
  auto ps = net.params();
  ck.learn = nn::flatten_params(ps);
  auto bs = net.buffers();
  ck.buffers = nn::flatten_buffers(bs);
  return ck;
}

DecoderNet decoder_from_checkpoint(const nn::Checkpoint& ck) {
  auto [model, spec] = nn::spec_from_string(ck.descriptor);
  (void)spec;
  int v = 0, filters = 0, blocks = 0, head = 0;
  if (std::sscanf(model.c_str(), "decoder v=%d filters=%d blocks=%d head=%d", &v, &filters,
                  &blocks, &head) != 4 ||
      v != 1)
    throw std::invalid_argument("checkpoint does not describe a decoder model");
  DecoderNet net(filters, blocks, head, ck.seed);
  auto ps = net.params();
  nn::unflatten_params(ck.learn, ps);
  auto bs = net.buffers();
  nn::unflatten_buffers(ck.buffers, bs);
  return net;
}

std::vector<DecodedTag> decode_patches(const std::vector<GrayImage>& patches, DecoderNet& net) {
  for (const auto& p : patches)
    if (p.h != 64 || p.w != 64) throw std::invalid_argument("decode_patch: patch must be 64x64");
  std::vector<DecodedTag> out;
  out.reserve(patches.size());
  const int chunk = 128;
  for (size_t start = 0; start < patches.size(); start += chunk) {
    int bs = int(std::min(patches.size() - start, size_t(chunk)));
    nn::Ten4<float> x(bs, 1, 64, 64);
    for (int b = 0; b < bs; ++b)
      std::copy(patches[start + b].v.begin(), patches[start + b].v.end(), x.ptr(b, 0));
    auto y = net.forward(x, false);
    for (int b = 0; b < bs; ++b) {
      DecodedTag d;
      for (int i = 0; i < 12; ++i)
        d.bit_probs[i] = std::clamp(y.bit_probs.at(b, i, 0, 0), 0.f, 1.f);
      d.z_rot = wrap_angle(std::atan2(y.reg.at(b, 1, 0, 0), y.reg.at(b, 0, 0, 0)));
      d.y_rot = wrap_angle(std::atan2(y.reg.at(b, 3, 0, 0), y.reg.at(b, 2, 0, 0)));
      d.x_rot = wrap_angle(std::atan2(y.reg.at(b, 5, 0, 0), y.reg.at(b, 4, 0, 0)));
      d.offset_dx = std::clamp(double(y.reg.at(b, 6, 0, 0)) * 8.0, -8.0, 8.0);
      d.offset_dy = std::clamp(double(y.reg.at(b, 7, 0, 0)) * 8.0, -8.0, 8.0);
      d.confidence = confidence(d.bit_probs);
      out.push_back(d);
    }
  }
  return out;
}

DecodedTag decode_patch(const GrayImage& patch, DecoderNet& net) {
  return decode_patches({patch}, net)[0];
}

std::vector<int> filter_indices_by_confidence(const std::vector<double>& conf,
                                              double keep_fraction) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("filter_by_confidence: keep_fraction outside [0,1]");
  size_t k = size_t(std::llround(keep_fraction * double(conf.size())));
  std::vector<int> idx(conf.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (conf[a] != conf[b]) return conf[a] > conf[b];
    return a < b;
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<DecodedTag> filter_by_confidence(const std::vector<DecodedTag>& dets,
                                             double keep_fraction) {
  std::vector<double> conf;
  conf.reserve(dets.size());
  for (const auto& d : dets) conf.push_back(d.confidence);
  std::vector<DecodedTag> out;
  for (int i : filter_indices_by_confidence(conf, keep_fraction)) out.push_back(dets[i]);
  return out;
}

std::vector<DecodedTag> filter_by_min_confidence(const std::vector<DecodedTag>& dets,
                                                 double min_confidence) {
  std::vector<DecodedTag> out;
  for (const auto& d : dets)
    if (d.confidence >= min_confidence) out.push_back(d);
  return out;
}

}  // namespace beetag
