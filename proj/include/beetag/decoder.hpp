#pragma once
#include <array>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "beetag/image.hpp"
#include "beetag/nn/checkpoint.hpp"
#include "beetag/nn/layers.hpp"
#include "beetag/nn/spec.hpp"
#include "beetag/synthgen.hpp"
#include "beetag/tagcodec.hpp"

namespace beetag {

// ResNet-style decoder for 64 px patches: 3x3 stride-1 stem conv + BN + ELU,
// 3x3 stride-2 max pool, four residual stages at widths f, 2f, 4f, 8f (the
// later three open with a stride-2 block), global average pooling, then two
// parallel 256-unit ELU heads: 12 sigmoid bit probabilities and 8 linear
// outputs (cos/sin of three rotations plus a normalized center offset)
template <typename T>
class DecoderNetT {
public:
  DecoderNetT(int start_filters, int blocks_per_stage, int head_units, uint64_t seed)
      : filters_(start_filters), blocks_per_stage_(blocks_per_stage), head_units_(head_units) {
    if (start_filters < 1 || blocks_per_stage < 1 || head_units < 1)
      throw std::invalid_argument("decoder: invalid architecture parameters");
    Rng rng(seed);
    stem_conv_ = std::make_unique<nn::Conv2d<T>>(1, start_filters, 3, 1, 1, rng);
    stem_bn_ = std::make_unique<nn::BatchNorm2d<T>>(start_filters);
    pool_ = std::make_unique<nn::MaxPool2d<T>>(3, 2, 1);
    int in_c = start_filters;
    for (int stage = 0; stage < 4; ++stage) {
      int out_c = start_filters << stage;
      for (int b = 0; b < blocks_per_stage; ++b) {
        int stride = (stage > 0 && b == 0) ? 2 : 1;
        blocks_.push_back(std::make_unique<nn::ResidualBlock<T>>(in_c, out_c, stride, rng));
        in_c = out_c;
      }
    }
    trunk_out_ = in_c;
    fc1_bits_ = std::make_unique<nn::Linear<T>>(trunk_out_, head_units, rng);
    fc2_bits_ = std::make_unique<nn::Linear<T>>(head_units, 12, rng);
    fc1_reg_ = std::make_unique<nn::Linear<T>>(trunk_out_, head_units, rng);
    fc2_reg_ = std::make_unique<nn::Linear<T>>(head_units, 8, rng);
  }

  struct Out {
    nn::Ten4<T> bit_probs;  // (n, 12, 1, 1)
    nn::Ten4<T> reg;        // (n, 8, 1, 1): cos/sin z, cos/sin y, cos/sin x, dx/8, dy/8
  };

  Out forward(const nn::Ten4<T>& x, bool train) {
    auto h = stem_elu_.forward(stem_bn_->forward(stem_conv_->forward(x, train), train), train);
    h = pool_->forward(h, train);
    for (auto& b : blocks_) h = b->forward(h, train);
    h = gap_.forward(h, train);
    auto hb = elu_bits_.forward(fc1_bits_->forward(h, train), train);
    auto hr = elu_reg_.forward(fc1_reg_->forward(h, train), train);
    Out out;
    out.bit_probs = sig_bits_.forward(fc2_bits_->forward(hb, train), train);
    out.reg = fc2_reg_->forward(hr, train);
    return out;
  }

  nn::Ten4<T> backward(const nn::Ten4<T>& g_bits, const nn::Ten4<T>& g_reg) {
    auto gb = fc1_bits_->backward(elu_bits_.backward(fc2_bits_->backward(sig_bits_.backward(g_bits))));
    auto gr = fc1_reg_->backward(elu_reg_.backward(fc2_reg_->backward(g_reg)));
    for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += gr.v[i];
    auto g = gap_.backward(gb);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    g = pool_->backward(g);
    return stem_conv_->backward(stem_bn_->backward(stem_elu_.backward(g)));
  }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    stem_conv_->params(out);
    stem_bn_->params(out);
    for (auto& b : blocks_) b->params(out);
    fc1_bits_->params(out);
    fc2_bits_->params(out);
    fc1_reg_->params(out);
    fc2_reg_->params(out);
    return out;
  }

  std::vector<std::vector<T>*> buffers() {
    std::vector<std::vector<T>*> out;
    stem_bn_->buffers(out);
    for (auto& b : blocks_) b->buffers(out);
    return out;
  }

  int start_filters() const { return filters_; }
  int blocks_per_stage() const { return blocks_per_stage_; }
  int head_units() const { return head_units_; }

  std::string descriptor() const {
    char model[96];
    std::snprintf(model, sizeof model, "decoder v=1 filters=%d blocks=%d head=%d", filters_,
                  blocks_per_stage_, head_units_);
    nn::NetworkSpec spec;
    spec.push_back({"conv", 3, 1, "same", filters_, "elu"});
    spec.push_back({"pool", 3, 2, "same", filters_, "-"});
    for (int stage = 0; stage < 4; ++stage)
      for (int b = 0; b < blocks_per_stage_; ++b)
        spec.push_back({"resblock", 3, (stage > 0 && b == 0) ? 2 : 1, "same",
                        filters_ << stage, "elu"});
    spec.push_back({"gap", 0, 1, "none", trunk_out_, "-"});
    spec.push_back({"linear", 0, 1, "none", head_units_, "elu"});
    spec.push_back({"linear", 0, 1, "none", 12, "sigmoid"});
    spec.push_back({"linear", 0, 1, "none", head_units_, "elu"});
    spec.push_back({"linear", 0, 1, "none", 8, "linear"});
    return nn::spec_to_string(model, spec);
  }

private:
  int filters_, blocks_per_stage_, head_units_, trunk_out_ = 0;
  std::unique_ptr<nn::Conv2d<T>> stem_conv_;
  std::unique_ptr<nn::BatchNorm2d<T>> stem_bn_;
  std::unique_ptr<nn::MaxPool2d<T>> pool_;
  std::vector<std::unique_ptr<nn::ResidualBlock<T>>> blocks_;
  nn::Elu<T> stem_elu_, elu_bits_, elu_reg_;
  nn::GlobalAvgPool<T> gap_;
  nn::Sigmoid<T> sig_bits_;
  std::unique_ptr<nn::Linear<T>> fc1_bits_, fc2_bits_, fc1_reg_, fc2_reg_;
};

using DecoderNet = DecoderNetT<float>;

struct DecodedTag {
  std::array<float, 12> bit_probs{};
  double z_rot = 0, y_rot = 0, x_rot = 0;  // radians in (-pi, pi]
  double offset_dx = 0, offset_dy = 0;     // px relative to the patch center
  double confidence = 0;
};

// per-bit certainty product: prod over bits of 2|0.5 - p|
double confidence(const std::array<float, 12>& bit_probs);

// one training patch; pixels quantized to u8 (p = v / 255) to keep large
// datasets in memory
struct DecSample {
  std::vector<uint8_t> patch;        // 64*64 row-major
  BitVector bits{};
  std::array<float, 6> rot{};        // cos/sin z, cos/sin y, cos/sin x
  float dx = 0, dy = 0;              // px offsets relative to the patch center
};

DecSample make_dec_sample(const GrayImage& patch, const TagLabel& label);
std::vector<DecSample> make_dec_dataset(int n, Preset preset, uint64_t seed);

struct DecTrainConfig {
  nn::SgdConfig sgd{0.01, 0.9, 32, 2};
  int start_filters = 16;
  int blocks_per_stage = 2;
  int head_units = 256;
  double lambda = 1.0;      // weight of the two MSE terms against the bit BCE
  double clahe_prob = 0.6;  // chance of contrast-equalization augmentation per draw
  uint64_t seed = 1;
  std::function<void(int, double, double, double)> epoch_log;  // epoch, bce, mse_rot, mse_off
};

DecoderNet train_decoder(const std::vector<DecSample>& dataset, const DecTrainConfig& cfg);

nn::Checkpoint decoder_to_checkpoint(DecoderNet& net, uint64_t epoch, uint64_t seed);
DecoderNet decoder_from_checkpoint(const nn::Checkpoint& ck);

// inference-mode forward; rotations reconstructed with atan2 from the
// cos/sin pairs, offsets de-normalized to px and clamped to the +-8 px
// training range
DecodedTag decode_patch(const GrayImage& patch, DecoderNet& net);
std::vector<DecodedTag> decode_patches(const std::vector<GrayImage>& patches, DecoderNet& net);

// top-round(keep_fraction * n) by confidence; kept items stay in input order
std::vector<int> filter_indices_by_confidence(const std::vector<double>& conf,
                                              double keep_fraction);
std::vector<DecodedTag> filter_by_confidence(const std::vector<DecodedTag>& dets,
                                             double keep_fraction);
std::vector<DecodedTag> filter_by_min_confidence(const std::vector<DecodedTag>& dets,
                                                 double min_confidence);

}  // namespace beetag
