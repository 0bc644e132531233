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

namespace beetag {

// Fully convolutional localizer: three 5x5 stride-2 valid convolutions, each
// followed by ReLU and dropout, then a 1x1 convolution with a sigmoid. On a
// 32 px input the spatial extent collapses 32 -> 14 -> 5 -> 1.
template <typename T>
class LocalizerNetT {
public:
  LocalizerNetT(std::array<int, 3> widths, double dropout_p, uint64_t seed)
      : widths_(widths), dropout_p_(dropout_p) {
    Rng rng(seed);
    conv1_ = std::make_unique<nn::Conv2d<T>>(1, widths[0], 5, 2, 0, rng);
    conv2_ = std::make_unique<nn::Conv2d<T>>(widths[0], widths[1], 5, 2, 0, rng);
    conv3_ = std::make_unique<nn::Conv2d<T>>(widths[1], widths[2], 5, 2, 0, rng);
    conv4_ = std::make_unique<nn::Conv2d<T>>(widths[2], 1, 1, 1, 0, rng);
    drop1_ = std::make_unique<nn::Dropout<T>>(dropout_p, rng.next_u32());
    drop2_ = std::make_unique<nn::Dropout<T>>(dropout_p, rng.next_u32());
    drop3_ = std::make_unique<nn::Dropout<T>>(dropout_p, rng.next_u32());
  }

  nn::Ten4<T> forward(const nn::Ten4<T>& x, bool train) {
    auto h = drop1_->forward(relu1_.forward(conv1_->forward(x, train), train), train);
    h = drop2_->forward(relu2_.forward(conv2_->forward(h, train), train), train);
    h = drop3_->forward(relu3_.forward(conv3_->forward(h, train), train), train);
    return sigmoid_.forward(conv4_->forward(h, train), train);
  }

  nn::Ten4<T> backward(const nn::Ten4<T>& gy) {
    auto g = conv4_->backward(sigmoid_.backward(gy));
    g = conv3_->backward(relu3_.backward(drop3_->backward(g)));
    g = conv2_->backward(relu2_.backward(drop2_->backward(g)));
    return conv1_->backward(relu1_.backward(drop1_->backward(g)));
  }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    conv1_->params(out);
    conv2_->params(out);
    conv3_->params(out);
    conv4_->params(out);
    return out;
  }

  std::array<int, 3> widths() const { return widths_; }
  double dropout_p() const { return dropout_p_; }

  std::string descriptor() const {
    char model[128];
    std::snprintf(model, sizeof model, "localizer v=1 widths=%d,%d,%d dropout=%.4f",
                  widths_[0], widths_[1], widths_[2], dropout_p_);
    nn::NetworkSpec spec;
    int in_c = 1;
    for (int w : widths_) {
      spec.push_back({"conv", 5, 2, "none", w, "relu"});
      spec.push_back({"dropout", 0, 1, "none", w, "-"});
      in_c = w;
    }
    spec.push_back({"conv", 1, 1, "none", 1, "sigmoid"});
    return nn::spec_to_string(model, spec);
  }

private:
  std::array<int, 3> widths_;
  double dropout_p_;
  std::unique_ptr<nn::Conv2d<T>> conv1_, conv2_, conv3_, conv4_;
  std::unique_ptr<nn::Dropout<T>> drop1_, drop2_, drop3_;
  nn::ReLU<T> relu1_, relu2_, relu3_;
  nn::Sigmoid<T> sigmoid_;
};

using LocalizerNet = LocalizerNetT<float>;

// stride-8 grid over the x4-downsampled frame; cell (iy, ix) summarizes the
// 32 px downsampled window with top-left (8*ix, 8*iy) and is anchored at the
// window center, i.e. full-resolution (32*ix + 64, 32*iy + 64)
struct SaliencyMap {
  GrayImage grid;
  int stride = 8;
  int window = 32;
  int downsample = 4;
  double cell_x(double ix) const { return downsample * (stride * ix + window * 0.5); }
  double cell_y(double iy) const { return downsample * (stride * iy + window * 0.5); }
};

struct LocTrainSample {
  GrayImage patch;  // 32x32, preprocessed and downsampled
  float target = 0.f;
};

struct Candidate {
  double x = 0.0;  // full-resolution px
  double y = 0.0;
  double saliency = 0.0;
};

struct CandidateParams {
  double threshold = 0.6;
  int nms_radius = 2;          // grid cells
  int morph_open_radius = 0;   // grid cells; 0 disables the opening
  double merge_dist = 22.0;    // full-res px, 0.5 * tag diameter
  bool refine_subcell = true;  // log-parabola peak interpolation
};

// peak-normalized bivariate normal: exp(-d^2 / (2 sigma^2)), d = distance to
// the nearest label center in full-res px; 0 when there are no labels
double make_target(double center_x, double center_y, const std::vector<TagLabel>& labels,
                   double sigma);

struct LocSampleConfig {
  double sigma = 32.0;          // full-res px
  double positive_ratio = 0.5;  // fraction of samples with target > 0.5
  int clahe_tiles = 8;
  double clahe_clip = 2.0;
};

// mixture of near-tag, mid-distance and background patches drawn from the
// scenes; every patch is cut from the CLAHE-preprocessed frame and
// downsampled to 32 px. Targets are recomputed for the actual (clamped)
// patch center.
std::vector<LocTrainSample> sample_training_set(const std::vector<FrameScene>& scenes, int n,
                                                uint64_t seed, const LocSampleConfig& cfg);

struct LocTrainConfig {
  nn::SgdConfig sgd{0.02, 0.9, 64, 15};
  std::array<int, 3> widths{32, 64, 128};
  double dropout = 0.25;
  uint64_t seed = 1;
  std::function<void(int, double)> epoch_log;  // (epoch, mean BCE)
};

LocalizerNet train_localizer(const std::vector<LocTrainSample>& samples,
                             const LocTrainConfig& cfg);

nn::Checkpoint localizer_to_checkpoint(LocalizerNet& net, uint64_t epoch, uint64_t seed);
LocalizerNet localizer_from_checkpoint(const nn::Checkpoint& ck);

// CLAHE -> x4 downsample -> one dense pass; frame must be at least 128 px
SaliencyMap infer_saliency(const GrayImage& frame, LocalizerNet& net, int clahe_tiles = 8,
                           double clahe_clip = 2.0);
// same, for a frame that is already CLAHE-preprocessed at full resolution
SaliencyMap infer_saliency_preprocessed(const GrayImage& preprocessed, LocalizerNet& net);

// thresholded local maxima of the saliency grid (optional grayscale opening
// first), mapped to full resolution with sub-cell refinement, then merged
// within merge_dist keeping the higher saliency
std::vector<Candidate> extract_candidates(const SaliencyMap& sal, const CandidateParams& params);

}  // namespace beetag
