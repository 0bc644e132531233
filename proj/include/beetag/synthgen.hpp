#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "beetag/image.hpp"
#include "beetag/rng.hpp"
#include "beetag/tagcodec.hpp"

namespace beetag {

struct AugmentParams {
  double blur_sigma = 0.0;        // px
  double noise_sigma = 0.0;       // additive gaussian, gray levels of [0,1]
  double brightness_shift = 0.0;
  double contrast_scale = 1.0;
  double elastic_alpha = 0.0;     // max displacement, px
  double elastic_sigma = 4.0;     // displacement field smoothness, px
  uint64_t background_texture_seed = 0;
};

// difficulty presets; per-sample parameters are drawn uniformly from the
// preset's ranges, so a preset describes a mixture of conditions
enum class Preset { clean, moderate, hard };
Preset preset_from_name(const std::string& name);
const char* preset_name(Preset p);
AugmentParams sample_augment_params(Preset p, Rng& rng);

struct TagLabel {
  TagId id;
  BitVector bits;  // always encode_id(id)
  TagPose pose;
};

struct FrameScene {
  GrayImage image;
  std::vector<TagLabel> labels;
};

// applies, in order: elastic deformation, blur, contrast/brightness,
// additive gaussian noise; result clamped to [0,1]
GrayImage augment(const GrayImage& img, const AugmentParams& params, uint64_t rng_seed);

// One 64 px marker patch on a textured background. The label's center is in
// patch coordinates, jittered up to +-8 px around the patch center; id and
// pose are sampled uniformly (z in (-pi, pi], y/x in [-pi/6, pi/6]).
std::pair<GrayImage, TagLabel> generate_patch(uint64_t rng_seed, const AugmentParams& params);

// convenience: draw params from a preset, then generate_patch
std::pair<GrayImage, TagLabel> generate_patch(uint64_t rng_seed, Preset preset);

// Full frame: value-noise background, one bee-body ellipse under every tag,
// extra tagless distractor bodies, then frame-level augmentation (elastic
// disabled at frame level so stored centers stay exact). Tag centers keep a
// minimum separation of max(128 px, 1.2 * tag diameter); placement is
// rejection-sampled with a budget of 10 * n_tags retries.
FrameScene generate_frame(uint64_t rng_seed, int n_tags, int frame_h, int frame_w,
                          const AugmentParams& params);
FrameScene generate_frame(uint64_t rng_seed, int n_tags, int frame_h, int frame_w,
                          Preset preset);

// ground-truth sidecar: one line per tag, "id cx cy zrot yrot xrot", 6 decimals
void write_sidecar(const std::vector<TagLabel>& labels, const std::string& path);
std::vector<TagLabel> read_sidecar(const std::string& path);

}  // namespace beetag
