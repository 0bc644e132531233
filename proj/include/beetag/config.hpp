#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace beetag {

// Every tunable of the pipeline, parsed from a plain-text key=value file
// ('#' starts a comment). Unknown keys are rejected; values are validated
// against the preconditions of the modules that consume them.
struct PipelineConfig {
  // preprocessing
  int clahe_tiles = 8;
  double clahe_clip = 2.0;

  // localizer training and candidate extraction
  double sigma = 32.0;       // target spread, full-res px
  double threshold = 0.6;    // saliency cutoff
  int nms_radius = 2;        // grid cells
  int morph_open_radius = 0; // grid cells, 0 disables
  double merge_dist = 22.0;  // px
  double positive_ratio = 0.5;
  int loc_samples = 20000;
  int loc_epochs = 15;
  double loc_lr = 0.02;
  double loc_momentum = 0.9;
  int loc_batch = 64;
  double loc_dropout = 0.25;

  // decoder training
  int dec_samples = 50000;
  int dec_epochs = 2;
  double dec_lr = 0.01;
  double dec_momentum = 0.9;
  int dec_batch = 32;
  int start_filters = 16;
  int blocks_per_stage = 2;
  int head_units = 256;
  double lambda = 1.0;
  double dec_clahe_prob = 0.6;

  // tracking
  double gate_radius = 88.0;  // px per frame step
  int max_gap = 1;            // tolerated missing frames

  // evaluation
  double d_match = 11.0;       // px, half the tag outer radius
  double keep_fraction = 1.0;  // confidence filtering

  // detection storage
  int shard_size = 64;  // frames per shard
  int camera_id = 0;
  int date_year = 2000, date_month = 1, date_day = 1;

  // synthetic generation
  std::string preset = "moderate";
  int n_tags = 20;
  int frame_w = 512, frame_h = 512;
  int n_frames = 10;

  // paths and run control
  std::string frames_dir, out_dir, loc_ckpt, dec_ckpt;
  uint64_t seed = 1;
  int workers = 1;
};

// all recognized keys, in declaration order
std::vector<std::string> config_keys();

// parse one assignment; throws std::invalid_argument on unknown key or
// unparsable value
void apply_config_kv(PipelineConfig& cfg, const std::string& key, const std::string& value);

// throws std::invalid_argument naming the offending key
void validate_config(const PipelineConfig& cfg);

// parse + validate a key=value file
PipelineConfig parse_config_file(const std::string& path);

}  // namespace beetag
