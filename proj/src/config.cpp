#include "beetag/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "beetag/synthgen.hpp"

namespace beetag {

namespace {
int to_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid integer for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::invalid_argument("config: invalid integer for " + key + ": " + v);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid number for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::invalid_argument("config: invalid number for " + key + ": " + v);
  return out;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  unsigned long long out;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid integer for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::invalid_argument("config: invalid integer for " + key + ": " + v);
  return out;
}

struct Entry {
  const char* key;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

const std::vector<Entry>& registry() {
  auto I = [](int PipelineConfig::*f) {
    return [f](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.*f = to_int(k, v);
    };
  };
  auto D = [](double PipelineConfig::*f) {
    return [f](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.*f = to_double(k, v);
    };
  };
  auto S = [](std::string PipelineConfig::*f) {
    return [f](PipelineConfig& c, const std::string&, const std::string& v) { c.*f = v; };
  };
  static const std::vector<Entry> entries = {
      {"clahe_tiles", I(&PipelineConfig::clahe_tiles)},
      {"clahe_clip", D(&PipelineConfig::clahe_clip)},
      {"sigma", D(&PipelineConfig::sigma)},
      {"threshold", D(&PipelineConfig::threshold)},
      {"nms_radius", I(&PipelineConfig::nms_radius)},
      {"morph_open_radius", I(&PipelineConfig::morph_open_radius)},
      {"merge_dist", D(&PipelineConfig::merge_dist)},
      {"positive_ratio", D(&PipelineConfig::positive_ratio)},
      {"loc_samples", I(&PipelineConfig::loc_samples)},
      {"loc_epochs", I(&PipelineConfig::loc_epochs)},
      {"loc_lr", D(&PipelineConfig::loc_lr)},
      {"loc_momentum", D(&PipelineConfig::loc_momentum)},
      {"loc_batch", I(&PipelineConfig::loc_batch)},
      {"loc_dropout", D(&PipelineConfig::loc_dropout)},
      {"dec_samples", I(&PipelineConfig::dec_samples)},
      {"dec_epochs", I(&PipelineConfig::dec_epochs)},
      {"dec_lr", D(&PipelineConfig::dec_lr)},
      {"dec_momentum", D(&PipelineConfig::dec_momentum)},
      {"dec_batch", I(&PipelineConfig::dec_batch)},
      {"start_filters", I(&PipelineConfig::start_filters)},
      {"blocks_per_stage", I(&PipelineConfig::blocks_per_stage)},
      {"head_units", I(&PipelineConfig::head_units)},
      {"lambda", D(&PipelineConfig::lambda)},
      {"dec_clahe_prob", D(&PipelineConfig::dec_clahe_prob)},
      {"gate_radius", D(&PipelineConfig::gate_radius)},
      {"max_gap", I(&PipelineConfig::max_gap)},
      {"d_match", D(&PipelineConfig::d_match)},
      {"keep_fraction", D(&PipelineConfig::keep_fraction)},
      {"shard_size", I(&PipelineConfig::shard_size)},
      {"camera_id", I(&PipelineConfig::camera_id)},
      {"date_year", I(&PipelineConfig::date_year)},
      {"date_month", I(&PipelineConfig::date_month)},
      {"date_day", I(&PipelineConfig::date_day)},
      {"preset", S(&PipelineConfig::preset)},
      {"n_tags", I(&PipelineConfig::n_tags)},
      {"frame_w", I(&PipelineConfig::frame_w)},
      {"frame_h", I(&PipelineConfig::frame_h)},
      {"n_frames", I(&PipelineConfig::n_frames)},
      {"frames_dir", S(&PipelineConfig::frames_dir)},
      {"out_dir", S(&PipelineConfig::out_dir)},
      {"loc_ckpt", S(&PipelineConfig::loc_ckpt)},
      {"dec_ckpt", S(&PipelineConfig::dec_ckpt)},
      {"seed",
       [](PipelineConfig& c, const std::string& k, const std::string& v) {
         c.seed = to_u64(k, v);
       }},
      {"workers", I(&PipelineConfig::workers)},
  };
  return entries;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("config: ") + what);
}
}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.push_back(e.key);
  return keys;
}

void apply_config_kv(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : registry())
    if (key == e.key) {
      e.set(cfg, key, value);
      return;
    }
  throw std::invalid_argument("config: unknown key: " + key);
}

void validate_config(const PipelineConfig& cfg) {
  require(cfg.clahe_tiles >= 1, "clahe_tiles must be >= 1");
  require(cfg.clahe_clip >= 1.0, "clahe_clip must be >= 1");
  require(cfg.sigma > 0, "sigma must be positive");
  require(cfg.threshold >= 0 && cfg.threshold <= 1, "threshold must lie in [0,1]");
  require(cfg.nms_radius >= 1, "nms_radius must be >= 1");
  require(cfg.morph_open_radius >= 0, "morph_open_radius must be >= 0");
  require(cfg.merge_dist >= 0, "merge_dist must be >= 0");
  require(cfg.positive_ratio >= 0 && cfg.positive_ratio <= 1,
          "positive_ratio must lie in [0,1]");
  require(cfg.loc_samples >= 1, "loc_samples must be >= 1");
  require(cfg.loc_epochs >= 1, "loc_epochs must be >= 1");
  require(cfg.loc_lr > 0, "loc_lr must be positive");
  require(cfg.loc_momentum >= 0 && cfg.loc_momentum < 1, "loc_momentum must lie in [0,1)");
  require(cfg.loc_batch >= 1, "loc_batch must be >= 1");
  require(cfg.loc_dropout >= 0 && cfg.loc_dropout < 1, "loc_dropout must lie in [0,1)");
  require(cfg.dec_samples >= 1, "dec_samples must be >= 1");
  require(cfg.dec_epochs >= 1, "dec_epochs must be >= 1");
  require(cfg.dec_lr > 0, "dec_lr must be positive");
  require(cfg.dec_momentum >= 0 && cfg.dec_momentum < 1, "dec_momentum must lie in [0,1)");
  require(cfg.dec_batch >= 1, "dec_batch must be >= 1");
  require(cfg.start_filters >= 1, "start_filters must be >= 1");
  require(cfg.blocks_per_stage >= 1, "blocks_per_stage must be >= 1");
  require(cfg.head_units >= 1, "head_units must be >= 1");
  require(cfg.lambda >= 0, "lambda must be >= 0");
  require(cfg.dec_clahe_prob >= 0 && cfg.dec_clahe_prob <= 1,
          "dec_clahe_prob must lie in [0,1]");
  require(cfg.gate_radius > 0, "gate_radius must be positive");
  require(cfg.max_gap >= 0, "max_gap must be >= 0");
  require(cfg.d_match > 0, "d_match must be positive");
  require(cfg.keep_fraction >= 0 && cfg.keep_fraction <= 1, "keep_fraction must lie in [0,1]");
  require(cfg.shard_size >= 1, "shard_size must be >= 1");
  require(cfg.camera_id >= 0 && cfg.camera_id <= 255, "camera_id must lie in [0,255]");
  require(cfg.date_year >= 0 && cfg.date_year <= 9999, "date_year must lie in [0,9999]");
  require(cfg.date_month >= 1 && cfg.date_month <= 12, "date_month must lie in [1,12]");
  require(cfg.date_day >= 1 && cfg.date_day <= 31, "date_day must lie in [1,31]");
  preset_from_name(cfg.preset);  // throws on unknown preset
  require(cfg.n_tags >= 0, "n_tags must be >= 0");
  require(cfg.frame_w >= 128 && cfg.frame_h >= 128, "frame size must be at least 128 px");
  require(cfg.n_frames >= 0, "n_frames must be >= 0");
  require(cfg.workers >= 1, "workers must be >= 1");
}

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key=value: " + line);
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace beetag
