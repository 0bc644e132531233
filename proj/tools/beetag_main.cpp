#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "beetag/config.hpp"
#include "beetag/decoder.hpp"
#include "beetag/detstore.hpp"
#include "beetag/evalharness.hpp"
#include "beetag/imgproc.hpp"
#include "beetag/localizer.hpp"
#include "beetag/pipeline.hpp"
#include "beetag/synthgen.hpp"
#include "beetag/tracker.hpp"

namespace fs = std::filesystem;
using namespace beetag;

namespace {

bool g_verbose = false;

void vlog(const std::string& msg) {
  if (g_verbose) std::fprintf(stderr, "%s\n", msg.c_str());
}

// frame id from the last digit run in the stem, e.g. frame_000123.pgm -> 123
bool parse_frame_id(const std::string& stem, uint64_t& id) {
  int end = int(stem.size());
  while (end > 0 && !std::isdigit(uint8_t(stem[end - 1]))) --end;
  int begin = end;
  while (begin > 0 && std::isdigit(uint8_t(stem[begin - 1]))) --begin;
  if (begin == end) return false;
  id = std::stoull(stem.substr(begin, end - begin));
  return true;
}

std::vector<std::string> list_files(const std::string& dir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<FrameInput> scan_frames(const std::string& dir) {
  std::vector<FrameInput> frames;
  uint64_t fallback = 0;
  for (const auto& p : list_files(dir, ".pgm")) {
    FrameInput fi;
    fi.path = p;
    if (!parse_frame_id(fs::path(p).stem().string(), fi.frame_id)) fi.frame_id = fallback;
    fi.timestamp_us = fi.frame_id * 333333;  // nominal 3 Hz
    ++fallback;
    frames.push_back(fi);
  }
  return frames;
}

std::vector<FrameScene> load_scenes(const std::string& dir) {
  std::vector<FrameScene> scenes;
  for (const auto& p : list_files(dir, ".pgm")) {
    fs::path sidecar = fs::path(p);
    sidecar.replace_extension(".txt");
    if (!fs::exists(sidecar)) continue;
    FrameScene s;
    s.image = read_pgm(p);
    s.labels = read_sidecar(sidecar.string());
    scenes.push_back(std::move(s));
  }
  if (scenes.empty())
    throw std::invalid_argument("no .pgm frames with .txt sidecars in " + dir);
  return scenes;
}

int cmd_gen(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  Preset preset = preset_from_name(cfg.preset);
  for (int f = 0; f < cfg.n_frames; ++f) {
    FrameScene scene =
        generate_frame(cfg.seed + uint64_t(f), cfg.n_tags, cfg.frame_h, cfg.frame_w, preset);
    char name[64];
    std::snprintf(name, sizeof name, "frame_%06d", f);
    fs::path base = fs::path(cfg.out_dir) / name;
    write_pgm(scene.image, base.string() + ".pgm");
    write_sidecar(scene.labels, base.string() + ".txt");
    vlog("wrote " + base.string() + ".pgm (" + std::to_string(scene.labels.size()) + " tags)");
  }
  std::printf("generated %d frames in %s\n", cfg.n_frames, cfg.out_dir.c_str());
  return 0;
}

int cmd_train_loc(const PipelineConfig& cfg) {
  auto scenes = load_scenes(cfg.frames_dir);
  LocSampleConfig sc;
  sc.sigma = cfg.sigma;
  sc.positive_ratio = cfg.positive_ratio;
  sc.clahe_tiles = cfg.clahe_tiles;
  sc.clahe_clip = cfg.clahe_clip;
  vlog("sampling " + std::to_string(cfg.loc_samples) + " patches from " +
       std::to_string(scenes.size()) + " frames");
  auto samples = sample_training_set(scenes, cfg.loc_samples, cfg.seed, sc);

  LocTrainConfig tc;
  tc.sgd = {cfg.loc_lr, cfg.loc_momentum, cfg.loc_batch, cfg.loc_epochs};
  tc.dropout = cfg.loc_dropout;
  tc.seed = cfg.seed;
  tc.epoch_log = [](int epoch, double loss) {
    std::printf("epoch %d bce %.6f\n", epoch, loss);
    std::fflush(stdout);
  };
  LocalizerNet net = train_localizer(samples, tc);
  save_checkpoint(localizer_to_checkpoint(net, uint64_t(cfg.loc_epochs), cfg.seed),
                  cfg.loc_ckpt);
  std::printf("saved %s\n", cfg.loc_ckpt.c_str());
  return 0;
}

int cmd_train_dec(const PipelineConfig& cfg) {
  vlog("generating " + std::to_string(cfg.dec_samples) + " training patches");
  auto dataset = make_dec_dataset(cfg.dec_samples, preset_from_name(cfg.preset), cfg.seed);

  DecTrainConfig tc;
  tc.sgd = {cfg.dec_lr, cfg.dec_momentum, cfg.dec_batch, cfg.dec_epochs};
  tc.start_filters = cfg.start_filters;
  tc.blocks_per_stage = cfg.blocks_per_stage;
  tc.head_units = cfg.head_units;
  tc.lambda = cfg.lambda;
  tc.clahe_prob = cfg.dec_clahe_prob;
  tc.seed = cfg.seed;
  tc.epoch_log = [](int epoch, double bce, double mrot, double moff) {
    std::printf("epoch %d bce %.6f mse_rot %.6f mse_off %.6f\n", epoch, bce, mrot, moff);
    std::fflush(stdout);
  };
  DecoderNet net = train_decoder(dataset, tc);
  save_checkpoint(decoder_to_checkpoint(net, uint64_t(cfg.dec_epochs), cfg.seed), cfg.dec_ckpt);
  std::printf("saved %s\n", cfg.dec_ckpt.c_str());
  return 0;
}

std::pair<LocalizerNet, DecoderNet> load_models(const PipelineConfig& cfg) {
  if (cfg.loc_ckpt.empty() || cfg.dec_ckpt.empty())
    throw std::invalid_argument("both --loc-ckpt and --dec-ckpt are required");
  return {localizer_from_checkpoint(nn::load_checkpoint(cfg.loc_ckpt)),
          decoder_from_checkpoint(nn::load_checkpoint(cfg.dec_ckpt))};
}

int report_partials(const PipelineStats& st) {
  for (const auto& e : st.item_errors) vlog("item error: " + e);
  if (!st.item_errors.empty()) {
    std::fprintf(stderr, "%zu items failed\n", st.item_errors.size());
    return 2;
  }
  return 0;
}

int cmd_run(const PipelineConfig& cfg) {
  auto frames = scan_frames(cfg.frames_dir);
  if (frames.empty()) throw std::invalid_argument("no .pgm frames in " + cfg.frames_dir);
  auto [loc, dec] = load_models(cfg);
  PipelineStats st = run_pipeline(frames, cfg, loc, dec);
  std::printf("frames %llu failed %llu tags %llu shards %zu\n",
              (unsigned long long)st.frames_processed, (unsigned long long)st.frames_failed,
              (unsigned long long)st.tags_decoded, st.shards_written.size());
  if (st.tags_decoded > 0)
    std::printf("ms_per_tag %.3f\n", time_per_tag(st.inference_seconds, st.tags_decoded));
  return report_partials(st);
}

int cmd_run_sharded(const PipelineConfig& cfg) {
  auto frames = scan_frames(cfg.frames_dir);
  if (frames.empty()) throw std::invalid_argument("no .pgm frames in " + cfg.frames_dir);
  auto [loc, dec] = load_models(cfg);

  // workers chunk their slice locally, so ranges must start on shard
  // boundaries of the globally sorted list or the file set would depend on
  // the worker count
  std::sort(frames.begin(), frames.end(),
            [](const FrameInput& a, const FrameInput& b) { return a.frame_id < b.frame_id; });
  for (size_t i = 1; i < frames.size(); ++i)
    if (frames[i].frame_id == frames[i - 1].frame_id)
      throw std::invalid_argument("duplicate frame_id " + std::to_string(frames[i].frame_id));
  size_t chunk = size_t(cfg.shard_size);
  size_t n_chunks = (frames.size() + chunk - 1) / chunk;
  std::vector<FrameRange> ranges;
  for (const auto& cr : split_ranges(n_chunks, cfg.workers))
    ranges.push_back({std::min(cr.begin * chunk, frames.size()),
                      std::min(cr.end * chunk, frames.size())});

  ShardedResult r = run_sharded(frames, ranges, cfg.workers, cfg, loc, dec);
  std::printf("workers %d wall_seconds %.3f\n", r.workers_spawned, r.wall_seconds);
  int bad = r.workers_failed + r.workers_partial;
  if (bad > 0) {
    std::fprintf(stderr, "%d workers reported failures\n", bad);
    return 2;
  }
  return 0;
}

int cmd_track(const PipelineConfig& cfg, const std::string& out_path) {
  auto blocks = read_all_shards(cfg.frames_dir.empty() ? cfg.out_dir : cfg.frames_dir);
  std::vector<std::vector<TrackPoint>> frames;
  frames.reserve(blocks.size());
  for (const auto& b : blocks) {
    std::vector<TrackPoint> pts;
    for (const auto& d : b.dets) {
      TrackPoint p;
      p.frame_id = b.frame_id;
      p.x = d.x;
      p.y = d.y;
      for (int i = 0; i < 12; ++i) p.probs[i] = dequantize_prob(d.bit_q[i]);
      p.confidence = confidence(p.probs);
      pts.push_back(p);
    }
    frames.push_back(std::move(pts));
  }
  auto tracks = link(frames, cfg.gate_radius, cfg.max_gap);
  for (auto& t : tracks) consolidate(t);

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open " + out_path);
  for (size_t ti = 0; ti < tracks.size(); ++ti)
    for (const auto& p : tracks[ti].points) {
      char line[160];
      std::snprintf(line, sizeof line, "%zu %llu %.2f %.2f %d %.6f\n", ti,
                    (unsigned long long)p.frame_id, p.x, p.y, tracks[ti].assigned_id.value,
                    p.confidence);
      os << line;
    }
  std::printf("%zu tracks over %zu frames -> %s\n", tracks.size(), frames.size(),
              out_path.c_str());
  return 0;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& shards_dir,
             const std::string& kv_out) {
  auto blocks = read_all_shards(shards_dir);
  EvalReport rep;
  long gt_total = 0, det_total = 0, matched = 0;
  std::vector<std::pair<BitVector, std::array<float, 12>>> pairs;
  std::vector<std::pair<double, bool>> conf_items;

  for (const auto& b : blocks) {
    char name[64];
    std::snprintf(name, sizeof name, "frame_%06llu.txt", (unsigned long long)b.frame_id);
    fs::path sidecar = fs::path(cfg.frames_dir) / name;
    if (!fs::exists(sidecar)) continue;
    auto gt = read_sidecar(sidecar.string());

    std::vector<Candidate> dets;
    for (const auto& d : b.dets) dets.push_back({d.x, d.y, d.saliency});
    auto mr = match_detections(gt, dets, cfg.d_match);
    gt_total += long(gt.size());
    det_total += long(dets.size());
    matched += long(mr.matches.size());
    for (auto [gi, di] : mr.matches) {
      std::array<float, 12> probs;
      for (int i = 0; i < 12; ++i) probs[i] = dequantize_prob(b.dets[di].bit_q[i]);
      pairs.push_back({gt[gi].bits, probs});
      std::array<double, 12> pd;
      for (int i = 0; i < 12; ++i) pd[i] = probs[i];
      bool correct = decode_bits(pd).first.value == gt[gi].id.value;
      conf_items.push_back({confidence(probs), correct});
    }
  }
  if (gt_total == 0) throw std::invalid_argument("eval: no ground truth sidecars matched");

  rep.recall = gt_total ? double(matched) / double(gt_total) : 0.0;
  rep.precision_vacuous = det_total == 0;
  rep.precision = rep.precision_vacuous ? 1.0 : double(matched) / double(det_total);
  if (!pairs.empty()) {
    auto [mhd, acc] = score_decoding(pairs);
    rep.mhd = mhd;
    rep.accuracy = acc;
    rep.conf_curve = confidence_curve(conf_items, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
  }
  std::fputs(report_text(rep).c_str(), stdout);
  if (!kv_out.empty()) {
    std::ofstream os(kv_out);
    if (!os) throw std::runtime_error("cannot open " + kv_out);
    os << report_kv(rep);
    vlog("wrote " + kv_out);
  }
  return 0;
}

int cmd_overlay(const std::string& frame_path, const std::string& shards_dir, uint64_t frame_id,
                const std::string& out_path) {
  GrayImage frame = read_pgm(frame_path);
  auto blocks = read_all_shards(shards_dir);
  const FrameBlock* block = nullptr;
  for (const auto& b : blocks)
    if (b.frame_id == frame_id) block = &b;
  if (!block)
    throw std::invalid_argument("frame_id " + std::to_string(frame_id) + " not found in shards");

  std::vector<OverlayItem> items;
  for (const auto& d : block->dets) {
    std::array<float, 12> probs;
    std::array<double, 12> pd;
    for (int i = 0; i < 12; ++i) pd[i] = probs[i] = dequantize_prob(d.bit_q[i]);
    items.push_back({d.x, d.y, d.z_rot, decode_bits(pd).first.value, confidence(probs)});
  }
  write_pgm(render_overlay(frame, items), out_path);
  std::printf("rendered %zu detections -> %s\n", items.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ring-marker detection and decoding pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --config/--seed/--verbose after the subcommand too

  std::string config_path;
  uint64_t seed = 0;
  app.add_option("--config", config_path, "key=value config file");
  auto* seed_opt = app.add_option("--seed", seed, "rng seed override");
  app.add_flag("--verbose", g_verbose, "log progress to stderr");

  // per-subcommand overrides; applied to the config only when given
  struct Override {
    CLI::Option* opt = nullptr;
    std::function<void(PipelineConfig&)> apply;
  };
  std::vector<Override> overrides;
  auto add_override = [&overrides](CLI::Option* opt, std::function<void(PipelineConfig&)> fn) {
    overrides.push_back({opt, std::move(fn)});
  };

  auto* gen = app.add_subcommand("gen", "generate synthetic frames with sidecar labels");
  {
    static std::string out, preset;
    static int frames = 0, tags = 0, w = 0, h = 0;
    add_override(gen->add_option("--out", out, "output directory")->required(),
                 [&](PipelineConfig& c) { c.out_dir = out; });
    add_override(gen->add_option("--frames", frames), [&](PipelineConfig& c) { c.n_frames = frames; });
    add_override(gen->add_option("--tags", tags), [&](PipelineConfig& c) { c.n_tags = tags; });
    add_override(gen->add_option("--width", w), [&](PipelineConfig& c) { c.frame_w = w; });
    add_override(gen->add_option("--height", h), [&](PipelineConfig& c) { c.frame_h = h; });
    add_override(gen->add_option("--preset", preset), [&](PipelineConfig& c) { c.preset = preset; });
  }

  auto* tloc = app.add_subcommand("train-loc", "train the localizer network");
  {
    static std::string data, out_ckpt;
    static int epochs = 0, batch = 0, samples = 0;
    static double lr = 0, momentum = -1, sigma = 0;
    add_override(tloc->add_option("--data", data, "frames + sidecars directory")->required(),
                 [&](PipelineConfig& c) { c.frames_dir = data; });
    add_override(tloc->add_option("--out-ckpt", out_ckpt)->required(),
                 [&](PipelineConfig& c) { c.loc_ckpt = out_ckpt; });
    add_override(tloc->add_option("--epochs", epochs), [&](PipelineConfig& c) { c.loc_epochs = epochs; });
    add_override(tloc->add_option("--lr", lr), [&](PipelineConfig& c) { c.loc_lr = lr; });
    add_override(tloc->add_option("--momentum", momentum),
                 [&](PipelineConfig& c) { c.loc_momentum = momentum; });
    add_override(tloc->add_option("--batch", batch), [&](PipelineConfig& c) { c.loc_batch = batch; });
    add_override(tloc->add_option("--sigma", sigma), [&](PipelineConfig& c) { c.sigma = sigma; });
    add_override(tloc->add_option("--samples", samples),
                 [&](PipelineConfig& c) { c.loc_samples = samples; });
  }

  auto* tdec = app.add_subcommand("train-dec", "train the decoder network");
  {
    static std::string out_ckpt, preset;
    static int epochs = 0, batch = 0, samples = 0, blocks = 0;
    static double lr = 0, momentum = -1, lambda = -1;
    add_override(tdec->add_option("--out-ckpt", out_ckpt)->required(),
                 [&](PipelineConfig& c) { c.dec_ckpt = out_ckpt; });
    add_override(tdec->add_option("--epochs", epochs), [&](PipelineConfig& c) { c.dec_epochs = epochs; });
    add_override(tdec->add_option("--lr", lr), [&](PipelineConfig& c) { c.dec_lr = lr; });
    add_override(tdec->add_option("--momentum", momentum),
                 [&](PipelineConfig& c) { c.dec_momentum = momentum; });
    add_override(tdec->add_option("--batch", batch), [&](PipelineConfig& c) { c.dec_batch = batch; });
    add_override(tdec->add_option("--samples", samples),
                 [&](PipelineConfig& c) { c.dec_samples = samples; });
    add_override(tdec->add_option("--blocks-per-stage", blocks),
                 [&](PipelineConfig& c) { c.blocks_per_stage = blocks; });
    add_override(tdec->add_option("--lambda", lambda), [&](PipelineConfig& c) { c.lambda = lambda; });
    add_override(tdec->add_option("--preset", preset), [&](PipelineConfig& c) { c.preset = preset; });
  }

  auto* run = app.add_subcommand("run", "detect and decode tags in a frame directory");
  auto* runsh = app.add_subcommand("run-sharded", "run with forked workers on disjoint ranges");
  for (auto* cmd : {run, runsh}) {
    static std::string frames[2], out[2], loc_ckpt[2], dec_ckpt[2];
    static double threshold[2] = {-1, -1};
    static int workers[2] = {0, 0};
    int i = cmd == runsh;
    add_override(cmd->add_option("--frames", frames[i])->required(),
                 [&, i](PipelineConfig& c) { c.frames_dir = frames[i]; });
    add_override(cmd->add_option("--out", out[i])->required(),
                 [&, i](PipelineConfig& c) { c.out_dir = out[i]; });
    add_override(cmd->add_option("--loc-ckpt", loc_ckpt[i]),
                 [&, i](PipelineConfig& c) { c.loc_ckpt = loc_ckpt[i]; });
    add_override(cmd->add_option("--dec-ckpt", dec_ckpt[i]),
                 [&, i](PipelineConfig& c) { c.dec_ckpt = dec_ckpt[i]; });
    add_override(cmd->add_option("--threshold", threshold[i]),
                 [&, i](PipelineConfig& c) { c.threshold = threshold[i]; });
    if (cmd == runsh)
      add_override(cmd->add_option("--workers", workers[i]),
                   [&, i](PipelineConfig& c) { c.workers = workers[i]; });
  }

  auto* track = app.add_subcommand("track", "link shard detections into tracks");
  static std::string track_shards, track_out;
  static double gate = -1;
  static int gap = -1;
  add_override(track->add_option("--shards", track_shards)->required(),
               [&](PipelineConfig& c) { c.frames_dir = track_shards; });
  track->add_option("--out", track_out)->required();
  add_override(track->add_option("--gate-radius", gate),
               [&](PipelineConfig& c) { c.gate_radius = gate; });
  add_override(track->add_option("--max-gap", gap), [&](PipelineConfig& c) { c.max_gap = gap; });

  auto* eval = app.add_subcommand("eval", "score shard detections against sidecar labels");
  static std::string eval_frames, eval_shards, eval_kv;
  static double dmatch = -1;
  add_override(eval->add_option("--frames", eval_frames)->required(),
               [&](PipelineConfig& c) { c.frames_dir = eval_frames; });
  eval->add_option("--shards", eval_shards)->required();
  eval->add_option("--kv-out", eval_kv);
  add_override(eval->add_option("--d-match", dmatch),
               [&](PipelineConfig& c) { c.d_match = dmatch; });

  auto* overlay = app.add_subcommand("overlay", "render detections onto a frame");
  static std::string ov_frame, ov_shards, ov_out;
  static uint64_t ov_id = 0;
  overlay->add_option("--frame", ov_frame)->required();
  overlay->add_option("--shards", ov_shards)->required();
  overlay->add_option("--frame-id", ov_id);
  overlay->add_option("--out", ov_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;
    for (const auto& ov : overrides)
      if (ov.opt->count() > 0) ov.apply(cfg);
    validate_config(cfg);

    if (gen->parsed()) return cmd_gen(cfg);
    if (tloc->parsed()) return cmd_train_loc(cfg);
    if (tdec->parsed()) return cmd_train_dec(cfg);
    if (run->parsed()) return cmd_run(cfg);
    if (runsh->parsed()) return cmd_run_sharded(cfg);
    if (track->parsed()) return cmd_track(cfg, track_out);
    if (eval->parsed()) return cmd_eval(cfg, eval_shards, eval_kv);
    if (overlay->parsed()) return cmd_overlay(ov_frame, ov_shards, ov_id, ov_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
