#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "beetag/config.hpp"
#include "beetag/imgproc.hpp"
#include "beetag/pipeline.hpp"
#include "beetag/synthgen.hpp"

using namespace beetag;

namespace {

namespace fs = std::filesystem;

struct TmpDir {
  fs::path path;
  explicit TmpDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

PipelineConfig plumbing_config(const std::string& out_dir) {
  PipelineConfig cfg;
  cfg.out_dir = out_dir;
  cfg.threshold = 0.0;  // untrained saliency still yields candidates
  cfg.shard_size = 2;
  return cfg;
}

std::vector<FrameInput> write_frames(const TmpDir& tmp, const std::vector<uint64_t>& ids) {
  std::vector<FrameInput> frames;
  for (uint64_t id : ids) {
    FrameScene scene = generate_frame(1000 + id, 2, 320, 320, Preset::clean);
    std::string path = tmp.file("frame_" + std::to_string(id) + ".pgm");
    write_pgm(scene.image, path);
    frames.push_back({id, id * 40000, path});
  }
  return frames;
}

bool blocks_equal(const std::vector<FrameBlock>& a, const std::vector<FrameBlock>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].frame_id != b[i].frame_id) return false;
    if (a[i].timestamp_us != b[i].timestamp_us) return false;
    if (a[i].dets.size() != b[i].dets.size()) return false;
    for (size_t d = 0; d < a[i].dets.size(); ++d) {
      const auto& x = a[i].dets[d];
      const auto& y = b[i].dets[d];
      if (x.x != y.x || x.y != y.y || x.z_rot != y.z_rot || x.y_rot != y.y_rot ||
          x.x_rot != y.x_rot || x.bit_q != y.bit_q || x.saliency != y.saliency)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("config keys cover every field and parse round-trip") {
  auto keys = config_keys();
  CHECK(keys.size() == 44);
  for (const char* k : {"clahe_tiles", "sigma", "threshold", "loc_lr", "dec_batch",
                        "gate_radius", "keep_fraction", "shard_size", "preset", "out_dir",
                        "seed", "workers"})
    CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());

  PipelineConfig cfg;
  apply_config_kv(cfg, "clahe_tiles", "4");
  CHECK(cfg.clahe_tiles == 4);
  apply_config_kv(cfg, "threshold", "0.75");
  CHECK(cfg.threshold == 0.75);
  apply_config_kv(cfg, "preset", "hard");
  CHECK(cfg.preset == "hard");
  apply_config_kv(cfg, "seed", "123456789012345");
  CHECK(cfg.seed == 123456789012345ull);

  CHECK_THROWS_AS(apply_config_kv(cfg, "no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_kv(cfg, "clahe_tiles", "12x"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_kv(cfg, "threshold", "abc"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_kv(cfg, "threshold", ""), std::invalid_argument);
}

TEST_CASE("config validation names the offending key") {
  PipelineConfig cfg;
  validate_config(cfg);  // defaults pass

  auto expect_reject = [](void (*mutate)(PipelineConfig&), const char* needle) {
    PipelineConfig c;
    mutate(c);
    bool threw = false;
    try {
      validate_config(c);
    } catch (const std::invalid_argument& e) {
      threw = true;
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
    CHECK(threw);
  };
  expect_reject([](PipelineConfig& c) { c.threshold = 1.5; }, "threshold");
  expect_reject([](PipelineConfig& c) { c.clahe_tiles = 0; }, "clahe_tiles");
  expect_reject([](PipelineConfig& c) { c.clahe_clip = 0.5; }, "clahe_clip");
  expect_reject([](PipelineConfig& c) { c.camera_id = 256; }, "camera_id");
  expect_reject([](PipelineConfig& c) { c.date_month = 13; }, "date_month");
  expect_reject([](PipelineConfig& c) { c.loc_momentum = 1.0; }, "loc_momentum");
  expect_reject([](PipelineConfig& c) { c.keep_fraction = 1.2; }, "keep_fraction");
  expect_reject([](PipelineConfig& c) { c.frame_w = 64; }, "frame size");
  expect_reject([](PipelineConfig& c) { c.workers = 0; }, "workers");
  expect_reject([](PipelineConfig& c) { c.shard_size = 0; }, "shard_size");

  PipelineConfig bad_preset;
  bad_preset.preset = "extreme";
  CHECK_THROWS_AS(validate_config(bad_preset), std::invalid_argument);
}

TEST_CASE("config files parse comments, blanks and spacing") {
  TmpDir tmp("beetag_pipeline_cfg_test");
  std::string path = tmp.file("run.cfg");
  {
    std::ofstream os(path);
    os << "# run settings\n"
       << "\n"
       << "clahe_tiles = 4\n"
       << "threshold=0.55   # trailing comment\n"
       << "  preset = clean\n"
       << "out_dir = /tmp/some/where\n"
       << "workers = 2\n";
  }
  PipelineConfig cfg = parse_config_file(path);
  CHECK(cfg.clahe_tiles == 4);
  CHECK(cfg.threshold == 0.55);
  CHECK(cfg.preset == "clean");
  CHECK(cfg.out_dir == "/tmp/some/where");
  CHECK(cfg.workers == 2);
  CHECK(cfg.sigma == 32.0);  // untouched default

  std::string bad = tmp.file("bad.cfg");
  {
    std::ofstream os(bad);
    os << "threshold 0.5\n";
  }
  CHECK_THROWS_AS(parse_config_file(bad), std::invalid_argument);

  std::string unknown = tmp.file("unknown.cfg");
  {
    std::ofstream os(unknown);
    os << "thresh0ld=0.5\n";
  }
  CHECK_THROWS_AS(parse_config_file(unknown), std::invalid_argument);

  std::string invalid = tmp.file("invalid.cfg");
  {
    std::ofstream os(invalid);
    os << "threshold=1.7\n";
  }
  CHECK_THROWS_AS(parse_config_file(invalid), std::invalid_argument);

  CHECK_THROWS_AS(parse_config_file(tmp.file("missing.cfg")), std::runtime_error);
}

TEST_CASE("split_ranges partitions evenly with the remainder up front") {
  auto r = split_ranges(10, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0].begin == 0);
  CHECK(r[0].end == 4);
  CHECK(r[1].begin == 4);
  CHECK(r[1].end == 7);
  CHECK(r[2].begin == 7);
  CHECK(r[2].end == 10);

  auto few = split_ranges(3, 5);
  REQUIRE(few.size() == 5);
  size_t covered = 0;
  for (const auto& x : few) {
    CHECK(x.begin <= x.end);
    covered += x.end - x.begin;
  }
  CHECK(covered == 3);
  CHECK(few[4].end == 3);

  auto empty = split_ranges(0, 2);
  for (const auto& x : empty) CHECK(x.begin == x.end);

  CHECK_THROWS_AS(split_ranges(5, 0), std::invalid_argument);
}

TEST_CASE("process_frame runs the full chain deterministically") {
  LocalizerNet loc({4, 6, 8}, 0.25, 3);
  DecoderNet dec(4, 1, 16, 5);
  FrameScene scene = generate_frame(42, 2, 320, 320, Preset::clean);
  PipelineConfig cfg = plumbing_config("/unused");

  FrameResult a = process_frame(scene.image, cfg, loc, dec);
  FrameResult b = process_frame(scene.image, cfg, loc, dec);
  CHECK(!a.dets.empty());
  CHECK(a.seconds >= 0.0);
  REQUIRE(a.dets.size() == b.dets.size());
  for (size_t i = 0; i < a.dets.size(); ++i) {
    CHECK(a.dets[i].x == b.dets[i].x);
    CHECK(a.dets[i].y == b.dets[i].y);
    CHECK(a.dets[i].bit_q == b.dets[i].bit_q);
  }
  for (const auto& d : a.dets) {
    CHECK(d.x >= -8.f);
    CHECK(d.x <= 320.f + 8.f);
    CHECK(d.y >= -8.f);
    CHECK(d.y <= 320.f + 8.f);
    CHECK(d.saliency >= 0.f);
    CHECK(d.saliency <= 1.f);
    CHECK(d.z_rot >= -3.15f);
    CHECK(d.z_rot <= 3.15f);
  }
}

TEST_CASE("run_pipeline writes date-partitioned shards and tolerates bad frames") {
  TmpDir tmp("beetag_pipeline_run_test");
  LocalizerNet loc({4, 6, 8}, 0.25, 3);
  DecoderNet dec(4, 1, 16, 5);
  std::string out_dir = (tmp.path / "out").string();
  PipelineConfig cfg = plumbing_config(out_dir);

  // deliberately unsorted ids; the pipeline sorts before sharding
  auto frames = write_frames(tmp, {7, 3, 11, 5, 9});
  frames.push_back({13, 13 * 40000, tmp.file("missing.pgm")});
  std::string corrupt = tmp.file("corrupt.pgm");
  {
    std::ofstream os(corrupt, std::ios::binary);
    os << "P6\n2 2\n255\njunk";
  }
  frames.push_back({15, 15 * 40000, corrupt});

  PipelineStats stats = run_pipeline(frames, cfg, loc, dec);
  CHECK(stats.frames_processed == 5);
  CHECK(stats.frames_failed == 2);
  CHECK(stats.item_errors.size() == 2);
  CHECK(stats.tags_decoded > 0);
  CHECK(stats.inference_seconds > 0.0);

  // shard index equals the first frame id of each chunk of shard_size frames
  std::vector<std::string> want{"2000/01/01/cam0/shard_3.bbdt", "2000/01/01/cam0/shard_7.bbdt",
                                "2000/01/01/cam0/shard_11.bbdt"};
  CHECK(stats.shards_written == want);
  for (const auto& rel : want) CHECK(fs::exists(fs::path(out_dir) / rel));

  auto blocks = read_all_shards(out_dir);
  REQUIRE(blocks.size() == 5);
  std::vector<uint64_t> ids;
  for (const auto& b : blocks) ids.push_back(b.frame_id);
  CHECK(ids == std::vector<uint64_t>{3, 5, 7, 9, 11});
  for (const auto& b : blocks) CHECK(b.timestamp_us == b.frame_id * 40000);

  // duplicate ids are a hard error
  auto dup = frames;
  dup.push_back(dup.front());
  CHECK_THROWS_AS(run_pipeline(dup, cfg, loc, dec), std::invalid_argument);

  PipelineConfig no_out = cfg;
  no_out.out_dir.clear();
  CHECK_THROWS_AS(run_pipeline(frames, no_out, loc, dec), std::invalid_argument);
}

TEST_CASE("sharded runs merge to the single-worker result") {
  TmpDir tmp("beetag_pipeline_sharded_test");
  LocalizerNet loc({4, 6, 8}, 0.25, 3);
  DecoderNet dec(4, 1, 16, 5);
  auto frames = write_frames(tmp, {1, 2, 3, 4, 5, 6, 7, 8});

  std::string solo_dir = (tmp.path / "solo").string();
  PipelineConfig solo_cfg = plumbing_config(solo_dir);
  ShardedResult solo = run_sharded(frames, {{0, frames.size()}}, 1, solo_cfg, loc, dec);
  CHECK(solo.workers_spawned == 1);
  CHECK(solo.workers_failed == 0);
  CHECK(solo.workers_partial == 0);

  std::string multi_dir = (tmp.path / "multi").string();
  PipelineConfig multi_cfg = plumbing_config(multi_dir);
  // ranges aligned to shard_size so both runs cut identical shards
  auto mid = run_sharded(frames, {{0, 4}, {4, 8}}, 2, multi_cfg, loc, dec);
  CHECK(mid.workers_spawned == 2);
  CHECK(mid.workers_failed == 0);

  CHECK(blocks_equal(read_all_shards(solo_dir), read_all_shards(multi_dir)));

  // a worker whose range holds an unreadable frame reports partial success
  auto broken = frames;
  broken[6].path = tmp.file("gone.pgm");
  std::string part_dir = (tmp.path / "partial").string();
  PipelineConfig part_cfg = plumbing_config(part_dir);
  ShardedResult part = run_sharded(broken, {{0, 4}, {4, 8}}, 2, part_cfg, loc, dec);
  CHECK(part.workers_partial == 1);
  CHECK(part.workers_failed == 0);
  CHECK(read_all_shards(part_dir).size() == 7);

  CHECK_THROWS_AS(run_sharded(frames, {{0, 5}, {4, 8}}, 2, multi_cfg, loc, dec),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_sharded(frames, {{0, 9}}, 1, multi_cfg, loc, dec),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_sharded(frames, {{0, 4}}, 0, multi_cfg, loc, dec),
                  std::invalid_argument);
}
