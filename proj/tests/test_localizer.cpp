#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "beetag/imgproc.hpp"
#include "beetag/localizer.hpp"
#include "beetag/nn/checkpoint.hpp"
#include "beetag/rng.hpp"
#include "beetag/synthgen.hpp"
#include "beetag/tagcodec.hpp"

using namespace beetag;

namespace {

TagLabel label_at(double x, double y) {
  TagLabel l;
  l.id = TagId{0};
  l.bits = encode_id(TagId{0});
  l.pose.center_x = x;
  l.pose.center_y = y;
  return l;
}

SaliencyMap map_of(int h, int w) {
  SaliencyMap s;
  s.grid = GrayImage(h, w);
  return s;
}

void add_gaussian(GrayImage& g, double ci, double cj, double amp, double sd) {
  for (int i = 0; i < g.h; ++i)
    for (int j = 0; j < g.w; ++j) {
      double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
      g.at(i, j) = std::max(g.at(i, j), float(amp * std::exp(-d2 / (2.0 * sd * sd))));
    }
}

GrayImage random_frame(int h, int w, uint64_t seed) {
  Rng rng(seed);
  GrayImage img(h, w);
  for (auto& v : img.v) v = float(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("make_target is a peak-normalized gaussian of the nearest center") {
  std::vector<TagLabel> labels{label_at(100, 100), label_at(300, 100)};
  CHECK(make_target(100, 100, labels, 32.0) == 1.0);
  // one sigma out, frozen reference value
  CHECK(make_target(132, 100, labels, 32.0) ==
        doctest::Approx(0.6065306597126334).epsilon(1e-12));
  // the nearer label governs
  CHECK(make_target(296, 100, labels, 32.0) ==
        doctest::Approx(std::exp(-16.0 / (2.0 * 32.0 * 32.0))).epsilon(1e-12));
  CHECK(make_target(0, 0, {}, 32.0) == 0.0);
  // monotone decay away from an isolated label
  std::vector<TagLabel> lone{label_at(100, 100)};
  double prev = 2.0;
  for (int d = 0; d <= 160; d += 16) {
    double t = make_target(100 + d, 100, lone, 32.0);
    CHECK(t < prev);
    prev = t;
  }
}

TEST_CASE("saliency grid cells anchor at full-resolution window centers") {
  SaliencyMap sal;
  CHECK(sal.cell_x(0) == 64.0);
  CHECK(sal.cell_y(0) == 64.0);
  CHECK(sal.cell_x(1) == 96.0);
  CHECK(sal.cell_y(3) == 160.0);
  CHECK(sal.cell_x(7.25) == doctest::Approx(32.0 * 7.25 + 64.0).epsilon(1e-12));
}

TEST_CASE("training set sampling hits the requested positive fraction") {
  FrameScene scene = generate_frame(101, 6, 512, 512, Preset::moderate);
  LocSampleConfig cfg;
  auto samples = sample_training_set({scene}, 400, 7, cfg);
  REQUIRE(samples.size() == 400);
  int pos = 0;
  for (const auto& s : samples) {
    CHECK(s.patch.h == 32);
    CHECK(s.patch.w == 32);
    CHECK(s.target >= 0.f);
    CHECK(s.target <= 1.f);
    for (float v : s.patch.v) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
    if (s.target > 0.5f) ++pos;
  }
  double frac = pos / 400.0;
  CHECK(frac > 0.46);
  CHECK(frac < 0.54);

  auto again = sample_training_set({scene}, 400, 7, cfg);
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(again[i].target == samples[i].target);
    CHECK(again[i].patch.v == samples[i].patch.v);
  }

  CHECK(sample_training_set({scene}, 0, 7, cfg).empty());
  CHECK_THROWS_AS(sample_training_set({}, 10, 7, cfg), std::invalid_argument);
  FrameScene tiny;
  tiny.image = GrayImage(64, 64);
  CHECK_THROWS_AS(sample_training_set({tiny}, 10, 7, cfg), std::invalid_argument);
}

TEST_CASE("a small localizer overfits a separable toy set") {
  Rng rng(9);
  std::vector<LocTrainSample> samples;
  for (int k = 0; k < 16; ++k) {
    TagPose pose;
    pose.center_x = 64.0;
    pose.center_y = 64.0;
    pose.z_rot = rng.uniform(-3.1, 3.1);
    GrayImage patch = rasterize_tag(encode_id(TagId{int(rng.uniform_int(4096))}), pose,
                                    TagGeometry{}, 128);
    samples.push_back({downsample4(patch), 1.f});
  }
  for (int k = 0; k < 16; ++k) {
    GrayImage bg(128, 128);
    for (auto& v : bg.v) v = std::clamp(0.5f + float(rng.normal() * 0.08), 0.f, 1.f);
    samples.push_back({downsample4(bg), 0.f});
  }

  LocTrainConfig cfg;
  cfg.widths = {6, 8, 10};
  cfg.dropout = 0.0;
  cfg.seed = 11;
  cfg.sgd = {0.05, 0.9, 8, 150};
  int epochs_seen = 0;
  double last_loss = 1e9;
  cfg.epoch_log = [&](int epoch, double loss) {
    CHECK(epoch == epochs_seen);
    ++epochs_seen;
    last_loss = loss;
  };
  LocalizerNet net = train_localizer(samples, cfg);
  CHECK(epochs_seen == 150);
  CHECK(last_loss < 0.05);

  // the trained net separates the two classes
  for (const auto& s : samples) {
    nn::Ten4<float> x(1, 1, 32, 32);
    std::copy(s.patch.v.begin(), s.patch.v.end(), x.ptr(0, 0));
    float p = net.forward(x, false).v[0];
    if (s.target > 0.5f)
      CHECK(p > 0.5f);
    else
      CHECK(p < 0.5f);
  }

  CHECK_THROWS_AS(train_localizer({}, cfg), std::invalid_argument);
  std::vector<LocTrainSample> bad{{GrayImage(16, 16), 0.f}};
  CHECK_THROWS_AS(train_localizer(bad, cfg), std::invalid_argument);
}

TEST_CASE("localizer checkpoints restore the exact function") {
  namespace fs = std::filesystem;
  LocalizerNet net({4, 6, 8}, 0.25, 21);
  nn::Checkpoint ck = localizer_to_checkpoint(net, 5, 21);
  CHECK(ck.epoch == 5);
  CHECK(ck.buffers.empty());

  fs::path dir = fs::temp_directory_path() / "beetag_localizer_test";
  fs::create_directories(dir);
  std::string path = (dir / "loc.bbnn").string();
  nn::save_checkpoint(ck, path);
  LocalizerNet back = localizer_from_checkpoint(nn::load_checkpoint(path));
  CHECK(back.widths() == std::array<int, 3>{4, 6, 8});
  CHECK(back.dropout_p() == doctest::Approx(0.25).epsilon(1e-9));

  nn::Ten4<float> x(1, 1, 32, 32);
  Rng rng(3);
  for (auto& v : x.v) v = float(rng.uniform());
  CHECK(net.forward(x, false).v == back.forward(x, false).v);

  nn::Checkpoint wrong = ck;
  wrong.descriptor = "decoder v=1 filters=16 blocks=2 head=256\nconv 3 1 same 16 elu\n";
  CHECK_THROWS_AS(localizer_from_checkpoint(wrong), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("dense inference matches patchwise evaluation") {
  LocalizerNet net({4, 6, 8}, 0.25, 33);
  GrayImage frame = random_frame(256, 256, 13);
  SaliencyMap sal = infer_saliency_preprocessed(frame, net);
  GrayImage small = downsample4(frame);
  int cells_y = (small.h - 32) / 8 + 1;
  int cells_x = (small.w - 32) / 8 + 1;
  REQUIRE(sal.grid.h == cells_y);
  REQUIRE(sal.grid.w == cells_x);

  for (int i = 0; i < cells_y; ++i)
    for (int j = 0; j < cells_x; ++j) {
      nn::Ten4<float> x(1, 1, 32, 32);
      for (int y = 0; y < 32; ++y)
        for (int xx = 0; xx < 32; ++xx)
          x.at(0, 0, y, xx) = small.at(8 * i + y, 8 * j + xx);
      float want = net.forward(x, false).v[0];
      CHECK(std::abs(sal.grid.at(i, j) - want) < 1e-5f);
    }
}

TEST_CASE("saliency grid sizes follow the stride arithmetic") {
  LocalizerNet net({2, 3, 4}, 0.0, 1);
  SaliencyMap s1 = infer_saliency_preprocessed(random_frame(640, 640, 2), net);
  CHECK(s1.grid.h == 17);
  CHECK(s1.grid.w == 17);
  SaliencyMap s2 = infer_saliency_preprocessed(random_frame(128, 160, 3), net);
  CHECK(s2.grid.h == 1);
  CHECK(s2.grid.w == 2);
  CHECK_THROWS_AS(infer_saliency_preprocessed(random_frame(120, 256, 4), net),
                  std::invalid_argument);
}

TEST_CASE("candidate extraction finds, refines and merges peaks") {
  CandidateParams params;

  SUBCASE("empty grid yields nothing") {
    CHECK(extract_candidates(map_of(9, 9), params).empty());
  }

  SUBCASE("single on-cell peak maps to its window center") {
    SaliencyMap sal = map_of(11, 11);
    add_gaussian(sal.grid, 5, 7, 0.9, 1.5);
    auto cands = extract_candidates(sal, params);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].x == doctest::Approx(sal.cell_x(7)).epsilon(1e-4));
    CHECK(cands[0].y == doctest::Approx(sal.cell_y(5)).epsilon(1e-4));
    CHECK(cands[0].saliency == doctest::Approx(0.9).epsilon(1e-6));
  }

  SUBCASE("log-parabola refinement recovers a sub-cell peak") {
    SaliencyMap sal = map_of(11, 11);
    add_gaussian(sal.grid, 5.3, 7.25, 0.9, 1.5);
    auto cands = extract_candidates(sal, params);
    REQUIRE(cands.size() == 1);
    CHECK(std::abs(cands[0].x - sal.cell_x(7.25)) < 0.05);
    CHECK(std::abs(cands[0].y - sal.cell_y(5.3)) < 0.05);
  }

  SUBCASE("distinct peaks survive, ordered by saliency") {
    SaliencyMap sal = map_of(13, 13);
    add_gaussian(sal.grid, 3, 3, 0.7, 1.0);
    add_gaussian(sal.grid, 9, 9, 0.95, 1.0);
    auto cands = extract_candidates(sal, params);
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].saliency > cands[1].saliency);
    CHECK(cands[0].x == doctest::Approx(sal.cell_x(9)).epsilon(1e-3));
    CHECK(cands[1].x == doctest::Approx(sal.cell_x(3)).epsilon(1e-3));
  }

  SUBCASE("threshold filters and is monotone") {
    SaliencyMap sal = map_of(13, 13);
    add_gaussian(sal.grid, 3, 3, 0.7, 1.0);
    add_gaussian(sal.grid, 9, 9, 0.95, 1.0);
    CandidateParams high = params;
    high.threshold = 0.75;
    auto cands = extract_candidates(sal, high);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].saliency == doctest::Approx(0.95).epsilon(1e-6));
    CandidateParams low = params;
    low.threshold = 0.4;
    CHECK(extract_candidates(sal, low).size() == 2);
  }

  SUBCASE("peaks inside merge_dist collapse to the stronger one") {
    SaliencyMap sal = map_of(13, 13);
    // adjacent cells are 32 full-res px apart, well inside the 22 px
    // merge radius only if closer; craft two maxima 16 px apart via
    // half-cell refinement instead: use two peaks one cell apart with a
    // saddle, then widen merge_dist so they merge
    add_gaussian(sal.grid, 6, 4, 0.8, 0.7);
    add_gaussian(sal.grid, 6, 8, 0.9, 0.7);
    CandidateParams wide = params;
    wide.merge_dist = 200.0;
    auto merged = extract_candidates(sal, wide);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].saliency == doctest::Approx(0.9).epsilon(1e-6));
    CandidateParams narrow = params;
    narrow.merge_dist = 22.0;
    CHECK(extract_candidates(sal, narrow).size() == 2);
  }

  SUBCASE("grayscale opening suppresses single-cell impulses") {
    SaliencyMap sal = map_of(11, 11);
    sal.grid.at(5, 5) = 0.9f;
    CHECK(extract_candidates(sal, params).size() == 1);
    CandidateParams opened = params;
    opened.morph_open_radius = 1;
    CHECK(extract_candidates(sal, opened).empty());
  }
}

TEST_CASE("end to end: the toy localizer lights up over a rendered tag") {
  Rng rng(17);
  std::vector<LocTrainSample> samples;
  for (int k = 0; k < 24; ++k) {
    TagPose pose;
    pose.center_x = 64.0;
    pose.center_y = 64.0;
    pose.z_rot = rng.uniform(-3.1, 3.1);
    GrayImage patch = rasterize_tag(encode_id(TagId{int(rng.uniform_int(4096))}), pose,
                                    TagGeometry{}, 128);
    samples.push_back({downsample4(patch), 1.f});
  }
  for (int k = 0; k < 24; ++k) {
    GrayImage bg(128, 128);
    for (auto& v : bg.v) v = std::clamp(0.5f + float(rng.normal() * 0.08), 0.f, 1.f);
    samples.push_back({downsample4(bg), 0.f});
  }
  LocTrainConfig cfg;
  cfg.widths = {6, 8, 10};
  cfg.dropout = 0.0;
  cfg.seed = 19;
  cfg.sgd = {0.05, 0.9, 8, 150};
  LocalizerNet net = train_localizer(samples, cfg);

  // build a quiet frame with one tag at a known spot
  GrayImage frame(256, 256);
  for (auto& v : frame.v) v = 0.5f;
  TagPose pose;
  pose.center_x = 160.0;
  pose.center_y = 128.0;
  GrayImage tag = rasterize_tag(encode_id(TagId{777}), pose, TagGeometry{}, 256);
  for (size_t i = 0; i < frame.v.size(); ++i)
    if (std::abs(tag.v[i] - 0.5f) > 1e-6f) frame.v[i] = tag.v[i];

  SaliencyMap sal = infer_saliency_preprocessed(frame, net);
  CandidateParams params;
  auto cands = extract_candidates(sal, params);
  REQUIRE(!cands.empty());
  double best = 1e9;
  for (const auto& c : cands) best = std::min(best, std::hypot(c.x - 160.0, c.y - 128.0));
  CHECK(best < 32.0);
}
