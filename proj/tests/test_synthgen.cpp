#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "beetag/synthgen.hpp"
#include "beetag/tagcodec.hpp"

using namespace beetag;

namespace {

AugmentParams identity_params() {
  AugmentParams p;
  p.blur_sigma = 0.0;
  p.noise_sigma = 0.0;
  p.brightness_shift = 0.0;
  p.contrast_scale = 1.0;
  p.elastic_alpha = 0.0;
  return p;
}

}  // namespace

TEST_CASE("preset names round-trip") {
  for (auto p : {Preset::clean, Preset::moderate, Preset::hard})
    CHECK(preset_from_name(preset_name(p)) == p);
  CHECK_THROWS_AS(preset_from_name("extreme"), std::invalid_argument);
}

TEST_CASE("generate_patch is deterministic in the seed") {
  auto [img1, label1] = generate_patch(77, Preset::moderate);
  auto [img2, label2] = generate_patch(77, Preset::moderate);
  CHECK(img1.v == img2.v);
  CHECK(label1.id.value == label2.id.value);
  CHECK(label1.pose.center_x == label2.pose.center_x);
  CHECK(label1.pose.z_rot == label2.pose.z_rot);

  auto [img3, label3] = generate_patch(78, Preset::moderate);
  CHECK(img3.v != img1.v);
}

TEST_CASE("generate_patch labels satisfy their invariants") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto [img, label] = generate_patch(seed, Preset::hard);
    CHECK(img.h == 64);
    CHECK(img.w == 64);
    CHECK(label.id.value >= 0);
    CHECK(label.id.value < 4096);
    CHECK(label.bits == encode_id(label.id));
    CHECK(label.pose.z_rot > -M_PI);
    CHECK(label.pose.z_rot <= M_PI);
    CHECK(std::abs(label.pose.y_rot) <= M_PI / 6 + 1e-12);
    CHECK(std::abs(label.pose.x_rot) <= M_PI / 6 + 1e-12);
    CHECK(std::abs(label.pose.center_x - 32.0) <= 8.0);
    CHECK(std::abs(label.pose.center_y - 32.0) <= 8.0);
    for (float v : img.v) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
  }
}

TEST_CASE("generated ids are uniform (chi-square over 16 buckets)") {
  const int n = 10000;
  std::array<int, 16> counts{};
  for (uint64_t seed = 0; seed < n; ++seed) {
    auto [img, label] = generate_patch(seed, Preset::clean);
    counts[label.id.value >> 8] += 1;
  }
  double expected = double(n) / 16.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 0.99 quantile of chi-square with 15 dof
  CHECK(chi2 < 30.578);
}

TEST_CASE("augment with identity parameters returns the input") {
  auto [img, label] = generate_patch(5, Preset::clean);
  GrayImage out = augment(img, identity_params(), 123);
  CHECK(out.v == img.v);
}

TEST_CASE("augment noise statistics match the requested sigma") {
  GrayImage mid(64, 64, 0.5f);
  AugmentParams p = identity_params();
  p.noise_sigma = 0.1;
  GrayImage out = augment(mid, p, 9);
  double mean = 0.0;
  for (float v : out.v) mean += v;
  mean /= double(out.v.size());
  double var = 0.0;
  for (float v : out.v) var += (v - mean) * (v - mean);
  var /= double(out.v.size());
  double sd = std::sqrt(var);
  CHECK(sd > 0.09);
  CHECK(sd < 0.11);
}

TEST_CASE("augment brightness shifts the mean exactly") {
  GrayImage mid(32, 32, 0.5f);
  AugmentParams p = identity_params();
  p.brightness_shift = 0.1;
  GrayImage out = augment(mid, p, 1);
  double mean = 0.0;
  for (float v : out.v) mean += v;
  mean /= double(out.v.size());
  CHECK(mean == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("augment contrast scales deviations around mid-gray") {
  GrayImage img(4, 4, 0.5f);
  img.at(0, 0) = 0.7f;
  img.at(1, 1) = 0.3f;
  AugmentParams p = identity_params();
  p.contrast_scale = 2.0;
  GrayImage out = augment(img, p, 1);
  CHECK(out.at(0, 0) == doctest::Approx(0.9f));
  CHECK(out.at(1, 1) == doctest::Approx(0.1f));
  CHECK(out.at(2, 2) == doctest::Approx(0.5f));
}

TEST_CASE("elastic deformation with zero alpha is the identity") {
  auto [img, label] = generate_patch(11, Preset::clean);
  AugmentParams p = identity_params();
  p.elastic_alpha = 0.0;
  p.elastic_sigma = 4.0;
  CHECK(augment(img, p, 33).v == img.v);
}

TEST_CASE("sample_augment_params stays in the documented ranges") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    AugmentParams p = sample_augment_params(Preset::hard, rng);
    CHECK(p.blur_sigma >= 0.0);
    CHECK(p.noise_sigma >= 0.0);
    CHECK(p.contrast_scale > 0.0);
    CHECK(p.elastic_sigma > 0.0);
  }
}

TEST_CASE("generate_frame empty and single-tag cases") {
  FrameScene empty = generate_frame(3, 0, 256, 256, Preset::clean);
  CHECK(empty.labels.empty());
  CHECK(empty.image.h == 256);
  CHECK(empty.image.w == 256);

  FrameScene one = generate_frame(4, 1, 256, 256, Preset::clean);
  REQUIRE(one.labels.size() == 1);
  const TagPose& pose = one.labels[0].pose;
  CHECK(pose.center_x >= 0);
  CHECK(pose.center_x < 256);
  CHECK(pose.center_y >= 0);
  CHECK(pose.center_y < 256);

  FrameScene again = generate_frame(4, 1, 256, 256, Preset::clean);
  CHECK(again.image.v == one.image.v);
  CHECK(again.labels[0].id.value == one.labels[0].id.value);
}

TEST_CASE("generate_frame keeps tags separated") {
  FrameScene scene = generate_frame(9, 20, 1024, 1024, Preset::moderate);
  REQUIRE(scene.labels.size() == 20);
  double min_sep = std::max(128.0, 1.2 * 2.0 * TagGeometry{}.outer_radius_px);
  for (size_t i = 0; i < scene.labels.size(); ++i)
    for (size_t j = i + 1; j < scene.labels.size(); ++j) {
      double dx = scene.labels[i].pose.center_x - scene.labels[j].pose.center_x;
      double dy = scene.labels[i].pose.center_y - scene.labels[j].pose.center_y;
      CHECK(std::hypot(dx, dy) >= min_sep);
    }
  for (const auto& l : scene.labels) CHECK(l.bits == encode_id(l.id));
}

TEST_CASE("generate_frame rejects infeasible packings") {
  CHECK_THROWS_AS(generate_frame(1, 500, 256, 256, Preset::clean), std::runtime_error);
  CHECK_THROWS_AS(generate_frame(1, 1, 64, 64, Preset::clean), std::invalid_argument);
  CHECK_THROWS_AS(generate_frame(1, -1, 256, 256, Preset::clean), std::invalid_argument);
}

TEST_CASE("sidecar files round-trip labels") {
  namespace fs = std::filesystem;
  FrameScene scene = generate_frame(21, 5, 512, 512, Preset::moderate);
  fs::path dir = fs::temp_directory_path() / "beetag_synthgen_test";
  fs::create_directories(dir);
  std::string path = (dir / "labels.txt").string();
  write_sidecar(scene.labels, path);
  std::vector<TagLabel> back = read_sidecar(path);
  REQUIRE(back.size() == scene.labels.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id.value == scene.labels[i].id.value);
    CHECK(back[i].bits == scene.labels[i].bits);
    CHECK(std::abs(back[i].pose.center_x - scene.labels[i].pose.center_x) < 1e-5);
    CHECK(std::abs(back[i].pose.center_y - scene.labels[i].pose.center_y) < 1e-5);
    CHECK(std::abs(back[i].pose.z_rot - scene.labels[i].pose.z_rot) < 1e-5);
    CHECK(std::abs(back[i].pose.y_rot - scene.labels[i].pose.y_rot) < 1e-5);
    CHECK(std::abs(back[i].pose.x_rot - scene.labels[i].pose.x_rot) < 1e-5);
  }
  CHECK_THROWS(read_sidecar((dir / "missing.txt").string()));
  fs::remove_all(dir);
}

TEST_CASE("presets order difficulty") {
  // hard draws noise/blur from wider ranges than clean; check the expected
  // upper bounds hold over many draws
  Rng rng(23);
  double clean_max_noise = 0.0, hard_max_noise = 0.0;
  for (int i = 0; i < 200; ++i) {
    clean_max_noise = std::max(clean_max_noise, sample_augment_params(Preset::clean, rng).noise_sigma);
    hard_max_noise = std::max(hard_max_noise, sample_augment_params(Preset::hard, rng).noise_sigma);
  }
  CHECK(clean_max_noise < hard_max_noise);
}
