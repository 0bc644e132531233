#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "beetag/imgproc.hpp"
#include "beetag/rng.hpp"
#include "support/oracles.hpp"

using namespace beetag;

namespace {

GrayImage random_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  GrayImage img(h, w);
  for (auto& v : img.v) v = float(rng.uniform());
  return img;
}

bool images_equal(const GrayImage& a, const GrayImage& b) {
  return a.h == b.h && a.w == b.w && a.v == b.v;
}

float max_abs_diff(const GrayImage& a, const GrayImage& b) {
  REQUIRE(a.h == b.h);
  REQUIRE(a.w == b.w);
  float m = 0.f;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

}  // namespace

TEST_CASE("max_filter equals the brute-force window max") {
  for (int radius : {1, 2, 3}) {
    GrayImage img = random_image(16, 16, 100 + radius);
    CHECK(images_equal(max_filter(img, radius), oracles::window_max(img, radius)));
  }
  GrayImage odd = random_image(23, 17, 7);
  CHECK(images_equal(max_filter(odd, 2), oracles::window_max(odd, 2)));
}

TEST_CASE("max_filter impulse and constant behavior") {
  GrayImage flat(8, 8, 0.3f);
  CHECK(images_equal(max_filter(flat, 2), flat));

  GrayImage impulse(9, 9, 0.f);
  impulse.at(4, 4) = 1.f;
  GrayImage m = max_filter(impulse, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      float expect = (std::abs(y - 4) <= 1 && std::abs(x - 4) <= 1) ? 1.f : 0.f;
      CHECK(m.at(y, x) == expect);
    }

  GrayImage img = random_image(12, 12, 3);
  GrayImage mx = max_filter(img, 2);
  for (size_t i = 0; i < img.v.size(); ++i) CHECK(mx.v[i] >= img.v[i]);

  CHECK_THROWS_AS(max_filter(img, 0), std::invalid_argument);
}

TEST_CASE("morphology equals the brute-force oracles") {
  GrayImage img = random_image(15, 19, 42);
  for (int radius : {1, 2}) {
    CHECK(images_equal(morph_erode(img, radius), oracles::window_min(img, radius)));
    CHECK(images_equal(morph_dilate(img, radius), oracles::window_max(img, radius)));
    CHECK(images_equal(morph_open(img, radius),
                       oracles::window_max(oracles::window_min(img, radius), radius)));
    CHECK(images_equal(morph_close(img, radius),
                       oracles::window_min(oracles::window_max(img, radius), radius)));
  }
}

TEST_CASE("morphology properties: idempotence, anti-extensivity, duality") {
  GrayImage img = random_image(20, 20, 9);
  GrayImage opened = morph_open(img, 1);
  CHECK(images_equal(morph_open(opened, 1), opened));
  for (size_t i = 0; i < img.v.size(); ++i) CHECK(opened.v[i] <= img.v[i]);

  GrayImage closed = morph_close(img, 1);
  for (size_t i = 0; i < img.v.size(); ++i) CHECK(closed.v[i] >= img.v[i]);

  GrayImage neg = img;
  for (auto& v : neg.v) v = -v;
  GrayImage open_neg = morph_open(neg, 1);
  for (size_t i = 0; i < img.v.size(); ++i) CHECK(open_neg.v[i] == -closed.v[i]);

  GrayImage flat(6, 6, 0.7f);
  CHECK(images_equal(morph_open(flat, 2), flat));
}

TEST_CASE("clahe with one unclipped tile equals plain histogram equalization") {
  GrayImage img = random_image(32, 32, 11);
  GrayImage got = clahe(img, 1, 1, 1e9);
  GrayImage want = oracles::hist_equalize(img);
  CHECK(max_abs_diff(got, want) < 1e-6f);

  GrayImage skewed(24, 24);
  Rng rng(5);
  for (auto& v : skewed.v) v = float(rng.uniform() * rng.uniform());  // dark-heavy
  CHECK(max_abs_diff(clahe(skewed, 1, 1, 1e9), oracles::hist_equalize(skewed)) < 1e-6f);
}

TEST_CASE("clahe degenerate and range behavior") {
  GrayImage flat(16, 16, 0.42f);
  GrayImage eq = clahe(flat, 1, 1, 1e9);
  for (float v : eq.v) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));

  GrayImage eq_clipped = clahe(flat, 4, 4, 2.0);
  for (float v : eq_clipped.v) CHECK(v == eq_clipped.v[0]);

  GrayImage img = random_image(40, 33, 13);
  GrayImage out = clahe(img, 8, 8, 2.0);
  for (float v : out.v) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
  CHECK(images_equal(out, clahe(img, 8, 8, 2.0)));  // deterministic

  CHECK_THROWS_AS(clahe(GrayImage(4, 4, 0.f), 8, 8, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(clahe(img, 0, 4, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(clahe(img, 4, 4, 0.5), std::invalid_argument);
}

TEST_CASE("resize_bilinear identity, constants and a hand-computed case") {
  GrayImage img = random_image(10, 14, 21);
  CHECK(images_equal(resize_bilinear(img, 10, 14), img));

  GrayImage flat(5, 5, 0.6f);
  GrayImage up = resize_bilinear(flat, 11, 7);
  for (float v : up.v) CHECK(v == doctest::Approx(0.6f));

  GrayImage two(2, 2);
  two.at(0, 0) = 0.f;
  two.at(0, 1) = 1.f;
  two.at(1, 0) = 0.f;
  two.at(1, 1) = 1.f;
  GrayImage wide = resize_bilinear(two, 2, 3);
  CHECK(wide.at(0, 0) == doctest::Approx(0.f));
  CHECK(wide.at(0, 1) == doctest::Approx(0.5f));
  CHECK(wide.at(0, 2) == doctest::Approx(1.f));

  GrayImage big = resize_bilinear(img, 23, 31);
  float lo = *std::min_element(img.v.begin(), img.v.end());
  float hi = *std::max_element(img.v.begin(), img.v.end());
  for (float v : big.v) {
    CHECK(v >= lo - 1e-6f);
    CHECK(v <= hi + 1e-6f);
  }
}

TEST_CASE("downsample4 averages the central 2x2 of each 4x4 block") {
  GrayImage img = random_image(9, 13, 77);  // trailing rows/cols dropped
  GrayImage small = downsample4(img);
  CHECK(small.h == 2);
  CHECK(small.w == 3);
  for (int y = 0; y < small.h; ++y)
    for (int x = 0; x < small.w; ++x) {
      float want = (img.at(4 * y + 1, 4 * x + 1) + img.at(4 * y + 1, 4 * x + 2) +
                    img.at(4 * y + 2, 4 * x + 1) + img.at(4 * y + 2, 4 * x + 2)) /
                   4.f;
      CHECK(small.at(y, x) == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("gaussian_blur basics") {
  GrayImage img = random_image(12, 12, 31);
  CHECK(images_equal(gaussian_blur(img, 0.0), img));
  CHECK(images_equal(gaussian_blur(img, -1.0), img));

  GrayImage flat(16, 16, 0.25f);
  GrayImage b = gaussian_blur(flat, 1.5);
  for (float v : b.v) CHECK(v == doctest::Approx(0.25f).epsilon(1e-6));

  GrayImage impulse(21, 21, 0.f);
  impulse.at(10, 10) = 1.f;
  GrayImage r = gaussian_blur(impulse, 1.0);
  double sum = 0.0;
  for (float v : r.v) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));          // normalized kernel
  CHECK(r.at(10, 12) == doctest::Approx(r.at(12, 10)));      // symmetric
  CHECK(r.at(9, 10) == doctest::Approx(r.at(11, 10)));
  CHECK(r.at(10, 10) > r.at(10, 11));
}

TEST_CASE("pgm round-trip and error handling") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "beetag_imgproc_test";
  fs::create_directories(dir);

  GrayImage img = random_image(17, 23, 3);
  std::string path = (dir / "rt.pgm").string();
  write_pgm(img, path);
  GrayImage back = read_pgm(path);
  REQUIRE(back.h == img.h);
  REQUIRE(back.w == img.w);
  for (size_t i = 0; i < img.v.size(); ++i)
    CHECK(std::abs(back.v[i] - img.v[i]) <= 0.5f / 255.f + 1e-6f);

  // a second write of the read-back image is a fixed point
  std::string path2 = (dir / "rt2.pgm").string();
  write_pgm(back, path2);
  CHECK(images_equal(read_pgm(path2), back));

  std::string bad = (dir / "bad.pgm").string();
  {
    FILE* f = fopen(bad.c_str(), "wb");
    fputs("P6\n2 2\n255\n....", f);
    fclose(f);
  }
  CHECK_THROWS(read_pgm(bad));

  std::string trunc = (dir / "trunc.pgm").string();
  {
    FILE* f = fopen(trunc.c_str(), "wb");
    fputs("P5\n4 4\n255\nab", f);
    fclose(f);
  }
  CHECK_THROWS(read_pgm(trunc));
  CHECK_THROWS(read_pgm((dir / "missing.pgm").string()));

  fs::remove_all(dir);
}
