#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nsarm/degradation.hpp"
#include "nsarm/evaluation.hpp"
#include "nsarm/resample.hpp"

using namespace nsarm;

TEST_CASE("zero-strength degradation is a plain area downsample") {
  Rng rng(1);
  const Tensor gt = testing::random_image(16, 12, rng);
  DegradationCfg cfg{.blur_sigma = {0, 0}, .noise_std = {0, 0}, .scale_factor = 4, .second_order = false};
  Rng r(5);
  const Tensor lr = degrade(gt, cfg, r);
  CHECK(lr.shape() == Shape{4, 3, 3});
  CHECK(max_abs_diff(lr, resize_down(gt, {4, 3})) < 1e-7);
}

TEST_CASE("degraded images stay in range and are reproducible") {
  const auto gts = make_toy_dataset(6, 32, Rng(2));
  for (const char* name : {"mild", "medium", "severe"}) {
    const auto a = make_pairs(gts, degradation_preset(name), 3);
    const auto b = make_pairs(gts, degradation_preset(name), 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].lr == b[i].lr);
      CHECK(a[i].lr.shape() == Shape{8, 8, 3});
      for (float v : a[i].lr.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
  CHECK(!(make_pairs(gts, degradation_preset("severe"), 3)[0].lr ==
          make_pairs(gts, degradation_preset("severe"), 4)[0].lr));
}

TEST_CASE("degradation config validation") {
  CHECK_THROWS(degradation_preset("extreme"));
  CHECK_THROWS(validate(DegradationCfg{.blur_sigma = {2, 1}}));
  CHECK_THROWS(validate(DegradationCfg{.noise_std = {-0.1, 0.1}}));
  CHECK_THROWS(validate(DegradationCfg{.scale_factor = 0}));
  Rng rng(1);
  CHECK_THROWS_AS(degrade(Tensor({10, 8, 3}), DegradationCfg{}, rng), ShapeError);
}

TEST_CASE("gaussian blur") {
  Rng rng(3);
  const Tensor img = testing::random_image(9, 9, rng);
  CHECK(gaussian_blur(img, 0.0) == img);
  const Tensor flat({7, 7, 3}, 0.4f);
  const Tensor blurred = gaussian_blur(flat, 1.5);
  for (float v : blurred.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
  // an interior impulse spreads into a normalised, symmetric kernel
  Tensor impulse({15, 15, 1});
  impulse.at(7, 7, 0) = 1.0f;
  const Tensor k = gaussian_blur(impulse, 1.0);
  CHECK(sum(k) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(k.at(7, 6, 0) == doctest::Approx(k.at(7, 8, 0)));
  CHECK(k.at(6, 7, 0) == doctest::Approx(k.at(7, 6, 0)));
  const double ratio = k.at(7, 8, 0) / k.at(7, 7, 0);
  CHECK(ratio == doctest::Approx(std::exp(-0.5)).epsilon(1e-4));
  CHECK_THROWS(gaussian_blur(img, -1.0));
}

TEST_CASE("toy dataset") {
  CHECK_THROWS(make_toy_dataset(0, 64, Rng(1)));
  const auto a = make_toy_dataset(5, 64, Rng(1));
  const auto b = make_toy_dataset(5, 64, Rng(1));
  const auto c = make_toy_dataset(8, 64, Rng(1));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i] == c[i]);
    CHECK(a[i].shape() == Shape{64, 64, 3});
    for (float v : a[i].data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  CHECK(!(a[0] == a[1]));
  CHECK(!(make_toy_dataset(1, 64, Rng(2))[0] == a[0]));
}

TEST_CASE("nearest-neighbour upsampling") {
  Tensor x({1, 2, 1}, std::vector<float>{0.1f, 0.9f});
  const Tensor up = upsample_nearest(x, 2);
  CHECK(up.storage() == std::vector<float>{0.1f, 0.1f, 0.9f, 0.9f, 0.1f, 0.1f, 0.9f, 0.9f});
  CHECK_THROWS(upsample_nearest(x, 0));
}
