#include <doctest.h>

#include "helpers.hpp"
#include "nsarm/scale_schedule.hpp"

using namespace nsarm;

namespace {
ScaleSchedule tiny() {
  ScaleSchedule s;
  s.scales = {{1, 1}, {2, 2}, {4, 4}};
  s.k_t = 2;
  return s;
}
}  // namespace

TEST_CASE("1024 preset follows the published pixel sides") {
  const std::vector<std::size_t> sides{16, 32, 64, 96, 128, 192, 256, 320, 384, 512, 640, 768, 1024};
  CHECK(preset_pixel_sides(1024) == sides);
  const ScaleSchedule s = infinity_default_schedule(1024);
  REQUIRE(s.size() == 13);
  CHECK(s.k_t == 7);
  CHECK(s.preliminary().h * s.pixel_factor == 256);
  for (std::size_t k = 1; k <= 13; ++k) CHECK(s.scale(k).h * s.pixel_factor == sides[k - 1]);
  validate(s, s.last());
}

TEST_CASE("desk preset") {
  const ScaleSchedule s = infinity_default_schedule(64);
  std::vector<std::size_t> sides;
  for (const auto& e : s.scales) sides.push_back(e.h);
  CHECK(sides == std::vector<std::size_t>{1, 2, 4, 6, 8, 12, 16});
  CHECK(s.k_t == 3);
  CHECK(s.pixel_factor == 4);
  // the k_t-th scale is the latent of a 16x16 LR input
  validate_preliminary(s, {16 / 4, 16 / 4});
  CHECK_THROWS_AS(validate_preliminary(s, {6, 6}), ScheduleError);
  CHECK_THROWS_AS(infinity_default_schedule(100), ScheduleError);
}

TEST_CASE("validate") {
  validate(tiny(), {4, 4});
  ScaleSchedule dec;
  dec.scales = {{2, 2}, {1, 1}};
  CHECK_THROWS_AS(validate(dec, {1, 1}), ScheduleError);
  ScaleSchedule short_s;
  short_s.scales = {{1, 1}, {2, 2}};
  CHECK_THROWS_AS(validate(short_s, {4, 4}), ScheduleError);
  ScaleSchedule flat = tiny();
  flat.scales[1] = {1, 1};
  CHECK_THROWS_AS(validate(flat, {4, 4}), ScheduleError);
  ScaleSchedule kt = tiny();
  kt.k_t = 3;
  CHECK_THROWS_AS(validate(kt, {4, 4}), ScheduleError);
  kt.k_t = 0;
  CHECK_THROWS_AS(validate(kt, {4, 4}), ScheduleError);
  ScaleSchedule one;
  one.scales = {{4, 4}};
  validate(one, {4, 4});
}

TEST_CASE("token_count") {
  const ScaleSchedule s = tiny();
  CHECK(token_count(s, 1, 3) == 21);
  CHECK(token_count(s, 2, 3) == 20);
  for (std::size_t k = 1; k <= 3; ++k) CHECK(token_count(s, k, k) == s.scale(k).h * s.scale(k).w);
  CHECK_THROWS(token_count(s, 0, 2));
  CHECK_THROWS(token_count(s, 3, 2));
  CHECK_THROWS(token_count(s, 1, 4));
}

TEST_CASE("token_count is additive over disjoint ranges") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const ScaleSchedule s = testing::random_schedule(1 + rng.below(16), 1 + rng.below(16), 4, rng);
    validate(s, s.last());
    const std::size_t K = s.size();
    const std::size_t mid = 1 + rng.below(K - 1);
    CHECK(token_count(s, 1, K) == token_count(s, 1, mid) + token_count(s, mid + 1, K));
    CHECK(token_count(s, 1, K) > 0);
  }
}

TEST_CASE("proportional schedules for non-square latents") {
  const ScaleSchedule s = proportional_schedule(64, {8, 16});
  CHECK(s.last() == Extent{8, 16});
  validate(s, {8, 16});
  const ScaleSchedule square = proportional_schedule(64, {16, 16});
  CHECK(square.scales == infinity_default_schedule(64).scales);
  CHECK(square.k_t == 3);
}

TEST_CASE("schedule text round trip") {
  const ScaleSchedule s = infinity_default_schedule(64, 8);
  CHECK(to_string(s) == "1x1,2x2,4x4,6x6,8x8,12x12,16x16;k_t=3;d=8;factor=4");
  CHECK(parse_schedule(to_string(s)) == s);
  CHECK_THROWS_AS(parse_schedule("1x1,2y2;k_t=1"), ScheduleError);
  CHECK_THROWS_AS(parse_schedule("1x1,2x2;q=1"), ScheduleError);
  CHECK_THROWS_AS(parse_schedule("2x2,1x1;k_t=1"), ScheduleError);
}
