#include <doctest.h>

#include "helpers.hpp"
#include "micro.hpp"
#include "nsarm/inference.hpp"
#include "nsarm/residual_codec.hpp"

using namespace nsarm;

TEST_CASE("sample_bits") {
  Tensor z({1, 1, 4}, std::vector<float>{-2.0f, 0.0f, 0.5f, -1e-3f});
  Rng rng(1);
  CHECK(sample_bits(z, {}, rng).bits == std::vector<std::uint8_t>{0, 1, 1, 0});
  // tiny temperature reproduces greedy bits away from zero
  Tensor y({1, 1, 3}, std::vector<float>{-0.3f, 0.2f, 4.0f});
  SamplingCfg cold{.mode = SamplingMode::stochastic, .temperature = 1e-4, .seed = 0};
  for (int i = 0; i < 20; ++i) CHECK(sample_bits(y, cold, rng).bits == sample_bits(y, {}, rng).bits);
  CHECK_THROWS(sample_bits(y, {.mode = SamplingMode::stochastic, .temperature = 0.0}, rng));
  CHECK_THROWS(sample_bits(Tensor({3}), {}, rng));
}

TEST_CASE("stochastic sampling follows the sigmoid") {
  Tensor z({1, 1, 1}, std::vector<float>{1.0f});
  Rng rng(2);
  SamplingCfg cfg{.mode = SamplingMode::stochastic, .temperature = 2.0};
  int ones = 0;
  for (int i = 0; i < 20000; ++i) ones += sample_bits(z, cfg, rng).bits[0];
  CHECK(ones / 20000.0 == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(0.02));
}

TEST_CASE("super_resolve contract") {
  const auto data = testing::micro_pairs(2);
  Nsarm m(testing::micro_config(), 3);
  const Generation a = super_resolve(m, data[0].lr, {});
  CHECK(a.image.shape() == Shape{8, 8, 3});
  CHECK(a.residuals.size() == 3);
  for (float v : a.image.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(super_resolve(m, data[0].lr, {}).image == a.image);
  SamplingCfg s{.mode = SamplingMode::stochastic, .temperature = 1.0, .seed = 4};
  CHECK(super_resolve(m, data[0].lr, s).image == super_resolve(m, data[0].lr, s).image);
  CHECK_THROWS(super_resolve(m, Tensor({8, 8, 3}), {}));

  // the splice is T's quantized output and the rest comes from the shared continuation
  const auto prefix = preliminary_residuals(m.tnet, data[0].lr);
  CHECK(prefix.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) CHECK(a.residuals[k] == prefix[k]);
  Rng rng(0);
  CHECK(continue_generation(m.ar, prefix, {}, rng) == a.residuals);
}

TEST_CASE("desk preset output shape") {
  const ModelConfig cfg = default_model_config(64);
  Nsarm m(cfg, 1);
  Rng rng(5);
  CHECK(super_resolve(m, testing::random_image(16, 16, rng), {}).image.shape() == Shape{64, 64, 3});
}

TEST_CASE("predict_scale checks its prefix") {
  Nsarm m(testing::micro_config(), 6);
  Rng rng(1);
  CHECK_THROWS(predict_scale(m.ar, {}, 2, {}, rng));
  CHECK_THROWS(predict_scale(m.ar, {}, 0, {}, rng));
  CHECK_THROWS(predict_scale(m.ar, {}, 4, {}, rng));
  const auto bits = predict_scale(m.ar, {}, 1, {}, rng);
  CHECK(bits.h == 1);
  CHECK(bits.d == 4);
}

TEST_CASE("pathway replacement") {
  const auto data = testing::micro_pairs(2);
  Nsarm m(testing::micro_config(), 7);
  const ScaleSchedule& s = m.config.schedule;
  const Generation full = pathway_replace_generate(m, data[0].gt, s.size(), {});
  CHECK(full.image == reconstruct(m.tokenizer, data[0].gt, s));
  const ResidualQueue q = decompose(encode_image(m.tokenizer, data[0].gt), s, bsq_quantizer());
  const Generation one = pathway_replace_generate(m, data[0].gt, 1, {});
  CHECK(one.residuals[0] == q.residuals[0]);
  CHECK(pathway_replace_generate(m, data[0].gt, 0, {}).image == pathway_replace_generate(m, data[1].gt, 0, {}).image);
  CHECK_THROWS_AS(pathway_replace_generate(m, data[0].gt, s.size() + 1, {}), std::out_of_range);
}
