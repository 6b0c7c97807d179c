#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nsarm/ar_model.hpp"
#include "nsarm/autoencoder.hpp"
#include "nsarm/grad_check.hpp"
#include "nsarm/trainer.hpp"
#include "nsarm/transform_net.hpp"

using namespace nsarm;
namespace ag = nsarm::ag;
using TD = BasicTensor<double>;

namespace {
ScaleSchedule tiny(std::size_t d = 4) {
  ScaleSchedule s;
  s.scales = {{1, 1}, {2, 2}, {4, 4}};
  s.k_t = 1;
  s.latent_dim = d;
  s.pixel_factor = 2;
  return s;
}

AutoencoderConfig small_ae(std::size_t factor, std::size_t d) {
  AutoencoderConfig c;
  c.downsample_factor = factor;
  c.latent_dim = d;
  c.base_channels = 4;
  c.latent_channels = 6;
  return c;
}

ArModelConfig small_ar() { return {.model_dim = 16, .layers = 2, .heads = 2, .mlp_ratio = 2}; }

std::vector<Var<float>> batch_inputs(const std::vector<Tensor>& inputs) {
  std::vector<Var<float>> out;
  for (const auto& t : inputs) {
    Shape s{1};
    s.insert(s.end(), t.shape().begin(), t.shape().end());
    out.push_back(constant(t.reshaped(s)));
  }
  return out;
}
}  // namespace

TEST_CASE("autoencoder shapes and range") {
  Rng rng(1);
  AutoencoderConfig cfg;
  Autoencoder<float> ae(cfg, rng);
  Tensor img = testing::random_image(64, 64, rng);
  const Tensor lat = encode_image(ae, img);
  CHECK(lat.shape() == Shape{16, 16, 16});
  const Tensor out = decode_latent(ae, testing::random_tensor({16, 16, 16}, rng, 10.0));
  CHECK(out.shape() == Shape{64, 64, 3});
  for (float v : out.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(encode_image(ae, img) == lat);
  CHECK_THROWS_AS(encode_image(ae, testing::random_image(62, 64, rng)), ShapeError);
  CHECK_THROWS_AS(decode_latent(ae, Tensor({16, 16, 8})), ShapeError);
  for (std::size_t f : {2, 8, 16}) {
    Autoencoder<float> a(small_ae(f, 4), rng);
    CHECK(encode_image(a, testing::random_image(32, 48, rng)).shape() == Shape{32 / f, 48 / f, 4});
  }
  CHECK_THROWS(Autoencoder<float>(small_ae(3, 4), rng));
}

TEST_CASE("encoder and decoder pass grad_check on an 8x8 input") {
  Rng rng(2);
  Autoencoder<double> ae(small_ae(2, 3), rng);
  const TD img = testing::random_image(8, 8, rng).reshaped({1, 8, 8, 3}).cast<double>();
  const TD proj = testing::random_tensor({1, 4, 4, 3}, rng).cast<double>();
  CHECK(grad_check<double>([&](const Var<double>& x) { return ag::sum(ag::mul(ae.encode(x), constant(proj))); },
                           img) < 1e-3);
  auto loss = [&] { return ag::mse(ae.decode(ae.encode(constant(img))), constant(img)); };
  CHECK(grad_check_params<double>(ae.params(), loss, {.max_coords = 300}) < 1e-3);
}

TEST_CASE("tokenizer objective gradient with a smooth quantizer") {
  Rng rng(3);
  Autoencoder<double> ae(small_ae(2, 4), rng);
  const TD imgs = testing::random_image(8, 8, rng).reshaped({1, 8, 8, 3}).cast<double>();
  const ScaleSchedule s = tiny(4);
  auto loss = [&] { return tokenizer_objective(ae, imgs, s, 0.25, identity_quantizer()); };
  // The decomposition runs in float, so the quantized latent carries float rounding.
  CHECK(grad_check_params<double>(ae.params(), loss, {.eps = 1e-3, .floor = 1e-3, .max_coords = 300}) < 1e-3);
  double recon = -1;
  tokenizer_objective(ae, imgs, s, 0.25, bsq_quantizer(), &recon);
  CHECK(recon > 0.0);
}

TEST_CASE("bitwise CE") {
  const std::vector<TD> labels{TD({1, 2, 2, 3}, std::vector<double>{1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0, 0})};
  const double zero = bitwise_ce_loss<double>({constant(TD({1, 2, 2, 3}))}, labels).value().item();
  CHECK(std::abs(zero - std::log(2.0)) < 1e-6);

  TD confident({1, 2, 2, 3});
  for (std::size_t i = 0; i < 12; ++i) confident[i] = labels[0][i] > 0.5 ? 40.0 : -40.0;
  const double perfect = bitwise_ce_loss<double>({constant(confident)}, labels).value().item();
  CHECK(perfect >= 0.0);
  CHECK(perfect < 1e-12);

  // per-scale means are averaged with equal weight
  const std::vector<TD> two{TD({1, 1, 1, 2}, 1.0), TD({1, 2, 2, 2}, 0.0)};
  TD l1({1, 1, 1, 2}, 2.0);
  const double got = bitwise_ce_loss<double>({constant(l1), constant(TD({1, 2, 2, 2}))}, two).value().item();
  const double expect = 0.5 * (std::log1p(std::exp(-2.0)) + std::log(2.0));
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));

  Rng rng(4);
  const TD z = testing::random_tensor({1, 2, 2, 3}, rng, 3.0).cast<double>();
  CHECK(grad_check<double>([&](const Var<double>& x) { return bitwise_ce_loss<double>({x}, labels); }, z) < 1e-3);
  CHECK_THROWS_AS(bitwise_ce_loss<double>({}, {}), ShapeError);
}

TEST_CASE("IVC head grows linearly in d") {
  Rng rng(5);
  for (std::size_t d : {8, 16, 32}) {
    ArModel<float> ar(tiny(d), small_ar(), rng);
    CHECK(ar.head_parameter_count() == d * 16 + d);
  }
}

TEST_CASE("ar forward shapes and sequence length") {
  Rng rng(6);
  const ScaleSchedule s = tiny(4);
  ArModel<float> ar(s, small_ar(), rng);
  std::vector<Tensor> inputs{testing::random_tensor({2, 2, 4}, rng), testing::random_tensor({4, 4, 4}, rng)};
  const auto logits = ar.forward(batch_inputs(inputs), 2, 1);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0].shape() == Shape{1, 2, 2, 4});
  CHECK(logits[1].shape() == Shape{1, 4, 4, 4});
  CHECK(ar.sequence_length(3) == 21);
  CHECK(ar.forward({}, 1, 3)[0].shape() == Shape{3, 1, 1, 4});
  CHECK_THROWS_AS(ar.forward(batch_inputs(inputs), 0, 1), ShapeError);
  CHECK_THROWS_AS(ar.forward(batch_inputs({inputs[1], inputs[0]}), 1, 1), ShapeError);
}

TEST_CASE("scale-k logits ignore inputs beyond the attended prefix") {
  Rng rng(7);
  const ScaleSchedule s = tiny(4);
  ArModel<float> ar(s, small_ar(), rng);
  std::vector<Tensor> inputs{testing::random_tensor({2, 2, 4}, rng), testing::random_tensor({4, 4, 4}, rng)};
  const auto a = ar.forward(batch_inputs(inputs), 1, 1);
  inputs[1] = testing::random_tensor({4, 4, 4}, rng);
  const auto b = ar.forward(batch_inputs(inputs), 1, 1);
  CHECK(a[0].value() == b[0].value());
  CHECK(a[1].value() == b[1].value());
  CHECK(!(a[2].value() == b[2].value()));
}

TEST_CASE("untrained model is near chance on random labels") {
  Rng rng(8);
  const ScaleSchedule s = infinity_default_schedule(64);
  ArModel<float> ar(s, small_ar(), rng);
  std::vector<Tensor> inputs;
  for (std::size_t k = 2; k <= s.size(); ++k) inputs.push_back(testing::random_tensor({s.scale(k).h, s.scale(k).w, 16}, rng));
  const auto logits = ar.forward(batch_inputs(inputs), 1, 1);
  std::vector<Tensor> values, labels;
  for (const auto& l : logits) {
    values.push_back(l.value());
    Tensor y(l.shape());
    for (float& v : y.data()) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
    labels.push_back(y);
  }
  CHECK(std::abs(bit_accuracy(values, labels).value() - 0.5) < 0.05);
}

TEST_CASE("bit accuracy pools every bit") {
  std::vector<Tensor> logits{Tensor({1, 1, 2}, std::vector<float>{0.0f, -1.0f}),
                             Tensor({1, 1, 2}, std::vector<float>{2.0f, 3.0f})};
  std::vector<Tensor> labels{Tensor({1, 1, 2}, std::vector<float>{1, 1}), Tensor({1, 1, 2}, std::vector<float>{0, 1})};
  const BitAccuracy a = bit_accuracy(logits, labels);
  CHECK(a.correct == 2);
  CHECK(a.total == 4);
}

TEST_CASE("ar model gradient") {
  Rng rng(9);
  ScaleSchedule s;
  s.scales = {{1, 1}, {2, 2}};
  s.latent_dim = 2;
  ArModel<double> ar(s, {.model_dim = 4, .layers = 1, .heads = 2, .mlp_ratio = 2}, rng);
  const TD in = testing::random_tensor({1, 2, 2, 2}, rng).cast<double>();
  const std::vector<TD> labels{TD({1, 1, 1, 2}, std::vector<double>{1, 0}),
                               TD({1, 2, 2, 2}, std::vector<double>{1, 0, 0, 1, 1, 1, 0, 0})};
  auto loss = [&] { return bitwise_ce_loss(ar.forward({constant(in)}, 1, 1), labels); };
  CHECK(grad_check_params<double>(ar.params(), loss) < 1e-3);
}

TEST_CASE("transformation network shapes") {
  Rng rng(10);
  const ScaleSchedule s = infinity_default_schedule(64);
  TransformNet<float> t(s, {.channels = 8}, rng);
  const auto out = t.forward(constant(testing::random_image(16, 16, rng).reshaped({1, 16, 16, 3})));
  REQUIRE(out.size() == 3);
  CHECK(out[0].shape() == Shape{1, 1, 1, 16});
  CHECK(out[1].shape() == Shape{1, 2, 2, 16});
  CHECK(out[2].shape() == Shape{1, 4, 4, 16});
  CHECK_THROWS_AS(t.forward(constant(Tensor({1, 32, 32, 3}))), ShapeError);
}

TEST_CASE("stage-1 loss") {
  Rng rng(11);
  const std::vector<TD> gt{testing::random_tensor({1, 1, 1, 4}, rng).cast<double>(),
                           testing::random_tensor({1, 2, 2, 4}, rng).cast<double>()};
  CHECK(stage1_loss<double>({constant(gt[0]), constant(gt[1])}, gt).value().item() == 0.0);
  std::vector<Var<double>> shifted;
  for (const auto& g : gt) {
    TD x = g;
    for (double& v : x.data()) v += 0.3;
    shifted.push_back(constant(x));
  }
  CHECK(stage1_loss<double>(shifted, gt).value().item() == doctest::Approx(0.09).epsilon(1e-12));
  CHECK_THROWS_AS(stage1_loss<double>({constant(gt[0])}, gt), ShapeError);

  const TD p = testing::random_tensor({1, 2, 2, 4}, rng).cast<double>();
  CHECK(grad_check<double>([&](const Var<double>& x) { return stage1_loss<double>({constant(gt[0]), x}, gt); }, p) <
        1e-3);
}

TEST_CASE("transformation network gradient") {
  Rng rng(12);
  ScaleSchedule s;
  s.scales = {{1, 1}, {2, 2}, {4, 4}};
  s.k_t = 2;
  s.latent_dim = 2;
  s.pixel_factor = 2;
  TransformNet<double> t(s, {.channels = 3}, rng);
  const TD lr = testing::random_image(4, 4, rng).reshaped({1, 4, 4, 3}).cast<double>();
  const std::vector<TD> gt{testing::random_tensor({1, 1, 1, 2}, rng).cast<double>(),
                           testing::random_tensor({1, 2, 2, 2}, rng).cast<double>()};
  auto loss = [&] { return stage1_loss(t.forward(constant(lr)), gt); };
  CHECK(grad_check_params<double>(t.params(), loss) < 1e-3);
}

TEST_CASE("relaxed stage-2 objective passes grad_check on a 2-scale micro model") {
  Rng rng(13);
  ScaleSchedule s;
  s.scales = {{1, 1}, {2, 2}};
  s.k_t = 1;
  s.latent_dim = 2;
  s.pixel_factor = 2;
  TransformNet<double> t(s, {.channels = 2}, rng);
  ArModel<double> ar(s, {.model_dim = 4, .layers = 1, .heads = 1, .mlp_ratio = 1}, rng);
  const std::vector<Tensor> latents{testing::random_tensor({2, 2, 2}, rng)};
  const Tensor lr = testing::random_image(2, 2, rng).reshaped({1, 2, 2, 3});
  ParamSet<double> all;
  for (auto& [n, v] : t.params().items()) all.items().emplace_back(n, v);
  for (auto& [n, v] : ar.params().items()) all.items().emplace_back(n, v);
  auto loss = [&] { return stage2_objective(t, ar, latents, lr, true).loss; };
  CHECK(grad_check_params<double>(all, loss) < 1e-3);

  const Stage2Batch<double> b = stage2_objective(t, ar, latents, lr, false);
  REQUIRE(b.logits.size() == 1);
  CHECK(b.logits[0].shape() == Shape{1, 2, 2, 2});
}

TEST_CASE("model casts preserve parameters") {
  Rng rng(14);
  ArModel<float> ar(tiny(4), small_ar(), rng);
  ArModel<double> d = ar.cast<double>();
  CHECK(d.params().flatten().cast<float>() == ar.params().flatten());
}
