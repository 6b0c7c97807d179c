#include <doctest.h>

#include "helpers.hpp"
#include "nsarm/resample.hpp"
#include "nsarm/residual_codec.hpp"

using namespace nsarm;

namespace {
ScaleSchedule tiny(std::size_t d) {
  ScaleSchedule s;
  s.scales = {{1, 1}, {2, 2}, {4, 4}};
  s.k_t = 2;
  s.latent_dim = d;
  return s;
}

// Step-by-step reconstruction: F_k = F_{k-1} + up(R_k) with
// R_k = down(f - F_{k-1}), computed by explicit loops over cells.
Tensor brute_force_reconstruction(const Tensor& f, const ScaleSchedule& s) {
  const Extent full = s.last();
  Tensor acc(f.shape());
  for (std::size_t k = 1; k <= s.size(); ++k) {
    Tensor diff = sub(f, acc);
    Tensor r = resize_down(diff, s.scale(k));
    Tensor up = resize_up(r, full);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += up[i];
  }
  return acc;
}
}  // namespace

TEST_CASE("single-scale decomposition keeps the latent") {
  Rng rng(1);
  ScaleSchedule s;
  s.scales = {{3, 5}};
  s.latent_dim = 2;
  Tensor f = testing::random_tensor({3, 5, 2}, rng);
  const ResidualQueue q = decompose(f, s, identity_quantizer());
  REQUIRE(q.residuals.size() == 1);
  CHECK(q.residuals[0] == f);
  CHECK(q.inputs.empty());
  CHECK(accumulate(q, 1) == f);
}

TEST_CASE("zero latent gives zero residuals") {
  const ScaleSchedule s = tiny(3);
  const ResidualQueue q = decompose(Tensor({4, 4, 3}), s, identity_quantizer());
  for (const auto& r : q.residuals)
    for (float v : r.data()) CHECK(v == 0.0f);
  std::vector<Tensor> zeros{Tensor({1, 1, 3}), Tensor({2, 2, 3})};
  const ResidualQueue c = cascaded_modify(Tensor({4, 4, 3}), s, zeros, identity_quantizer());
  for (const auto& r : c.residuals)
    for (float v : r.data()) CHECK(v == 0.0f);
}

TEST_CASE("identity decomposition matches the brute-force reconstruction") {
  Rng rng(2);
  const ScaleSchedule s = tiny(2);
  Tensor f = testing::random_tensor({4, 4, 2}, rng);
  const ResidualQueue q = decompose(f, s, identity_quantizer());
  const Tensor oracle = brute_force_reconstruction(f, s);
  CHECK(max_abs_diff(accumulate(q, 3), oracle) < 1e-6);
  CHECK(max_abs_diff(accumulate(q, 3), f) < 1e-5);
}

TEST_CASE("losslessness over random schedules") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const std::size_t h = 1 + rng.below(16), w = 1 + rng.below(16), d = 1 + rng.below(16);
    const ScaleSchedule s = testing::random_schedule(h, w, d, rng);
    Tensor f = testing::random_tensor({h, w, d}, rng);
    CHECK(max_abs_diff(accumulate(decompose(f, s, identity_quantizer()), s.size()), f) < 1e-5);
  }
}

TEST_CASE("accumulate partial sums") {
  Rng rng(4);
  const ScaleSchedule s = tiny(2);
  const ResidualQueue q = decompose(testing::random_tensor({4, 4, 2}, rng), s, bsq_quantizer());
  const Tensor f0 = accumulate(q, 0);
  for (float v : f0.data()) CHECK(v == 0.0f);
  for (std::size_t k = 1; k <= 3; ++k) {
    const Tensor expect = add(accumulate(q, k - 1), resize_up(q.residuals[k - 1], s.last()));
    CHECK(max_abs_diff(accumulate(q, k), expect) < 1e-6);
  }
  CHECK_THROWS_AS(accumulate(q, 4), std::out_of_range);
}

TEST_CASE("queue inputs are the downsampled partial sums") {
  Rng rng(5);
  const ScaleSchedule s = tiny(2);
  const ResidualQueue q = decompose(testing::random_tensor({4, 4, 2}, rng), s, bsq_quantizer());
  REQUIRE(q.inputs.size() == 2);
  for (std::size_t k = 1; k < 3; ++k) CHECK(q.inputs[k - 1] == resize_down(accumulate(q, k), s.scale(k + 1)));
  CHECK(accumulated_inputs(q.residuals, s) == q.inputs);
}

TEST_CASE("BSQ reconstruction error falls across scales on average") {
  Rng rng(6);
  const ScaleSchedule s = infinity_default_schedule(64);
  std::vector<double> err(s.size() + 1, 0.0);
  for (int t = 0; t < 100; ++t) {
    const Tensor f = testing::random_latent(16, 16, rng);
    const ResidualQueue q = decompose(f, s, bsq_quantizer());
    for (std::size_t k = 0; k <= s.size(); ++k) err[k] += l2_norm(sub(accumulate(q, k), f));
  }
  for (std::size_t k = 1; k <= s.size(); ++k) CHECK(err[k] <= err[k - 1]);
}

TEST_CASE("cascaded_modify with GT residuals reproduces decompose") {
  Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    const ScaleSchedule s = testing::random_schedule(1 + rng.below(12), 1 + rng.below(12), 4, rng);
    Tensor f = testing::random_tensor({s.last().h, s.last().w, 4}, rng);
    const ResidualQueue gt = decompose(f, s, bsq_quantizer());
    std::vector<Tensor> prefix(gt.residuals.begin(), gt.residuals.begin() + s.k_t);
    CHECK(cascaded_modify(f, s, prefix, bsq_quantizer()) == gt);
  }
}

TEST_CASE("cascaded_modify keeps the splice and retargets the rest") {
  Rng rng(8);
  const ScaleSchedule s = tiny(4);
  Tensor f = testing::random_tensor({4, 4, 4}, rng);
  std::vector<Tensor> prime{bsq::quantize_values(testing::random_tensor({1, 1, 4}, rng)),
                            bsq::quantize_values(testing::random_tensor({2, 2, 4}, rng))};
  const ResidualQueue q = cascaded_modify(f, s, prime, identity_quantizer());
  CHECK(q.residuals[0] == prime[0]);
  CHECK(q.residuals[1] == prime[1]);
  // with identity Q the final scale closes the gap exactly
  CHECK(max_abs_diff(accumulate(q, 3), f) < 1e-5);

  CHECK_THROWS_AS(cascaded_modify(f, s, {prime[0]}, identity_quantizer()), ShapeError);
  CHECK_THROWS_AS(cascaded_modify(f, s, {prime[1], prime[0]}, identity_quantizer()), ShapeError);
}

TEST_CASE("decompose rejects mismatched latents and is deterministic") {
  const ScaleSchedule s = tiny(2);
  CHECK_THROWS_AS(decompose(Tensor({4, 4, 3}), s, identity_quantizer()), ShapeError);
  CHECK_THROWS_AS(decompose(Tensor({5, 4, 2}), s, identity_quantizer()), ShapeError);
  Rng rng(9);
  Tensor f = testing::random_tensor({4, 4, 2}, rng);
  CHECK(decompose(f, s, bsq_quantizer()) == decompose(f, s, bsq_quantizer()));
}

TEST_CASE("token stream round trip") {
  Rng rng(10);
  const ScaleSchedule s = tiny(5);
  const ResidualQueue q = decompose(testing::random_tensor({4, 4, 5}, rng), s, bsq_quantizer());
  const auto maps = labels(q);
  auto bytes = encode_token_stream(maps);
  CHECK(bytes[0] == 'N');
  CHECK(decode_token_stream(bytes) == maps);
  bytes.push_back(0);
  CHECK_THROWS(decode_token_stream(bytes));
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS(decode_token_stream(bytes));
}
