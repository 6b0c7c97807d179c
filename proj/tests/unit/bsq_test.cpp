#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nsarm/bsq.hpp"

using namespace nsarm;

TEST_CASE("quantize snaps to sphere vertices") {
  Tensor v({1, 1, 4}, std::vector<float>{0.5f, -0.5f, 0.5f, -0.5f});
  const bsq::Quantized q = bsq::quantize(v);
  CHECK(q.tokens.bits == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(q.values == v);

  Tensor z({1, 1, 3});
  const bsq::Quantized qz = bsq::quantize(z);
  CHECK(qz.tokens.bits == std::vector<std::uint8_t>{1, 1, 1});
  for (float x : qz.values.data()) CHECK(x == doctest::Approx(1.0 / std::sqrt(3.0)));
}

TEST_CASE("quantized tokens have unit norm") {
  Rng rng(1);
  for (std::size_t d : {1, 3, 16, 32}) {
    const bsq::Quantized q = bsq::quantize(testing::random_tensor({3, 4, d}, rng));
    for (std::size_t t = 0; t < 12; ++t) {
      double n2 = 0;
      for (std::size_t j = 0; j < d; ++j) n2 += double(q.values[t * d + j]) * q.values[t * d + j];
      CHECK(n2 == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("dequantize") {
  bsq::BitTokenMap one{1, 1, 1, {1}};
  CHECK(bsq::dequantize(one)[0] == 1.0f);
  bsq::BitTokenMap zeros{1, 1, 4, {0, 0, 0, 0}};
  const Tensor dz = bsq::dequantize(zeros);
  for (float x : dz.data()) CHECK(x == -0.5f);
}

TEST_CASE("quantize after dequantize is idempotent on bits") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    bsq::BitTokenMap m{2, 3, 5, {}};
    for (int i = 0; i < 30; ++i) m.bits.push_back(rng.bernoulli(0.5) ? 1 : 0);
    CHECK(bsq::quantize(bsq::dequantize(m)).tokens == m);
  }
}

TEST_CASE("quantization error stays within the worst-case vertex distance") {
  Rng rng(3);
  for (std::size_t d : {2, 4, 16}) {
    const double bound = std::sqrt(2.0 - 2.0 / std::sqrt(double(d)));
    Tensor r = testing::random_tensor({8, 8, d}, rng);
    const bsq::Quantized q = bsq::quantize(r);
    for (std::size_t t = 0; t < 64; ++t) {
      double n = 0;
      for (std::size_t j = 0; j < d; ++j) n += double(r[t * d + j]) * r[t * d + j];
      n = std::sqrt(n);
      double e = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = r[t * d + j] / n - q.values[t * d + j];
        e += diff * diff;
      }
      CHECK(std::sqrt(e) <= bound + 1e-6);
    }
  }
}

TEST_CASE("pack order and round trip") {
  bsq::BitTokenMap m{1, 1, 8, {1, 0, 0, 0, 0, 0, 0, 1}};
  CHECK(bsq::pack_bits(m) == std::vector<std::uint8_t>{0x81});

  Rng rng(4);
  bsq::BitTokenMap r{3, 5, 7, {}};
  for (int i = 0; i < 105; ++i) r.bits.push_back(rng.bernoulli(0.3) ? 1 : 0);
  const auto bytes = bsq::pack_bits(r);
  CHECK(bytes.size() == 14);
  CHECK(bsq::unpack_bits(bytes, 3, 5, 7) == r);
  std::vector<std::uint8_t> short_bytes(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS(bsq::unpack_bits(short_bytes, 3, 5, 7));
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(bsq::quantize(Tensor({4, 4})), ShapeError);
  CHECK_THROWS_AS(bsq::quantize(Tensor({1, 1, 4}), 8), ShapeError);
  bsq::BitTokenMap bad{1, 1, 2, {0, 2}};
  CHECK_THROWS(bsq::validate(bad));
  CHECK_THROWS(bsq::dequantize(bad));
}

TEST_CASE("bits_as_tensor") {
  bsq::BitTokenMap m{1, 2, 2, {1, 0, 0, 1}};
  Tensor t = bsq::bits_as_tensor(m);
  CHECK(t.shape() == Shape{1, 2, 2});
  CHECK(t.storage() == std::vector<float>{1, 0, 0, 1});
}
