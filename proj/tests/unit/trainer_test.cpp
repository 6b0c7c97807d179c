#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "micro.hpp"
#include "nsarm/trainer.hpp"

using namespace nsarm;

namespace {
std::vector<Tensor> gts(const std::vector<SrPair>& pairs) {
  std::vector<Tensor> out;
  for (const auto& p : pairs) out.push_back(p.gt);
  return out;
}

TrainCfg quick(Stage stage, std::size_t steps) {
  TrainCfg c;
  c.stage = stage;
  c.batch_size = 4;
  c.iterations = steps;
  c.epochs = steps;
  c.learning_rate = 3e-3;
  c.seed = 5;
  return c;
}
}  // namespace

TEST_CASE("stage names") {
  for (Stage s : {Stage::tokenizer, Stage::ar_pretrain, Stage::stage1, Stage::stage2, Stage::stage2_from_scratch}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
  CHECK_THROWS(parse_stage("stage3"));
}

TEST_CASE("train config validation") {
  validate(TrainCfg{});
  CHECK_THROWS(validate(TrainCfg{.learning_rate = 0}));
  CHECK_THROWS(validate(TrainCfg{.batch_size = 0}));
  TrainCfg c;
  c.adamw.beta2 = 1.5;
  CHECK_THROWS(validate(c));
}

TEST_CASE("history csv and smoothing") {
  TrainHistory h;
  h.rows.push_back({1, "stage1", 0.5});
  h.rows.push_back({2, "stage2", 0.25, 0.75});
  CHECK(history_csv(h) == "step,stage,loss,bit_accuracy\n1,stage1,0.5,\n2,stage2,0.25,0.75\n");
  CHECK(h.losses() == std::vector<double>{0.5, 0.25});
  const auto s = smoothed({4, 2, 6, 0}, 2);
  CHECK(s == std::vector<double>{4, 3, 4, 3});
  CHECK_THROWS(smoothed({1}, 0));
}

TEST_CASE("stack and unstack") {
  Rng rng(1);
  const Tensor a = testing::random_tensor({2, 3}, rng), b = testing::random_tensor({2, 3}, rng);
  const Tensor s = stack({a, b});
  CHECK(s.shape() == Shape{2, 2, 3});
  CHECK(unstack(s, 1) == b);
  CHECK_THROWS(stack({a, Tensor({3, 2})}));
  CHECK_THROWS(unstack(s, 2));
}

TEST_CASE("zero steps leave parameters untouched") {
  const auto data = testing::micro_pairs(4);
  Nsarm m(testing::micro_config(), 1);
  const Tensor tok = m.tokenizer.params().flatten(), tn = m.tnet.params().flatten(), ar = m.ar.params().flatten();
  CHECK(train_tokenizer(m.tokenizer, gts(data), m.config.schedule, quick(Stage::tokenizer, 0)).rows.empty());
  CHECK(train_ar_pretrain(m.ar, m.tokenizer, gts(data), quick(Stage::ar_pretrain, 0)).rows.empty());
  CHECK(train_stage1(m.tnet, m.tokenizer, data, quick(Stage::stage1, 0)).rows.empty());
  CHECK(train_stage2(m.tnet, m.ar, m.tokenizer, data, quick(Stage::stage2, 0)).rows.empty());
  CHECK(m.tokenizer.params().flatten() == tok);
  CHECK(m.tnet.params().flatten() == tn);
  CHECK(m.ar.params().flatten() == ar);
}

TEST_CASE("training is deterministic under a fixed seed") {
  const auto data = testing::micro_pairs(6);
  auto run = [&] {
    Nsarm m(testing::micro_config(), 2);
    std::vector<TrainHistory> h;
    h.push_back(train_tokenizer(m.tokenizer, gts(data), m.config.schedule, quick(Stage::tokenizer, 2)));
    h.push_back(train_ar_pretrain(m.ar, m.tokenizer, gts(data), quick(Stage::ar_pretrain, 3)));
    h.push_back(train_stage1(m.tnet, m.tokenizer, data, quick(Stage::stage1, 3)));
    h.push_back(train_stage2(m.tnet, m.ar, m.tokenizer, data, quick(Stage::stage2, 3)));
    std::string all;
    for (const auto& x : h) all += history_csv(x);
    return std::pair{all, m.ar.params().flatten()};
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("tokenizer epochs cover the data") {
  const auto data = testing::micro_pairs(6);
  Nsarm m(testing::micro_config(), 3);
  TrainCfg c = quick(Stage::tokenizer, 2);
  const TrainHistory h = train_tokenizer(m.tokenizer, gts(data), m.config.schedule, c);
  CHECK(h.rows.size() == 4);  // 2 epochs of ceil(6 / 4) batches
  CHECK(h.rows.front().stage == "tokenizer");
  CHECK(std::isnan(h.rows.front().bit_accuracy));
  CHECK_THROWS(train_tokenizer(m.tokenizer, {}, m.config.schedule, c));
}

TEST_CASE("stage 1 touches only the transformation network and lowers its loss") {
  const auto data = testing::micro_pairs(8);
  Nsarm m(testing::micro_config(), 4);
  const Tensor tok = m.tokenizer.params().flatten(), ar = m.ar.params().flatten(), tn = m.tnet.params().flatten();
  const TrainHistory h = train_stage1(m.tnet, m.tokenizer, data, quick(Stage::stage1, 60));
  CHECK(m.tokenizer.params().flatten() == tok);
  CHECK(m.ar.params().flatten() == ar);
  CHECK(!(m.tnet.params().flatten() == tn));
  const auto s = smoothed(h.losses(), 10);
  CHECK(s.back() < h.rows.front().loss);
}

TEST_CASE("stage 2 updates T and the AR model but not the tokenizer") {
  const auto data = testing::micro_pairs(6);
  Nsarm m(testing::micro_config(), 5);
  const Tensor tok = m.tokenizer.params().flatten(), ar = m.ar.params().flatten(), tn = m.tnet.params().flatten();
  const TrainHistory h = train_stage2(m.tnet, m.ar, m.tokenizer, data, quick(Stage::stage2, 2));
  CHECK(m.tokenizer.params().flatten() == tok);
  CHECK(!(m.ar.params().flatten() == ar));
  CHECK(!(m.tnet.params().flatten() == tn));
  for (const auto& r : h.rows) {
    CHECK(r.bit_accuracy >= 0.0);
    CHECK(r.bit_accuracy <= 1.0);
  }
  CHECK(train_stage2(m.tnet, m.ar, m.tokenizer, data, quick(Stage::stage2_from_scratch, 1)).rows[0].stage ==
        "stage2_from_scratch");
}

TEST_CASE("stage 2 supervises only scales after k_t") {
  const auto data = testing::micro_pairs(2);
  Nsarm m(testing::micro_config(), 6);
  std::vector<Tensor> lat, lr;
  for (const auto& p : data) {
    lat.push_back(encode_image(m.tokenizer, p.gt));
    lr.push_back(p.lr);
  }
  const Stage2Batch<float> b = stage2_objective(m.tnet, m.ar, lat, stack(lr));
  REQUIRE(b.logits.size() == 1);
  CHECK(b.logits[0].shape() == Shape{2, 4, 4, 4});
  CHECK(b.labels[0].shape() == Shape{2, 4, 4, 4});
  const BitAccuracy acc = teacher_forced_accuracy(m.tnet, m.ar, m.tokenizer, data, {0, 1}, 1);
  CHECK(acc.total == 2 * 4 * 4 * 4);
}

TEST_CASE("divergence is reported with the step") {
  auto data = testing::micro_pairs(4);
  data[0].lr[0] = NAN;
  data[1].lr[0] = NAN;
  data[2].lr[0] = NAN;
  data[3].lr[0] = NAN;
  Nsarm m(testing::micro_config(), 7);
  try {
    train_stage1(m.tnet, m.tokenizer, data, quick(Stage::stage1, 1));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("checkpoint hook fires on schedule") {
  const auto data = testing::micro_pairs(4);
  Nsarm m(testing::micro_config(), 8);
  TrainCfg c = quick(Stage::stage1, 5);
  c.checkpoint_every = 2;
  std::vector<std::size_t> seen;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t s) { seen.push_back(s); };
  train_stage1(m.tnet, m.tokenizer, data, c, hooks);
  CHECK(seen == std::vector<std::size_t>{2, 4});
}

TEST_CASE("pipeline checkpoint round trip is bit-identical") {
  const auto data = testing::micro_pairs(2);
  Nsarm m(testing::micro_config(), 9);
  train_stage1(m.tnet, m.tokenizer, data, quick(Stage::stage1, 2));
  const Checkpoint c = make_checkpoint(m, "stage1");
  CHECK(c.meta.at("stage") == "stage1");
  const Nsarm back = restore(deserialize_checkpoint(serialize(c)));
  CHECK(back.config.schedule == m.config.schedule);
  CHECK(back.tnet.forward(constant(stack({data[0].lr})))[1].value() ==
        m.tnet.forward(constant(stack({data[0].lr})))[1].value());
  CHECK(encode_image(back.tokenizer, data[0].gt) == encode_image(m.tokenizer, data[0].gt));
  Checkpoint missing = c;
  missing.tensors.erase(missing.tensors.begin());
  CHECK_THROWS(restore(missing));
}
