#include "nsarm/trainer.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "nsarm/residual_codec.hpp"

namespace nsarm {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::tokenizer: return "tokenizer";
    case Stage::ar_pretrain: return "ar_pretrain";
    case Stage::stage1: return "stage1";
    case Stage::stage2: return "stage2";
    case Stage::stage2_from_scratch: return "stage2_from_scratch";
  }
  return "unknown";
}

Stage parse_stage(const std::string& text) {
  for (Stage s : {Stage::tokenizer, Stage::ar_pretrain, Stage::stage1, Stage::stage2, Stage::stage2_from_scratch}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown training stage '" + text + "'");
}

void validate(const TrainCfg& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.clip_norm < 0.0) throw std::invalid_argument("clip_norm must be >= 0");
  if (cfg.commitment < 0.0) throw std::invalid_argument("commitment must be >= 0");
  AdamWCfg a = cfg.adamw;
  a.lr = cfg.learning_rate;
  validate(a);
}

std::vector<double> TrainHistory::losses() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.loss);
  return out;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream os;
  os.precision(9);
  os << "step,stage,loss,bit_accuracy\n";
  for (const auto& r : history.rows) {
    os << r.step << ',' << r.stage << ',' << r.loss << ',';
    if (!std::isnan(r.bit_accuracy)) os << r.bit_accuracy;
    os << '\n';
  }
  return os.str();
}

std::vector<double> smoothed(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smoothing window must be positive");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  const Shape& s = items.front().shape();
  Shape out_shape{items.size()};
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  Tensor out(out_shape);
  const std::size_t n = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != s) throw ShapeError("stack: mismatched shapes");
    std::memcpy(out.ptr() + i * n, items[i].ptr(), n * sizeof(float));
  }
  return out;
}

Tensor unstack(const Tensor& batch, std::size_t index) {
  Shape s(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(s);
  if (index >= batch.dim(0)) throw std::out_of_range("unstack index out of range");
  return Tensor(s, std::vector<float>(batch.ptr() + index * n, batch.ptr() + (index + 1) * n));
}

namespace {

template <class T>
BasicTensor<T> unstack_t(const BasicTensor<T>& batch, std::size_t index) {
  Shape s(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(s);
  return BasicTensor<T>(s, std::vector<T>(batch.ptr() + index * n, batch.ptr() + (index + 1) * n));
}

template <class T>
BasicTensor<T> stack_t(const std::vector<Tensor>& items) {
  return stack(items).template cast<T>();
}

// Endless shuffled passes over [0, n) in fixed-size batches.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, Rng rng) : n_(n), batch_(std::min(batch, n)), rng_(rng) {
    if (n == 0) throw std::invalid_argument("training set is empty");
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    while (out.size() < batch_) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

  std::size_t batches_per_epoch() const { return (n_ + batch_ - 1) / batch_; }

 private:
  void reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    pos_ = 0;
  }

  std::size_t n_, batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::vector<Tensor> encode_all(const Autoencoder<float>& tok, const std::vector<SrPair>& data) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (const auto& p : data) out.push_back(encode_image(tok, p.gt));
  return out;
}

AdamW make_optimizer(std::vector<Var<float>> params, const TrainCfg& cfg) {
  AdamWCfg a = cfg.adamw;
  a.lr = cfg.learning_rate;
  return AdamW(std::move(params), a);
}

// Runs `step` for each iteration with divergence checks, logging and hooks.
template <class StepFn>
TrainHistory run_loop(const std::string& stage, std::size_t steps, const TrainCfg& cfg, const TrainHooks& hooks,
                      StepFn step) {
  TrainHistory h;
  for (std::size_t i = 1; i <= steps; ++i) {
    LogRow row;
    row.step = i;
    row.stage = stage;
    try {
      step(row);
    } catch (const NonFiniteError& e) {
      throw DivergenceError(stage + " diverged at step " + std::to_string(i) + ": " + e.what());
    }
    if (!std::isfinite(row.loss)) {
      throw DivergenceError(stage + " diverged at step " + std::to_string(i) + ": loss is " + std::to_string(row.loss));
    }
    h.rows.push_back(row);
    if (hooks.on_step) hooks.on_step(row);
    if (cfg.checkpoint_every && i % cfg.checkpoint_every == 0 && hooks.on_checkpoint) hooks.on_checkpoint(i);
  }
  return h;
}

}  // namespace

TrainHistory train_tokenizer(Autoencoder<float>& tokenizer, const std::vector<Tensor>& images,
                             const ScaleSchedule& schedule, const TrainCfg& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (images.empty()) throw std::invalid_argument("train_tokenizer: empty dataset");
  BatchSampler sampler(images.size(), cfg.batch_size, Rng(cfg.seed, 11));
  auto params = collect_params(tokenizer.params());
  AdamW opt = make_optimizer(params, cfg);
  const Quantizer q = bsq_quantizer();
  return run_loop("tokenizer", cfg.epochs * sampler.batches_per_epoch(), cfg, hooks, [&](LogRow& row) {
    std::vector<Tensor> batch;
    for (std::size_t i : sampler.next()) batch.push_back(images[i]);
    opt.zero_grad();
    Var<float> loss = tokenizer_objective(tokenizer, stack(batch), schedule, cfg.commitment, q);
    row.loss = loss.value().item();
    backward(loss);
    clip_grad_norm(params, cfg.clip_norm);
    opt.step();
  });
}

TrainHistory train_ar_pretrain(ArModel<float>& ar, const Autoencoder<float>& tokenizer,
                               const std::vector<Tensor>& images, const TrainCfg& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (images.empty()) throw std::invalid_argument("train_ar_pretrain: empty dataset");
  const ScaleSchedule& s = ar.schedule();
  std::vector<ResidualQueue> queues;
  for (const Tensor& img : images) queues.push_back(decompose(encode_image(tokenizer, img), s, bsq_quantizer()));
  BatchSampler sampler(images.size(), cfg.batch_size, Rng(cfg.seed, 14));
  auto params = collect_params(ar.params());
  AdamW opt = make_optimizer(params, cfg);
  return run_loop("ar_pretrain", cfg.iterations, cfg, hooks, [&](LogRow& row) {
    const auto idx = sampler.next();
    std::vector<Var<float>> inputs;
    std::vector<Tensor> labels;
    for (std::size_t j = 0; j + 1 < s.size(); ++j) {
      std::vector<Tensor> parts;
      for (std::size_t i : idx) parts.push_back(queues[i].inputs[j]);
      inputs.push_back(constant(stack(parts)));
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      std::vector<Tensor> maps;
      for (std::size_t i : idx) maps.push_back(bsq::bits_as_tensor(bsq::quantize(queues[i].residuals[k]).tokens));
      labels.push_back(stack(maps));
    }
    opt.zero_grad();
    const auto logits = ar.forward(inputs, 1, idx.size());
    Var<float> loss = bitwise_ce_loss(logits, labels);
    row.loss = loss.value().item();
    std::vector<Tensor> values;
    for (const auto& l : logits) values.push_back(l.value());
    row.bit_accuracy = bit_accuracy(values, labels).value();
    backward(loss);
    clip_grad_norm(params, cfg.clip_norm);
    opt.step();
  });
}

TrainHistory train_stage1(TransformNet<float>& tnet, const Autoencoder<float>& tokenizer,
                          const std::vector<SrPair>& data, const TrainCfg& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (data.empty()) throw std::invalid_argument("train_stage1: empty dataset");
  const ScaleSchedule& s = tnet.schedule();
  // GT residuals R_1..R_{k_t} from the frozen tokenizer
  std::vector<std::vector<Tensor>> targets;
  for (const Tensor& f : encode_all(tokenizer, data)) {
    ResidualQueue q = decompose(f, s, bsq_quantizer());
    q.residuals.resize(s.k_t);
    targets.push_back(std::move(q.residuals));
  }
  BatchSampler sampler(data.size(), cfg.batch_size, Rng(cfg.seed, 12));
  auto params = collect_params(tnet.params());
  AdamW opt = make_optimizer(params, cfg);
  return run_loop("stage1", cfg.iterations, cfg, hooks, [&](LogRow& row) {
    const auto idx = sampler.next();
    std::vector<Tensor> lr;
    std::vector<Tensor> tgt(s.k_t);
    std::vector<std::vector<Tensor>> per_scale(s.k_t);
    for (std::size_t i : idx) {
      lr.push_back(data[i].lr);
      for (std::size_t k = 0; k < s.k_t; ++k) per_scale[k].push_back(targets[i][k]);
    }
    for (std::size_t k = 0; k < s.k_t; ++k) tgt[k] = stack(per_scale[k]);
    opt.zero_grad();
    Var<float> loss = stage1_loss(tnet.forward(constant(stack(lr))), tgt);
    row.loss = loss.value().item();
    backward(loss);
    clip_grad_norm(params, cfg.clip_norm);
    opt.step();
  });
}

template <class T>
Stage2Batch<T> stage2_objective(const TransformNet<T>& tnet, const ArModel<T>& ar, const std::vector<Tensor>& latents,
                                const Tensor& lr, bool relaxed) {
  const ScaleSchedule& s = ar.schedule();
  const std::size_t B = latents.size(), K = s.size(), kt = s.k_t, d = s.latent_dim;
  if (lr.rank() != 4 || lr.dim(0) != B) throw ShapeError("stage2_objective: LR batch does not match latents");
  const Extent full = s.last();

  const std::vector<Var<T>> raw = tnet.forward(constant(lr.template cast<T>()));
  std::vector<Var<T>> prelim;
  for (const auto& r : raw) prelim.push_back(relaxed ? ag::normalize_last(r) : ag::bsq_straight_through(r));

  // cascaded-modified queues with the quantized preliminary residuals spliced in
  std::vector<ResidualQueue> queues;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<Tensor> r_prime;
    for (const auto& r : raw) r_prime.push_back(bsq::quantize_values(unstack_t(r.value(), b).template cast<float>()));
    queues.push_back(cascaded_modify(latents[b], s, r_prime, bsq_quantizer()));
  }

  Stage2Batch<T> out;
  for (std::size_t k = kt + 1; k <= K; ++k) {
    std::vector<Tensor> maps;
    for (const auto& q : queues) maps.push_back(bsq::bits_as_tensor(bsq::quantize(q.residuals[k - 1], d).tokens));
    out.labels.push_back(stack_t<T>(maps));
  }

  // F~_j = down(sum_{i<=min(j,k_t)} up(R'_i)) + down(sum_{k_t<i<=j} up(R_i))
  std::vector<Var<T>> inputs;
  Var<T> prefix;
  std::vector<Tensor> later(B, Tensor({full.h, full.w, d}));
  for (std::size_t j = 1; j < K; ++j) {
    const Extent next = s.scale(j + 1);
    if (j <= kt) {
      Var<T> up = ag::resize(prelim[j - 1], full, ResampleKind::bilinear);
      prefix = prefix.defined() ? ag::add(prefix, up) : up;
    }
    Var<T> in = ag::resize(prefix, next, ResampleKind::area);
    if (j > kt) {
      std::vector<Tensor> parts;
      for (std::size_t b = 0; b < B; ++b) {
        add_inplace(later[b], resize_up(queues[b].residuals[j - 1], full));
        parts.push_back(resize_down(later[b], next));
      }
      in = ag::add(in, constant(stack_t<T>(parts)));
    }
    inputs.push_back(in);
  }
  out.logits = ar.forward(inputs, kt + 1, B);
  out.loss = bitwise_ce_loss(out.logits, out.labels);
  return out;
}

template Stage2Batch<float> stage2_objective(const TransformNet<float>&, const ArModel<float>&,
                                             const std::vector<Tensor>&, const Tensor&, bool);
template Stage2Batch<double> stage2_objective(const TransformNet<double>&, const ArModel<double>&,
                                              const std::vector<Tensor>&, const Tensor&, bool);

namespace {
BitAccuracy batch_accuracy(const Stage2Batch<float>& b) {
  std::vector<Tensor> logits;
  for (const auto& l : b.logits) logits.push_back(l.value());
  return bit_accuracy(logits, b.labels);
}
}  // namespace

TrainHistory train_stage2(TransformNet<float>& tnet, ArModel<float>& ar, const Autoencoder<float>& tokenizer,
                          const std::vector<SrPair>& data, const TrainCfg& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (data.empty()) throw std::invalid_argument("train_stage2: empty dataset");
  if (!(tnet.schedule() == ar.schedule())) throw std::invalid_argument("train_stage2: T and AR schedules differ");
  const std::vector<Tensor> latents = encode_all(tokenizer, data);
  BatchSampler sampler(data.size(), cfg.batch_size, Rng(cfg.seed, 13));
  auto params = collect_params(tnet.params());
  for (const auto& p : collect_params(ar.params())) params.push_back(p);
  AdamW opt = make_optimizer(params, cfg);
  return run_loop(to_string(cfg.stage == Stage::stage2_from_scratch ? Stage::stage2_from_scratch : Stage::stage2),
                  cfg.iterations, cfg, hooks, [&](LogRow& row) {
                    std::vector<Tensor> lat, lr;
                    for (std::size_t i : sampler.next()) {
                      lat.push_back(latents[i]);
                      lr.push_back(data[i].lr);
                    }
                    opt.zero_grad();
                    Stage2Batch<float> b = stage2_objective(tnet, ar, lat, stack(lr));
                    row.loss = b.loss.value().item();
                    row.bit_accuracy = batch_accuracy(b).value();
                    backward(b.loss);
                    clip_grad_norm(params, cfg.clip_norm);
                    opt.step();
                  });
}

BitAccuracy teacher_forced_accuracy(const TransformNet<float>& tnet, const ArModel<float>& ar,
                                    const Autoencoder<float>& tokenizer, const std::vector<SrPair>& data,
                                    const std::vector<std::size_t>& indices, std::size_t batch_size) {
  BitAccuracy total;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    std::vector<Tensor> lat, lr;
    for (std::size_t j = start; j < std::min(indices.size(), start + batch_size); ++j) {
      lat.push_back(encode_image(tokenizer, data.at(indices[j]).gt));
      lr.push_back(data[indices[j]].lr);
    }
    const BitAccuracy a = batch_accuracy(stage2_objective(tnet, ar, lat, stack(lr)));
    total.correct += a.correct;
    total.total += a.total;
  }
  return total;
}

}  // namespace nsarm
