#include "nsarm/ar_model.hpp"

#include <cmath>
#include <string>

namespace nsarm {

template <class T>
ArModel<T>::ArModel(const ScaleSchedule& schedule, const ArModelConfig& config, Rng& rng)
    : schedule_(schedule), config_(config) {
  validate(schedule_, schedule_.last());
  const std::size_t D = config.model_dim, d = schedule_.latent_dim, K = schedule_.size();
  if (config.heads == 0 || D % config.heads != 0) throw std::invalid_argument("model_dim must be divisible by heads");
  const double init = 0.02;
  const double out_init = init / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(1, config.layers)));

  condition_ = params_.add("ar.cond.embedding", random_normal<T>({D}, init, rng));
  scale_embed_ = params_.add("ar.scale.embedding", random_normal<T>({K, D}, init, rng));
  for (std::size_t k = 1; k <= K; ++k) {
    const Extent e = schedule_.scale(k);
    pos_rows_.push_back(params_.add("ar.pos" + std::to_string(k) + ".rows", random_normal<T>({e.h, D}, init, rng)));
    pos_cols_.push_back(params_.add("ar.pos" + std::to_string(k) + ".cols", random_normal<T>({e.w, D}, init, rng)));
  }
  input_proj_ = Linear<T>(params_, "ar.input", d, D, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "ar.block" + std::to_string(l);
    Block b;
    b.ln1 = LayerNorm<T>(params_, p + ".ln1", D);
    b.qkv = Linear<T>(params_, p + ".qkv", D, 3 * D, init, rng);
    b.proj = Linear<T>(params_, p + ".proj", D, D, out_init, rng);
    b.ln2 = LayerNorm<T>(params_, p + ".ln2", D);
    b.fc1 = Linear<T>(params_, p + ".fc1", D, config.mlp_ratio * D, init, rng);
    b.fc2 = Linear<T>(params_, p + ".fc2", config.mlp_ratio * D, D, out_init, rng);
    blocks_.push_back(std::move(b));
  }
  final_ln_ = LayerNorm<T>(params_, "ar.final_ln", D);
  head_ = Linear<T>(params_, "ar.head", D, d, init, rng);
}

template <class T>
std::size_t ArModel<T>::sequence_length(std::size_t upto_k) const {
  return token_count(schedule_, 1, upto_k);
}

template <class T>
std::size_t ArModel<T>::head_parameter_count() const {
  return head_.weight.value().size() + head_.bias.value().size();
}

template <class T>
std::vector<Var<T>> ArModel<T>::forward(const std::vector<Var<T>>& inputs, std::size_t from_k,
                                        std::size_t batch) const {
  const std::size_t K = schedule_.size();
  const std::size_t n_blocks = inputs.size() + 1;
  const std::size_t D = config_.model_dim, d = schedule_.latent_dim;
  if (n_blocks > K) throw ShapeError("ar forward: more inputs than scales");
  if (from_k < 1 || from_k > n_blocks) throw ShapeError("ar forward: from_k out of range");
  if (batch == 0) throw ShapeError("ar forward: zero batch");

  std::vector<Var<T>> seq;
  std::vector<std::size_t> ends;
  std::size_t end = 0;
  for (std::size_t k = 1; k <= n_blocks; ++k) {
    const Extent e = schedule_.scale(k);
    const std::size_t n = e.h * e.w;
    Var<T> se = ag::reshape(ag::slice(scale_embed_, 0, k - 1, 1), {D});
    Var<T> pos = ag::add_bias(ag::grid_embed(pos_rows_[k - 1], pos_cols_[k - 1]), se);  // [n, D]
    Var<T> block;
    if (k == 1) {
      block = ag::tile_batch(ag::add_bias(pos, condition_), batch);
    } else {
      const Var<T>& in = inputs[k - 2];
      if (in.shape() != Shape{batch, e.h, e.w, d}) {
        throw ShapeError("ar forward: input for scale " + std::to_string(k) + " has shape " + shape_str(in.shape()));
      }
      Var<T> proj = input_proj_(ag::reshape(in, {batch, n, d}));
      block = ag::add(proj, ag::tile_batch(pos, batch));
    }
    seq.push_back(block);
    end += n;
    ends.push_back(end);
  }

  Var<T> x = seq.size() == 1 ? seq[0] : ag::concat(seq, 1);
  for (const Block& b : blocks_) {
    Var<T> a = ag::block_causal_attention(b.qkv(b.ln1(x)), config_.heads, ends);
    x = ag::add(x, b.proj(a));
    Var<T> m = b.fc2(ag::gelu(b.fc1(b.ln2(x))));
    x = ag::add(x, m);
  }

  const std::size_t start = from_k == 1 ? 0 : ends[from_k - 2];
  Var<T> h = final_ln_(ag::slice(x, 1, start, end - start));
  Var<T> logits = head_(h);  // [B, tokens, d]
  std::vector<Var<T>> out;
  std::size_t off = 0;
  for (std::size_t k = from_k; k <= n_blocks; ++k) {
    const Extent e = schedule_.scale(k);
    const std::size_t n = e.h * e.w;
    Var<T> part = (from_k == n_blocks) ? logits : ag::slice(logits, 1, off, n);
    out.push_back(ag::reshape(part, {batch, e.h, e.w, d}));
    off += n;
  }
  return out;
}

template <class T>
Var<T> bitwise_ce_loss(const std::vector<Var<T>>& logits, const std::vector<BasicTensor<T>>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw ShapeError("bitwise_ce_loss: " + std::to_string(logits.size()) + " logit maps vs " +
                     std::to_string(labels.size()) + " label maps");
  }
  Var<T> total;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    Var<T> term = ag::bce_with_logits(logits[k], labels[k]);
    total = total.defined() ? ag::add(total, term) : term;
  }
  return ag::scale(total, 1.0 / static_cast<double>(logits.size()));
}

BitAccuracy bit_accuracy(const std::vector<Tensor>& logits, const std::vector<Tensor>& labels) {
  if (logits.size() != labels.size()) throw ShapeError("bit_accuracy: scale count mismatch");
  BitAccuracy acc;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (logits[k].shape() != labels[k].shape()) throw ShapeError("bit_accuracy: shape mismatch");
    for (std::size_t i = 0; i < logits[k].size(); ++i) {
      const bool pred = logits[k][i] >= 0.0f;
      acc.correct += (pred == (labels[k][i] > 0.5f)) ? 1 : 0;
      ++acc.total;
    }
  }
  return acc;
}

template class ArModel<float>;
template class ArModel<double>;
template Var<float> bitwise_ce_loss(const std::vector<Var<float>>&, const std::vector<BasicTensor<float>>&);
template Var<double> bitwise_ce_loss(const std::vector<Var<double>>&, const std::vector<BasicTensor<double>>&);

}  // namespace nsarm
