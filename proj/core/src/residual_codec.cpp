#include "nsarm/residual_codec.hpp"

#include <cstring>
#include <string>

#include "nsarm/resample.hpp"

namespace nsarm {

Quantizer identity_quantizer() {
  return [](const Tensor& r) { return r; };
}

Quantizer bsq_quantizer() {
  return [](const Tensor& r) { return bsq::quantize(r).values; };
}

namespace {

Extent full_extent(const ScaleSchedule& s) { return s.last(); }

void check_latent(const Tensor& f, const ScaleSchedule& schedule) {
  validate(schedule, schedule.last());
  if (f.rank() != 3 || !(spatial_extent(f.shape()) == schedule.last()) || f.dim(2) != schedule.latent_dim) {
    throw ShapeError("latent " + shape_str(f.shape()) + " does not match schedule final scale " +
                     std::to_string(schedule.last().h) + "x" + std::to_string(schedule.last().w) + "x" +
                     std::to_string(schedule.latent_dim));
  }
}

ResidualQueue build_queue(const Tensor& f, const ScaleSchedule& schedule, const std::vector<Tensor>& prefix,
                          const Quantizer& quantizer) {
  check_latent(f, schedule);
  const std::size_t K = schedule.size();
  ResidualQueue q{schedule, {}, {}};
  q.residuals.reserve(K);
  Tensor acc(f.shape());  // F_0 = 0
  for (std::size_t k = 1; k <= K; ++k) {
    const Extent ek = schedule.scale(k);
    Tensor r = k <= prefix.size() ? prefix[k - 1] : quantizer(resize_down(sub(f, acc), ek));
    if (r.shape() != Shape{ek.h, ek.w, schedule.latent_dim}) {
      throw ShapeError("residual for scale " + std::to_string(k) + " has shape " + shape_str(r.shape()));
    }
    add_inplace(acc, resize_up(r, full_extent(schedule)));
    q.residuals.push_back(std::move(r));
    if (k < K) q.inputs.push_back(resize_down(acc, schedule.scale(k + 1)));
  }
  return q;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw std::runtime_error("token stream truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

ResidualQueue decompose(const Tensor& f, const ScaleSchedule& schedule, const Quantizer& quantizer) {
  return build_queue(f, schedule, {}, quantizer);
}

ResidualQueue cascaded_modify(const Tensor& f, const ScaleSchedule& schedule, const std::vector<Tensor>& r_prime,
                              const Quantizer& quantizer) {
  if (r_prime.size() != schedule.k_t) {
    throw ShapeError("cascaded_modify: expected " + std::to_string(schedule.k_t) + " preliminary residuals, got " +
                     std::to_string(r_prime.size()));
  }
  for (std::size_t k = 1; k <= r_prime.size(); ++k) {
    const Extent e = schedule.scale(k);
    if (r_prime[k - 1].shape() != Shape{e.h, e.w, schedule.latent_dim}) {
      throw ShapeError("cascaded_modify: preliminary residual " + std::to_string(k) + " has shape " +
                       shape_str(r_prime[k - 1].shape()));
    }
  }
  return build_queue(f, schedule, r_prime, quantizer);
}

Tensor accumulate(const std::vector<Tensor>& residuals, const ScaleSchedule& schedule, std::size_t upto_k) {
  if (upto_k > residuals.size() || upto_k > schedule.size()) {
    throw std::out_of_range("accumulate: upto_k = " + std::to_string(upto_k) + " exceeds available scales");
  }
  const Extent full = full_extent(schedule);
  Tensor acc({full.h, full.w, schedule.latent_dim});
  for (std::size_t k = 1; k <= upto_k; ++k) add_inplace(acc, resize_up(residuals[k - 1], full));
  return acc;
}

Tensor accumulate(const ResidualQueue& queue, std::size_t upto_k) {
  return accumulate(queue.residuals, queue.schedule, upto_k);
}

std::vector<Tensor> accumulated_inputs(const std::vector<Tensor>& residuals, const ScaleSchedule& schedule) {
  const Extent full = full_extent(schedule);
  const std::size_t n = std::min(residuals.size(), schedule.size() - 1);
  std::vector<Tensor> inputs;
  inputs.reserve(n);
  Tensor acc({full.h, full.w, schedule.latent_dim});
  for (std::size_t k = 1; k <= n; ++k) {
    add_inplace(acc, resize_up(residuals[k - 1], full));
    inputs.push_back(resize_down(acc, schedule.scale(k + 1)));
  }
  return inputs;
}

std::vector<bsq::BitTokenMap> labels(const ResidualQueue& queue) {
  std::vector<bsq::BitTokenMap> out;
  out.reserve(queue.residuals.size());
  for (const Tensor& r : queue.residuals) out.push_back(bsq::quantize(r, queue.schedule.latent_dim).tokens);
  return out;
}

std::vector<std::uint8_t> encode_token_stream(const std::vector<bsq::BitTokenMap>& scales) {
  std::vector<std::uint8_t> out{'N', 'S', 'T', 'K'};
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(scales.size()));
  for (std::size_t k = 0; k < scales.size(); ++k) {
    put_u32(out, static_cast<std::uint32_t>(k + 1));
    put_u32(out, static_cast<std::uint32_t>(scales[k].h));
    put_u32(out, static_cast<std::uint32_t>(scales[k].w));
    put_u32(out, static_cast<std::uint32_t>(scales[k].d));
    const auto packed = bsq::pack_bits(scales[k]);
    out.insert(out.end(), packed.begin(), packed.end());
  }
  return out;
}

std::vector<bsq::BitTokenMap> decode_token_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "NSTK", 4) != 0) throw std::runtime_error("not a token stream");
  std::size_t pos = 4;
  if (get_u32(bytes, pos) != 1) throw std::runtime_error("unsupported token stream version");
  const std::uint32_t K = get_u32(bytes, pos);
  std::vector<bsq::BitTokenMap> out;
  for (std::uint32_t k = 1; k <= K; ++k) {
    if (get_u32(bytes, pos) != k) throw std::runtime_error("token stream scale index out of order");
    const std::size_t h = get_u32(bytes, pos), w = get_u32(bytes, pos), d = get_u32(bytes, pos);
    const std::size_t n = (h * w * d + 7) / 8;
    if (pos + n > bytes.size()) throw std::runtime_error("token stream truncated");
    out.push_back(bsq::unpack_bits(bytes.subspan(pos, n), h, w, d));
    pos += n;
  }
  if (pos != bytes.size()) throw std::runtime_error("trailing bytes after token stream");
  return out;
}

}  // namespace nsarm
