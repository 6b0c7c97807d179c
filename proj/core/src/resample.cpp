#include "nsarm/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsarm {

ResampleTable area_table(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ShapeError("area_table: zero extent");
  if (out > in) {
    throw ShapeError("resize_down: target " + std::to_string(out) + " larger than source " + std::to_string(in));
  }
  ResampleTable t{in, out, {0}, {}, {}};
  const double step = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double lo = static_cast<double>(i) * step;
    const double hi = static_cast<double>(i + 1) * step;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(in, static_cast<std::size_t>(std::ceil(hi)));
    for (std::size_t j = first; j < last; ++j) {
      const double overlap = std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
      if (overlap <= 1e-12) continue;
      t.index.push_back(j);
      t.weight.push_back(overlap / step);
    }
    t.offsets.push_back(t.index.size());
  }
  return t;
}

ResampleTable bilinear_table(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ShapeError("bilinear_table: zero extent");
  if (out < in) {
    throw ShapeError("resize_up: target " + std::to_string(out) + " smaller than source " + std::to_string(in));
  }
  ResampleTable t{in, out, {0}, {}, {}};
  for (std::size_t i = 0; i < out; ++i) {
    if (in == 1) {
      t.index.push_back(0);
      t.weight.push_back(1.0);
    } else {
      const double pos = static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
      auto j0 = static_cast<std::size_t>(std::floor(pos));
      if (j0 >= in - 1) j0 = in - 2;
      const double frac = pos - static_cast<double>(j0);
      if (frac < 1.0) {
        t.index.push_back(j0);
        t.weight.push_back(1.0 - frac);
      }
      if (frac > 0.0) {
        t.index.push_back(j0 + 1);
        t.weight.push_back(frac);
      }
    }
    t.offsets.push_back(t.index.size());
  }
  return t;
}

std::pair<ResampleTable, ResampleTable> resample_tables(ResampleKind kind, Extent from, Extent to) {
  if (kind == ResampleKind::area) return {area_table(from.h, to.h), area_table(from.w, to.w)};
  return {bilinear_table(from.h, to.h), bilinear_table(from.w, to.w)};
}

namespace {

struct Layout {
  std::size_t batch;
  std::size_t h;
  std::size_t w;
  std::size_t c;
};

Layout layout_of(const Shape& s) {
  const Extent e = spatial_extent(s);
  return {s.size() == 4 ? s[0] : 1, e.h, e.w, s.back()};
}

Shape with_extent(const Shape& s, std::size_t h, std::size_t w) {
  Shape out = s;
  out[s.size() - 3] = h;
  out[s.size() - 2] = w;
  return out;
}

}  // namespace

template <class T>
BasicTensor<T> apply_resample(const BasicTensor<T>& x, const ResampleTable& rows, const ResampleTable& cols) {
  const Layout l = layout_of(x.shape());
  if (l.h != rows.in || l.w != cols.in) throw ShapeError("apply_resample: table/extent mismatch");
  BasicTensor<T> out(with_extent(x.shape(), rows.out, cols.out));
  std::vector<double> acc(l.c);
  std::vector<double> rowbuf(cols.in * l.c);
  for (std::size_t b = 0; b < l.batch; ++b) {
    const T* src = x.ptr() + b * l.h * l.w * l.c;
    T* dst = out.ptr() + b * rows.out * cols.out * l.c;
    for (std::size_t i = 0; i < rows.out; ++i) {
      // vertical pass into a row buffer, then horizontal pass
      std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
      for (std::size_t p = rows.offsets[i]; p < rows.offsets[i + 1]; ++p) {
        const double wr = rows.weight[p];
        const T* srow = src + rows.index[p] * l.w * l.c;
        for (std::size_t q = 0; q < cols.in * l.c; ++q) rowbuf[q] += wr * static_cast<double>(srow[q]);
      }
      for (std::size_t j = 0; j < cols.out; ++j) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t p = cols.offsets[j]; p < cols.offsets[j + 1]; ++p) {
          const double wc = cols.weight[p];
          const double* s = rowbuf.data() + cols.index[p] * l.c;
          for (std::size_t ch = 0; ch < l.c; ++ch) acc[ch] += wc * s[ch];
        }
        T* d = dst + (i * cols.out + j) * l.c;
        for (std::size_t ch = 0; ch < l.c; ++ch) d[ch] = static_cast<T>(acc[ch]);
      }
    }
  }
  return out;
}

template <class T>
BasicTensor<T> apply_resample_adjoint(const BasicTensor<T>& g, const ResampleTable& rows,
                                      const ResampleTable& cols) {
  const Layout l = layout_of(g.shape());
  if (l.h != rows.out || l.w != cols.out) throw ShapeError("apply_resample_adjoint: table/extent mismatch");
  BasicTensor<T> out(with_extent(g.shape(), rows.in, cols.in));
  std::vector<double> acc(rows.in * cols.in * l.c);
  std::vector<double> rowbuf(cols.in * l.c);
  for (std::size_t b = 0; b < l.batch; ++b) {
    const T* src = g.ptr() + b * rows.out * cols.out * l.c;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < rows.out; ++i) {
      std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
      for (std::size_t j = 0; j < cols.out; ++j) {
        const T* s = src + (i * cols.out + j) * l.c;
        for (std::size_t p = cols.offsets[j]; p < cols.offsets[j + 1]; ++p) {
          const double wc = cols.weight[p];
          double* d = rowbuf.data() + cols.index[p] * l.c;
          for (std::size_t ch = 0; ch < l.c; ++ch) d[ch] += wc * static_cast<double>(s[ch]);
        }
      }
      for (std::size_t p = rows.offsets[i]; p < rows.offsets[i + 1]; ++p) {
        const double wr = rows.weight[p];
        double* d = acc.data() + rows.index[p] * cols.in * l.c;
        for (std::size_t q = 0; q < cols.in * l.c; ++q) d[q] += wr * rowbuf[q];
      }
    }
    T* dst = out.ptr() + b * rows.in * cols.in * l.c;
    for (std::size_t q = 0; q < acc.size(); ++q) dst[q] = static_cast<T>(acc[q]);
  }
  return out;
}

template <class T>
BasicTensor<T> resize_down(const BasicTensor<T>& x, Extent target) {
  const Extent from = spatial_extent(x.shape());
  if (target.h == 0 || target.w == 0) throw ShapeError("resize_down: zero target dimension");
  if (target.h > from.h || target.w > from.w) throw ShapeError("resize_down: target larger than source");
  if (target == from) return x;
  const auto [rows, cols] = resample_tables(ResampleKind::area, from, target);
  return apply_resample(x, rows, cols);
}

template <class T>
BasicTensor<T> resize_up(const BasicTensor<T>& x, Extent target) {
  const Extent from = spatial_extent(x.shape());
  if (target.h < from.h || target.w < from.w) throw ShapeError("resize_up: target smaller than source");
  if (target == from) return x;
  const auto [rows, cols] = resample_tables(ResampleKind::bilinear, from, target);
  return apply_resample(x, rows, cols);
}

#define NSARM_INSTANTIATE(T)                                                                          \
  template BasicTensor<T> apply_resample(const BasicTensor<T>&, const ResampleTable&, const ResampleTable&); \
  template BasicTensor<T> apply_resample_adjoint(const BasicTensor<T>&, const ResampleTable&,               \
                                                 const ResampleTable&);                                     \
  template BasicTensor<T> resize_down(const BasicTensor<T>&, Extent);                                       \
  template BasicTensor<T> resize_up(const BasicTensor<T>&, Extent);

NSARM_INSTANTIATE(float)
NSARM_INSTANTIATE(double)
#undef NSARM_INSTANTIATE

}  // namespace nsarm
