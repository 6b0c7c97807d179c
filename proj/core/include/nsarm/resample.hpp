#pragma once

#include <cstddef>
#include <vector>

#include "nsarm/tensor.hpp"

namespace nsarm {

// Sparse 1-D resampling operator: output i = sum_j weight[j] * input[index[j]]
// for j in [offsets[i], offsets[i+1]).
struct ResampleTable {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> index;
  std::vector<double> weight;

  bool is_identity() const { return in == out; }
};

// Box filter with fractional overlap weights; requires out <= in.
ResampleTable area_table(std::size_t in, std::size_t out);
// Corner-aligned linear interpolation; requires out >= in.
ResampleTable bilinear_table(std::size_t in, std::size_t out);

enum class ResampleKind { area, bilinear };

// Applies row/column tables over the H and W axes of [H,W,C] or [B,H,W,C].
template <class T>
BasicTensor<T> apply_resample(const BasicTensor<T>& x, const ResampleTable& rows, const ResampleTable& cols);
// Adjoint of apply_resample; `x` has the output extent, the result the input extent.
template <class T>
BasicTensor<T> apply_resample_adjoint(const BasicTensor<T>& g, const ResampleTable& rows,
                                      const ResampleTable& cols);

// down(.): area average to a smaller or equal extent. Identity returns a bit-exact copy.
template <class T>
BasicTensor<T> resize_down(const BasicTensor<T>& x, Extent target);
// up(.): corner-aligned bilinear to a larger or equal extent.
template <class T>
BasicTensor<T> resize_up(const BasicTensor<T>& x, Extent target);

// Tables used by resize_down / resize_up for the given extents (validates direction).
std::pair<ResampleTable, ResampleTable> resample_tables(ResampleKind kind, Extent from, Extent to);

}  // namespace nsarm
