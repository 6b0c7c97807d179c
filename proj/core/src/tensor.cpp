#include "nsarm/tensor.hpp"

#include <sstream>

namespace nsarm {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Extent spatial_extent(const Shape& shape) {
  if (shape.size() != 3 && shape.size() != 4) {
    throw ShapeError("expected [H,W,C] or [B,H,W,C], got " + shape_str(shape));
  }
  const std::size_t r = shape.size();
  return {shape[r - 3], shape[r - 2]};
}

namespace {
template <class T>
void require_same(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}
}  // namespace

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same(a, b, "add");
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same(a, b, "sub");
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

template <class T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <class T>
double l2_norm(const BasicTensor<T>& a) {
  double s = 0.0;
  for (T v : a.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

template <class T>
double sum(const BasicTensor<T>& a) {
  double s = 0.0;
  for (T v : a.data()) s += static_cast<double>(v);
  return s;
}

#define NSARM_INSTANTIATE(T)                                                   \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template void add_inplace(BasicTensor<T>&, const BasicTensor<T>&);           \
  template double l2_norm(const BasicTensor<T>&);                              \
  template double sum(const BasicTensor<T>&);

NSARM_INSTANTIATE(float)
NSARM_INSTANTIATE(double)
#undef NSARM_INSTANTIATE

}  // namespace nsarm
