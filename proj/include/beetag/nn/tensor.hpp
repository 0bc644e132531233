#pragma once
#include <cstddef>
#include <vector>

namespace beetag::nn {

// (n, c, h, w) row-major
template <typename T>
struct Ten4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Ten4() = default;
  Ten4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(size_t(n_) * c_ * h_ * w_, T(0)) {}

  size_t size() const { return v.size(); }
  int plane() const { return h * w; }

  T* ptr(int in, int ic = 0) { return v.data() + (size_t(in) * c + ic) * plane(); }
  const T* ptr(int in, int ic = 0) const { return v.data() + (size_t(in) * c + ic) * plane(); }

  T& at(int in, int ic, int iy, int ix) { return v[((size_t(in) * c + ic) * h + iy) * w + ix]; }
  T at(int in, int ic, int iy, int ix) const {
    return v[((size_t(in) * c + ic) * h + iy) * w + ix];
  }

  bool same_shape(const Ten4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

}  // namespace beetag::nn
