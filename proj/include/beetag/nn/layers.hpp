#pragma once
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "beetag/nn/gemm.hpp"
#include "beetag/nn/tensor.hpp"
#include "beetag/rng.hpp"

namespace beetag::nn {

template <typename T>
struct ParamRef {
  std::vector<T>* w;
  std::vector<T>* g;
};

template <typename T>
struct Layer {
  virtual ~Layer() = default;
  virtual Ten4<T> forward(const Ten4<T>& x, bool train) = 0;
  virtual Ten4<T> backward(const Ten4<T>& gy) = 0;
  // learnable parameters with their gradient buffers
  virtual void params(std::vector<ParamRef<T>>& out) {}
  // non-learnable state carried in checkpoints (batch-norm running stats)
  virtual void buffers(std::vector<std::vector<T>*>& out) {}
};

inline int conv_out_extent(int in, int k, int stride, int pad) {
  int span = in + 2 * pad - k;
  if (span < 0) return 0;  // window larger than padded input
  return span / stride + 1;
}

template <typename T>
class Conv2d : public Layer<T> {
public:
  // pad is in pixels: 0 for valid, k/2 for same-at-stride-1
  Conv2d(int in_c, int out_c, int k, int stride, int pad, Rng& rng)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {
    w_.resize(size_t(out_c) * in_c * k * k);
    b_.resize(out_c, T(0));
    gw_.resize(w_.size(), T(0));
    gb_.resize(b_.size(), T(0));
    double std = std::sqrt(2.0 / (double(in_c) * k * k));  // He fan-in
    for (auto& v : w_) v = T(rng.normal() * std);
  }

  Ten4<T> forward(const Ten4<T>& x, bool) override {
    if (x.c != in_c_) throw std::invalid_argument("conv2d: channel mismatch");
    int oh = conv_out_extent(x.h, k_, stride_, pad_);
    int ow = conv_out_extent(x.w, k_, stride_, pad_);
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d: output would be empty");
    x_ = x;
    Ten4<T> y(x.n, out_c_, oh, ow);
    int ckk = in_c_ * k_ * k_, ohw = oh * ow;
    col_.resize(size_t(ckk) * ohw);
    for (int in = 0; in < x.n; ++in) {
      im2col(x, in, oh, ow);
      gemm_nn(out_c_, ckk, ohw, w_.data(), col_.data(), y.ptr(in));
      for (int oc = 0; oc < out_c_; ++oc) {
        T* row = y.ptr(in, oc);
        for (int j = 0; j < ohw; ++j) row[j] += b_[oc];
      }
    }
    return y;
  }

  Ten4<T> backward(const Ten4<T>& gy) override {
    int oh = gy.h, ow = gy.w, ohw = oh * ow, ckk = in_c_ * k_ * k_;
    Ten4<T> gx(x_.n, in_c_, x_.h, x_.w);
    std::vector<T> gcol(size_t(ckk) * ohw);
    for (int in = 0; in < x_.n; ++in) {
      im2col(x_, in, oh, ow);
      gemm_nt(out_c_, ohw, ckk, gy.ptr(in), col_.data(), gw_.data(), true);
      for (int oc = 0; oc < out_c_; ++oc) {
        const T* row = gy.ptr(in, oc);
        T s = T(0);
        for (int j = 0; j < ohw; ++j) s += row[j];
        gb_[oc] += s;
      }
      gemm_tn(out_c_, ckk, ohw, w_.data(), gy.ptr(in), gcol.data());
      col2im(gcol, gx, in, oh, ow);
    }
    return gx;
  }

  void params(std::vector<ParamRef<T>>& out) override {
    out.push_back({&w_, &gw_});
    out.push_back({&b_, &gb_});
  }

  int out_channels() const { return out_c_; }

private:
  void im2col(const Ten4<T>& x, int in, int oh, int ow) {
    T* dst = col_.data();
    for (int ic = 0; ic < in_c_; ++ic) {
      const T* src = x.ptr(in, ic);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            int sy = oy * stride_ + ky - pad_;
            if (sy < 0 || sy >= x.h) {
              for (int ox = 0; ox < ow; ++ox) *dst++ = T(0);
              continue;
            }
            const T* srow = src + size_t(sy) * x.w;
            int sx = kx - pad_;
            for (int ox = 0; ox < ow; ++ox, sx += stride_)
              *dst++ = (sx >= 0 && sx < x.w) ? srow[sx] : T(0);
          }
        }
      }
    }
  }

  void col2im(const std::vector<T>& gcol, Ten4<T>& gx, int in, int oh, int ow) {
    const T* src = gcol.data();
    for (int ic = 0; ic < in_c_; ++ic) {
      T* dst = gx.ptr(in, ic);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            int sy = oy * stride_ + ky - pad_;
            if (sy < 0 || sy >= gx.h) {
              src += ow;
              continue;
            }
            T* drow = dst + size_t(sy) * gx.w;
            int sx = kx - pad_;
            for (int ox = 0; ox < ow; ++ox, sx += stride_) {
              if (sx >= 0 && sx < gx.w) drow[sx] += *src;
              ++src;
            }
          }
        }
      }
    }
  }

  int in_c_, out_c_, k_, stride_, pad_;
  std::vector<T> w_, b_, gw_, gb_;
  std::vector<T> col_;
  Ten4<T> x_;
};

template <typename T>
class Linear : public Layer<T> {
public:
  Linear(int in_f, int out_f, Rng& rng) : in_f_(in_f), out_f_(out_f) {
    w_.resize(size_t(out_f) * in_f);
    b_.resize(out_f, T(0));
    gw_.resize(w_.size(), T(0));
    gb_.resize(b_.size(), T(0));
    double std = std::sqrt(2.0 / double(in_f));
    for (auto& v : w_) v = T(rng.normal() * std);
  }

  // input (n, in_f, 1, 1)
  Ten4<T> forward(const Ten4<T>& x, bool) override {
    if (x.c != in_f_ || x.h != 1 || x.w != 1)
      throw std::invalid_argument("linear: expected (n, in_features, 1, 1) input");
    x_ = x;
    Ten4<T> y(x.n, out_f_, 1, 1);
    gemm_nt(x.n, in_f_, out_f_, x.v.data(), w_.data(), y.v.data());
    for (int in = 0; in < x.n; ++in)
      for (int o = 0; o < out_f_; ++o) y.v[size_t(in) * out_f_ + o] += b_[o];
    return y;
  }

  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> gx(x_.n, in_f_, 1, 1);
    gemm_nn(x_.n, out_f_, in_f_, gy.v.data(), w_.data(), gx.v.data());
    gemm_tn(x_.n, out_f_, in_f_, gy.v.data(), x_.v.data(), gw_.data(), true);
    for (int in = 0; in < x_.n; ++in)
      for (int o = 0; o < out_f_; ++o) gb_[o] += gy.v[size_t(in) * out_f_ + o];
    return gx;
  }

  void params(std::vector<ParamRef<T>>& out) override {
    out.push_back({&w_, &gw_});
    out.push_back({&b_, &gb_});
  }

private:
  int in_f_, out_f_;
  std::vector<T> w_, b_, gw_, gb_;
  Ten4<T> x_;
};

template <typename T>
class BatchNorm2d : public Layer<T> {
public:
  explicit BatchNorm2d(int c, double eps = 1e-5, double momentum = 0.1)
      : c_(c), eps_(eps), momentum_(momentum) {
    gamma_.resize(c, T(1));
    beta_.resize(c, T(0));
    ggamma_.resize(c, T(0));
    gbeta_.resize(c, T(0));
    run_mean_.resize(c, T(0));
    run_var_.resize(c, T(1));
  }

  Ten4<T> forward(const Ten4<T>& x, bool train) override {
    if (x.c != c_) throw std::invalid_argument("batchnorm: channel mismatch");
    Ten4<T> y(x.n, x.c, x.h, x.w);
    int plane = x.plane();
    size_t cnt = size_t(x.n) * plane;
    if (train) {
      xhat_ = Ten4<T>(x.n, x.c, x.h, x.w);
      invstd_.assign(c_, T(0));
      for (int ic = 0; ic < c_; ++ic) {
        T mean = T(0);
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.ptr(in, ic);
          for (int j = 0; j < plane; ++j) mean += p[j];
        }
        mean /= T(cnt);
        T var = T(0);
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.ptr(in, ic);
          for (int j = 0; j < plane; ++j) var += (p[j] - mean) * (p[j] - mean);
        }
        var /= T(cnt);  // biased, matches inference normalization
        T inv = T(1) / std::sqrt(var + T(eps_));
        invstd_[ic] = inv;
        run_mean_[ic] = T((1.0 - momentum_) * run_mean_[ic] + momentum_ * mean);
        run_var_[ic] = T((1.0 - momentum_) * run_var_[ic] + momentum_ * var);
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.ptr(in, ic);
          T* xh = xhat_.ptr(in, ic);
          T* py = y.ptr(in, ic);
          for (int j = 0; j < plane; ++j) {
            xh[j] = (p[j] - mean) * inv;
            py[j] = gamma_[ic] * xh[j] + beta_[ic];
          }
        }
      }
    } else {
      for (int ic = 0; ic < c_; ++ic) {
        T inv = T(1) / std::sqrt(run_var_[ic] + T(eps_));
        T scale = gamma_[ic] * inv;
        T shift = beta_[ic] - run_mean_[ic] * scale;
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.ptr(in, ic);
          T* py = y.ptr(in, ic);
          for (int j = 0; j < plane; ++j) py[j] = scale * p[j] + shift;
        }
      }
    }
    return y;
  }

  Ten4<T> backward(const Ten4<T>& gy) override {
    int plane = gy.plane();
    size_t cnt = size_t(gy.n) * plane;
    Ten4<T> gx(gy.n, gy.c, gy.h, gy.w);
    for (int ic = 0; ic < c_; ++ic) {
      T sum_gy = T(0), sum_gy_xhat = T(0);
      for (int in = 0; in < gy.n; ++in) {
        const T* g = gy.ptr(in, ic);
        const T* xh = xhat_.ptr(in, ic);
        for (int j = 0; j < plane; ++j) {
          sum_gy += g[j];
          sum_gy_xhat += g[j] * xh[j];
        }
      }
      gbeta_[ic] += sum_gy;
      ggamma_[ic] += sum_gy_xhat;
      T scale = gamma_[ic] * invstd_[ic] / T(cnt);
      for (int in = 0; in < gy.n; ++in) {
        const T* g = gy.ptr(in, ic);
        const T* xh = xhat_.ptr(in, ic);
        T* gxp = gx.ptr(in, ic);
        for (int j = 0; j < plane; ++j)
          gxp[j] = scale * (T(cnt) * g[j] - sum_gy - xh[j] * sum_gy_xhat);
      }
    }
    return gx;
  }

  void params(std::vector<ParamRef<T>>& out) override {
    out.push_back({&gamma_, &ggamma_});
    out.push_back({&beta_, &gbeta_});
  }

  void buffers(std::vector<std::vector<T>*>& out) override {
    out.push_back(&run_mean_);
    out.push_back(&run_var_);
  }

private:
  int c_;
  double eps_, momentum_;
  std::vector<T> gamma_, beta_, ggamma_, gbeta_, run_mean_, run_var_;
  Ten4<T> xhat_;
  std::vector<T> invstd_;
};

template <typename T>
class ReLU : public Layer<T> {
public:
  Ten4<T> forward(const Ten4<T>& x, bool) override {
    y_ = x;
    for (auto& v : y_.v) v = v > T(0) ? v : T(0);
    return y_;
  }
  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> gx = gy;
    for (size_t i = 0; i < gx.v.size(); ++i)
      if (y_.v[i] <= T(0)) gx.v[i] = T(0);
    return gx;
  }

private:
  Ten4<T> y_;
};

template <typename T>
class Elu : public Layer<T> {
public:
  explicit Elu(double alpha = 1.0) : alpha_(alpha) {}
  Ten4<T> forward(const Ten4<T>& x, bool) override {
    x_ = x;
    y_ = x;
    for (auto& v : y_.v)
      if (v < T(0)) v = T(alpha_) * (std::exp(v) - T(1));
    return y_;
  }
  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> gx = gy;
    for (size_t i = 0; i < gx.v.size(); ++i)
      if (x_.v[i] < T(0)) gx.v[i] *= y_.v[i] + T(alpha_);
    return gx;
  }

private:
  double alpha_;
  Ten4<T> x_, y_;
};

template <typename T>
class Sigmoid : public Layer<T> {
public:
  Ten4<T> forward(const Ten4<T>& x, bool) override {
    y_ = x;
    for (auto& v : y_.v) v = T(1) / (T(1) + std::exp(-v));
    return y_;
  }
  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> gx = gy;
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] *= y_.v[i] * (T(1) - y_.v[i]);
    return gx;
  }

private:
  Ten4<T> y_;
};

// inverted dropout; mask regeneration can be frozen for finite-difference runs
template <typename T>
class Dropout : public Layer<T> {
public:
  Dropout(double p, uint64_t seed) : p_(p), rng_(seed) {}

  Ten4<T> forward(const Ten4<T>& x, bool train) override {
    if (!train || p_ <= 0.0) {
      mask_.clear();
      return x;
    }
    if (!(freeze_mask && mask_.size() == x.v.size())) {
      mask_.resize(x.v.size());
      T scale = T(1.0 / (1.0 - p_));
      for (auto& m : mask_) m = rng_.uniform() < p_ ? T(0) : scale;
    }
    Ten4<T> y = x;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] *= mask_[i];
    return y;
  }

  Ten4<T> backward(const Ten4<T>& gy) override {
    if (mask_.empty()) return gy;
    Ten4<T> gx = gy;
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] *= mask_[i];
    return gx;
  }

  bool freeze_mask = false;

private:
  double p_;
  Rng rng_;
  std::vector<T> mask_;
};

template <typename T>
class MaxPool2d : public Layer<T> {
public:
  MaxPool2d(int k, int stride, int pad) : k_(k), stride_(stride), pad_(pad) {}

  Ten4<T> forward(const Ten4<T>& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    int oh = conv_out_extent(x.h, k_, stride_, pad_);
    int ow = conv_out_extent(x.w, k_, stride_, pad_);
    Ten4<T> y(x.n, x.c, oh, ow);
    argmax_.assign(y.size(), 0);
    size_t oi = 0;
    for (int in = 0; in < x.n; ++in) {
      for (int ic = 0; ic < x.c; ++ic) {
        const T* p = x.ptr(in, ic);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox, ++oi) {
            T best = -std::numeric_limits<T>::infinity();
            int best_idx = 0;
            for (int ky = 0; ky < k_; ++ky) {
              int sy = oy * stride_ + ky - pad_;
              if (sy < 0 || sy >= x.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                int sx = ox * stride_ + kx - pad_;
                if (sx < 0 || sx >= x.w) continue;
                T v = p[size_t(sy) * x.w + sx];
                if (v > best) {
                  best = v;
                  best_idx = sy * x.w + sx;
                }
              }
            }
            y.v[oi] = best;
            argmax_[oi] = best_idx;
          }
        }
      }
    }
    return y;
  }

  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    int plane_in = in_shape_[2] * in_shape_[3];
    int plane_out = gy.plane();
    size_t oi = 0;
    for (int in = 0; in < gy.n; ++in)
      for (int ic = 0; ic < gy.c; ++ic) {
        T* gp = gx.v.data() + (size_t(in) * gx.c + ic) * plane_in;
        const T* g = gy.v.data() + (size_t(in) * gy.c + ic) * plane_out;
        for (int j = 0; j < plane_out; ++j, ++oi) gp[argmax_[oi]] += g[j];
      }
    return gx;
  }

private:
  int k_, stride_, pad_;
  std::array<int, 4> in_shape_{};
  std::vector<int> argmax_;
};

template <typename T>
class GlobalAvgPool : public Layer<T> {
public:
  Ten4<T> forward(const Ten4<T>& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Ten4<T> y(x.n, x.c, 1, 1);
    int plane = x.plane();
    for (int in = 0; in < x.n; ++in)
      for (int ic = 0; ic < x.c; ++ic) {
        const T* p = x.ptr(in, ic);
        T s = T(0);
        for (int j = 0; j < plane; ++j) s += p[j];
        y.v[size_t(in) * x.c + ic] = s / T(plane);
      }
    return y;
  }
  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    int plane = in_shape_[2] * in_shape_[3];
    for (int in = 0; in < gx.n; ++in)
      for (int ic = 0; ic < gx.c; ++ic) {
        T g = gy.v[size_t(in) * gx.c + ic] / T(plane);
        T* p = gx.ptr(in, ic);
        for (int j = 0; j < plane; ++j) p[j] = g;
      }
    return gx;
  }

private:
  std::array<int, 4> in_shape_{};
};

// conv-bn-elu-conv-bn with identity (or 1x1-conv-bn) skip, elu after the add
template <typename T>
class ResidualBlock : public Layer<T> {
public:
  ResidualBlock(int in_c, int out_c, int stride, Rng& rng)
      : conv1_(in_c, out_c, 3, stride, 1, rng),
        bn1_(out_c),
        conv2_(out_c, out_c, 3, 1, 1, rng),
        bn2_(out_c) {
    if (stride != 1 || in_c != out_c) {
      down_conv_ = std::make_unique<Conv2d<T>>(in_c, out_c, 1, stride, 0, rng);
      down_bn_ = std::make_unique<BatchNorm2d<T>>(out_c);
    }
  }

  Ten4<T> forward(const Ten4<T>& x, bool train) override {
    Ten4<T> main = bn1_.forward(conv1_.forward(x, train), train);
    main = elu1_.forward(main, train);
    main = bn2_.forward(conv2_.forward(main, train), train);
    Ten4<T> skip = down_conv_ ? down_bn_->forward(down_conv_->forward(x, train), train) : x;
    for (size_t i = 0; i < main.v.size(); ++i) main.v[i] += skip.v[i];
    return elu_out_.forward(main, train);
  }

  Ten4<T> backward(const Ten4<T>& gy) override {
    Ten4<T> g = elu_out_.backward(gy);
    Ten4<T> g_main = conv1_.backward(bn1_.backward(elu1_.backward(
        conv2_.backward(bn2_.backward(g)))));
    Ten4<T> g_skip = down_conv_ ? down_conv_->backward(down_bn_->backward(g)) : g;
    for (size_t i = 0; i < g_main.v.size(); ++i) g_main.v[i] += g_skip.v[i];
    return g_main;
  }

  void params(std::vector<ParamRef<T>>& out) override {
    conv1_.params(out);
    bn1_.params(out);
    conv2_.params(out);
    bn2_.params(out);
    if (down_conv_) {
      down_conv_->params(out);
      down_bn_->params(out);
    }
  }

  void buffers(std::vector<std::vector<T>*>& out) override {
    bn1_.buffers(out);
    bn2_.buffers(out);
    if (down_bn_) down_bn_->buffers(out);
  }

private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  Elu<T> elu1_, elu_out_;
  std::unique_ptr<Conv2d<T>> down_conv_;
  std::unique_ptr<BatchNorm2d<T>> down_bn_;
};

// mean binary cross-entropy on probabilities; inputs clamped away from {0,1}
template <typename T>
T bce_loss(const Ten4<T>& p, const Ten4<T>& t, Ten4<T>& grad) {
  const T lo = T(1e-7), hi = T(1) - T(1e-7);
  grad = Ten4<T>(p.n, p.c, p.h, p.w);
  T loss = T(0);
  T inv_n = T(1) / T(p.size());
  for (size_t i = 0; i < p.v.size(); ++i) {
    T pc = std::min(hi, std::max(lo, p.v[i]));
    T tv = t.v[i];
    loss -= tv * std::log(pc) + (T(1) - tv) * std::log(T(1) - pc);
    grad.v[i] = (pc - tv) / (pc * (T(1) - pc)) * inv_n;
  }
  return loss * inv_n;
}

// mean squared error
template <typename T>
T mse_loss(const Ten4<T>& y, const Ten4<T>& t, Ten4<T>& grad) {
  grad = Ten4<T>(y.n, y.c, y.h, y.w);
  T loss = T(0);
  T inv_n = T(1) / T(y.size());
  for (size_t i = 0; i < y.v.size(); ++i) {
    T d = y.v[i] - t.v[i];
    loss += d * d;
    grad.v[i] = T(2) * d * inv_n;
  }
  return loss * inv_n;
}

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 128;
  int epochs = 100;
};

// v <- momentum * v - lr * g;  p <- p + v
template <typename T>
class Sgd {
public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(std::vector<ParamRef<T>>& params) {
    if (vel_.empty()) {
      vel_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) vel_[i].assign(params[i].w->size(), T(0));
    }
    for (size_t i = 0; i < params.size(); ++i) {
      auto& w = *params[i].w;
      auto& g = *params[i].g;
      auto& v = vel_[i];
      for (size_t j = 0; j < w.size(); ++j) {
        v[j] = T(momentum_) * v[j] - T(lr_) * g[j];
        w[j] += v[j];
      }
    }
  }

  static void zero_grads(std::vector<ParamRef<T>>& params) {
    for (auto& pr : params)
      for (auto& g : *pr.g) g = T(0);
  }

  std::vector<std::vector<T>>& velocity() { return vel_; }
  void set_lr(double lr) { lr_ = lr; }

private:
  double lr_, momentum_;
  std::vector<std::vector<T>> vel_;
};

}  // namespace beetag::nn
