#pragma once

#include <cmath>
#include <string>

#include "dift/rng.h"
#include "dift/tensor.h"

namespace dift {

namespace detail {

// Valid cross-correlation, stride 1. Accumulation order per output element is
// (c, i, j), independent of the input extent, so running the same kernel over
// a patch or over a full image yields bit-identical values at matching sites.
template <typename T>
void conv2d_fwd(const T* in, int C, int H, int W, const T* w, int O, int K, const T* b, T* out) {
  const int OH = H - K + 1, OW = W - K + 1;
  for (int o = 0; o < O; ++o) {
    T* dst = out + static_cast<std::size_t>(o) * OH * OW;
    for (int i = 0; i < OH * OW; ++i) dst[i] = b[o];
  }
  for (int o = 0; o < O; ++o) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          const T wv = w[((static_cast<std::size_t>(o) * C + c) * K + i) * K + j];
          const T* src = in + (static_cast<std::size_t>(c) * H + i) * W + j;
          T* dst = out + static_cast<std::size_t>(o) * OH * OW;
          for (int y = 0; y < OH; ++y) {
            const T* sr = src + static_cast<std::size_t>(y) * W;
            T* dr = dst + static_cast<std::size_t>(y) * OW;
            for (int x = 0; x < OW; ++x) dr[x] += wv * sr[x];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_bwd(const T* in, int C, int H, int W, const T* w, int O, int K, const T* gout,
                T* gin, T* gw, T* gb) {
  const int OH = H - K + 1, OW = W - K + 1;
  for (int o = 0; o < O; ++o) {
    const T* go = gout + static_cast<std::size_t>(o) * OH * OW;
    T acc = 0;
    for (int i = 0; i < OH * OW; ++i) acc += go[i];
    gb[o] += acc;
  }
  for (int o = 0; o < O; ++o) {
    const T* go = gout + static_cast<std::size_t>(o) * OH * OW;
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          const std::size_t widx = ((static_cast<std::size_t>(o) * C + c) * K + i) * K + j;
          const T wv = w[widx];
          const T* src = in + (static_cast<std::size_t>(c) * H + i) * W + j;
          T* gsrc = gin + (static_cast<std::size_t>(c) * H + i) * W + j;
          T acc = 0;
          for (int y = 0; y < OH; ++y) {
            const T* sr = src + static_cast<std::size_t>(y) * W;
            T* gr = gsrc + static_cast<std::size_t>(y) * W;
            const T* gor = go + static_cast<std::size_t>(y) * OW;
            for (int x = 0; x < OW; ++x) {
              acc += gor[x] * sr[x];
              gr[x] += wv * gor[x];
            }
          }
          gw[widx] += acc;
        }
      }
    }
  }
}

// out[l,m] = b[m] + dot(in[l,:], w[m,:]) over L leading rows.
template <typename T>
void linear_fwd(const T* in, std::size_t L, int N, const T* w, int M, const T* b, T* out) {
  for (std::size_t l = 0; l < L; ++l) {
    const T* ir = in + l * N;
    T* orow = out + l * M;
    for (int m = 0; m < M; ++m) {
      const T* wr = w + static_cast<std::size_t>(m) * N;
      T acc = b[m];
      for (int n = 0; n < N; ++n) acc += ir[n] * wr[n];
      orow[m] = acc;
    }
  }
}

template <typename T>
void linear_bwd(const T* in, std::size_t L, int N, const T* w, int M, const T* gout,
                T* gin, T* gw, T* gb) {
  for (std::size_t l = 0; l < L; ++l) {
    const T* ir = in + l * N;
    const T* gor = gout + l * M;
    T* gir = gin + l * N;
    for (int m = 0; m < M; ++m) {
      const T g = gor[m];
      const T* wr = w + static_cast<std::size_t>(m) * N;
      T* gwr = gw + static_cast<std::size_t>(m) * N;
      for (int n = 0; n < N; ++n) {
        gir[n] += g * wr[n];
        gwr[n] += g * ir[n];
      }
      gb[m] += g;
    }
  }
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d_valid(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b) {
  if (in.rank() != 3) throw DimError("conv2d_valid: input must be rank 3 [C,H,W]");
  if (w.rank() != 4) throw DimError("conv2d_valid: weight must be rank 4 [O,C,K,K]");
  if (b.rank() != 1) throw DimError("conv2d_valid: bias must be rank 1 [O]");
  if (w.dim(2) != w.dim(3)) throw DimError("conv2d_valid: kernel axes 2 and 3 must be equal");
  if (in.dim(0) != w.dim(1))
    throw DimError("conv2d_valid: input channel axis " + std::to_string(in.dim(0)) +
                   " does not match weight channel axis " + std::to_string(w.dim(1)));
  if (b.dim(0) != w.dim(0))
    throw DimError("conv2d_valid: bias axis " + std::to_string(b.dim(0)) +
                   " does not match weight output axis " + std::to_string(w.dim(0)));
  const int K = w.dim(2);
  if (in.dim(1) < K || in.dim(2) < K)
    throw DimError("conv2d_valid: spatial axes smaller than kernel");
  TensorT<T> out({w.dim(0), in.dim(1) - K + 1, in.dim(2) - K + 1});
  detail::conv2d_fwd(in.ptr(), in.dim(0), in.dim(1), in.dim(2), w.ptr(), w.dim(0), K, b.ptr(),
                     out.ptr());
  return out;
}

template <typename T>
struct ConvGrads {
  TensorT<T> gin, gw, gb;
};

template <typename T>
ConvGrads<T> conv2d_valid_grad(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& gout) {
  ConvGrads<T> g{TensorT<T>(in.dims), TensorT<T>(w.dims), TensorT<T>({w.dim(0)})};
  detail::conv2d_bwd(in.ptr(), in.dim(0), in.dim(1), in.dim(2), w.ptr(), w.dim(0), w.dim(2),
                     gout.ptr(), g.gin.ptr(), g.gw.ptr(), g.gb.ptr());
  return g;
}

template <typename T>
TensorT<T> linear(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b) {
  if (w.rank() != 2) throw DimError("linear: weight must be rank 2 [M,N]");
  if (b.rank() != 1 || b.dim(0) != w.dim(0))
    throw DimError("linear: bias axis does not match weight output axis");
  const int N = w.dim(1), M = w.dim(0);
  if (in.dims.back() != N)
    throw DimError("linear: input last axis " + std::to_string(in.dims.back()) +
                   " does not match weight input axis " + std::to_string(N));
  std::vector<int> odims = in.dims;
  odims.back() = M;
  TensorT<T> out(odims);
  detail::linear_fwd(in.ptr(), in.numel() / N, N, w.ptr(), M, b.ptr(), out.ptr());
  return out;
}

template <typename T>
struct LinearGrads {
  TensorT<T> gin, gw, gb;
};

template <typename T>
LinearGrads<T> linear_grad(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& gout) {
  LinearGrads<T> g{TensorT<T>(in.dims), TensorT<T>(w.dims), TensorT<T>({w.dim(0)})};
  detail::linear_bwd(in.ptr(), in.numel() / w.dim(1), w.dim(1), w.ptr(), w.dim(0), gout.ptr(),
                     g.gin.ptr(), g.gw.ptr(), g.gb.ptr());
  return g;
}

// Softplus input clamped at 20: exp never overflows and the error is < 1e-8.
template <typename T>
inline T mish_one(T x) {
  const T sp = std::log1p(std::exp(std::min(x, T(20))));
  return x * std::tanh(sp);
}

template <typename T>
inline T mish_grad_one(T x) {
  const T sp = std::log1p(std::exp(std::min(x, T(20))));
  const T t = std::tanh(sp);
  const T ds = x < T(20) ? T(1) / (T(1) + std::exp(-x)) : T(0);
  return t + x * (T(1) - t * t) * ds;
}

template <typename T>
TensorT<T> mish(const TensorT<T>& x) {
  TensorT<T> out(x.dims);
  for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = mish_one(x.data[i]);
  return out;
}

// Inverted dropout. mask holds the applied multiplier per element (0 or
// 1/(1-p)); identity passes are signalled by an empty mask and consume no rng.
template <typename T>
struct DropoutResult {
  TensorT<T> out;
  TensorT<T> mask;
};

template <typename T>
DropoutResult<T> dropout(const TensorT<T>& x, float p, bool training, Rng& rng) {
  if (p < 0.f || p >= 1.f) throw DataError("dropout: p must be in [0,1)");
  DropoutResult<T> r;
  if (!training || p == 0.f) {
    r.out = x;
    return r;
  }
  r.out = TensorT<T>(x.dims);
  r.mask = TensorT<T>(x.dims);
  const T scale = T(1) / (T(1) - T(p));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T m = rng.uniform_f32() >= p ? scale : T(0);
    r.mask.data[i] = m;
    r.out.data[i] = x.data[i] * m;
  }
  return r;
}

template <typename T>
double mse_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (pred.dims != target.dims)
    throw DimError("mse_loss: pred and target dims must match exactly (no broadcasting)");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.numel());
}

template <typename T>
TensorT<T> mse_grad(const TensorT<T>& pred, const TensorT<T>& target) {
  if (pred.dims != target.dims)
    throw DimError("mse_grad: pred and target dims must match exactly (no broadcasting)");
  TensorT<T> g(pred.dims);
  const T inv = T(2) / static_cast<T>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) g.data[i] = inv * (pred.data[i] - target.data[i]);
  return g;
}

}  // namespace dift
