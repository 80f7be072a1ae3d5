#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dift/errors.h"

namespace dift {

// Dense row-major tensor, rank 1..4.
template <typename T>
struct TensorT {
  std::vector<int> dims;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<int> d) : dims(std::move(d)), data(checked_size(dims)) {}

  TensorT(std::vector<int> d, std::vector<T> v) : dims(std::move(d)), data(std::move(v)) {
    if (data.size() != checked_size(dims)) throw DimError("tensor: data size does not match dims");
  }

  static std::size_t checked_size(const std::vector<int>& d) {
    if (d.empty() || d.size() > 4) throw DimError("tensor: rank must be 1..4, got " + std::to_string(d.size()));
    std::size_t n = 1;
    for (int x : d) {
      if (x < 1) throw DimError("tensor: dims must be >= 1");
      n *= static_cast<std::size_t>(x);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(dims.size()); }
  int dim(int i) const { return dims[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  // View-style reshape: same element count, data buffer reused in place.
  void set_dims(std::vector<int> d) {
    if (checked_size(d) != data.size()) throw DimError("tensor: reshape changes element count");
    dims = std::move(d);
  }

  TensorT reshaped(std::vector<int> d) const {
    TensorT out = *this;
    out.set_dims(std::move(d));
    return out;
  }

  bool same_dims(const TensorT& o) const { return dims == o.dims; }

  T& at(int i) { return data[static_cast<std::size_t>(i)]; }
  T at(int i) const { return data[static_cast<std::size_t>(i)]; }
  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * dims[1] + j]; }
  T at(int i, int j) const { return data[static_cast<std::size_t>(i) * dims[1] + j]; }
  T& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  T at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  T& at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k) * dims[3] + l];
  }
  T at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k) * dims[3] + l];
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.dims = dims;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  static TensorT zeros_like(const TensorT& o) { return TensorT(o.dims); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace dift
