#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dift/ops.h"
#include "dift/rng.h"
#include "dift/tensor.h"

namespace dift {

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, TensorT<T>>>;

// Fixed layer graph: conv 3->9 k16, conv 9->18 k11, then the dense chain
// S->50 per conv2 channel, 900->256->64->16->C. Only patch size, output
// channel count and dropout are configurable; everything else is the
// architecture itself.
struct ArchConfig {
  int patch_size = 35;
  int out_channels = 3;
  float dropout = 0.0f;

  static constexpr int kInChannels = 3;
  static constexpr int kConv1Out = 9;
  static constexpr int kConv1K = 16;
  static constexpr int kConv2Out = 18;
  static constexpr int kConv2K = 11;
  static constexpr int kRowHidden = 50;
  static constexpr int kHidden2 = 256;
  static constexpr int kHidden3 = 64;
  static constexpr int kHidden4 = 16;

  int side1() const { return patch_size - kConv1K + 1; }
  int side2() const { return side1() - kConv2K + 1; }
  int spatial() const { return side2() * side2(); }
  int flat2() const { return kConv2Out * kRowHidden; }

  void validate() const;
};

enum class InitScheme : std::uint8_t { FanIn = 0, Glorot = 1 };

struct Model {
  ArchConfig arch;
  InitScheme init_scheme = InitScheme::Glorot;
  NamedTensors<float> params;

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
};

std::vector<std::pair<std::string, std::vector<int>>> param_shapes(const ArchConfig& arch);
// FanIn: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)). Glorot: uniform with
// bound sqrt(6/(fan_in+fan_out)), which reaches useful loss in far fewer
// batches on the synthetic scenes; biases zero either way. The scheme byte is
// stored in the model file so runs are auditable.
Model init_model(const ArchConfig& arch, Rng& rng, InitScheme scheme = InitScheme::FanIn);
std::size_t param_count(const Model& model);

enum class Mode { Train, Infer };

template <typename T>
struct TapeT {
  bool valid = false;
  TensorT<T> x;
  TensorT<T> d0, m0, d1, m1, d2, m2, d3, m3, d4, m4, d5, m5;
  TensorT<T> mask0, mask1, mask2, mask3, mask4, mask5;
  TensorT<T> out;
};

using Tape = TapeT<float>;

template <typename T>
struct NetGrads {
  NamedTensors<T> params;
  TensorT<T> input;
};

template <typename T>
TensorT<T> net_forward(const NamedTensors<T>& params, const ArchConfig& arch,
                       const TensorT<T>& batch, Mode mode, Rng* rng, TapeT<T>* tape = nullptr,
                       std::vector<std::vector<int>>* shape_log = nullptr);

template <typename T>
NetGrads<T> net_backward(const NamedTensors<T>& params, const ArchConfig& arch,
                         const TapeT<T>& tape, const TensorT<T>& gout);

// Convenience wrappers over the model's own parameters.
Tensor forward(const Model& model, const Tensor& batch, Mode mode, Rng* rng = nullptr,
               Tape* tape = nullptr, std::vector<std::vector<int>>* shape_log = nullptr);

template <typename T>
NamedTensors<T> cast_params(const NamedTensors<float>& p) {
  NamedTensors<T> out;
  out.reserve(p.size());
  for (const auto& [name, t] : p) out.emplace_back(name, t.template cast<T>());
  return out;
}

// Worst relative error between analytic gradients and 64-bit central
// differences over a deterministic subsample of >= 200 parameters per tensor
// (whole tensor when smaller). grad_check_against allows checking externally
// supplied gradients, which the tests use for fault injection.
double grad_check(const Model& model, const Tensor& patch, const Tensor& target, double eps);
double grad_check_against(const Model& model, const Tensor& patch, const Tensor& target,
                          double eps, const NetGrads<double>& analytic);
NetGrads<double> analytic_grads64(const Model& model, const Tensor& patch, const Tensor& target);

// Model file: magic "DIFT", u32 version, u32 patch_size, u32 out_channels,
// f32 dropout, u8 init-scheme tag, then per tensor in canonical order:
// u16 name length, name, u8 rank, u32 dims, raw f32 data. Little-endian, no
// padding. Round-trips are byte-identical.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path, int expect_channels = -1);

// Writes each conv1 kernel (mean over input channels, min-max normalized) as
// {prefix}{k}.pgm for k in 0..8. A constant kernel maps to uniform 128.
std::vector<std::string> export_kernels(const Model& model, const std::string& prefix);

}  // namespace dift
