#include "dift/model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "dift/image.h"

static_assert(std::endian::native == std::endian::little,
              "model file writer assumes a little-endian host");

namespace dift {

void ArchConfig::validate() const {
  if (patch_size < kConv1K + kConv2K - 1)
    throw DataError("arch: patch size " + std::to_string(patch_size) + " leaves no conv output");
  if (out_channels < 1) throw DataError("arch: out_channels must be >= 1");
  if (!(dropout >= 0.f && dropout < 1.f)) throw DataError("arch: dropout must be in [0,1)");
}

std::vector<std::pair<std::string, std::vector<int>>> param_shapes(const ArchConfig& arch) {
  arch.validate();
  const int S = arch.spatial();
  const int C = arch.out_channels;
  return {
      {"conv1.w", {ArchConfig::kConv1Out, ArchConfig::kInChannels, ArchConfig::kConv1K, ArchConfig::kConv1K}},
      {"conv1.b", {ArchConfig::kConv1Out}},
      {"conv2.w", {ArchConfig::kConv2Out, ArchConfig::kConv1Out, ArchConfig::kConv2K, ArchConfig::kConv2K}},
      {"conv2.b", {ArchConfig::kConv2Out}},
      {"linear1.w", {ArchConfig::kRowHidden, S}},
      {"linear1.b", {ArchConfig::kRowHidden}},
      {"linear2.w", {ArchConfig::kHidden2, arch.flat2()}},
      {"linear2.b", {ArchConfig::kHidden2}},
      {"linear3.w", {ArchConfig::kHidden3, ArchConfig::kHidden2}},
      {"linear3.b", {ArchConfig::kHidden3}},
      {"linear4.w", {ArchConfig::kHidden4, ArchConfig::kHidden3}},
      {"linear4.b", {ArchConfig::kHidden4}},
      {"linear5.w", {C, ArchConfig::kHidden4}},
      {"linear5.b", {C}},
  };
}

namespace {

// fan_in/fan_out per weight tensor: receptive-field size times channel count
// for convs, column/row count for dense layers.
std::pair<int, int> fans(const std::vector<int>& dims) {
  if (dims.size() == 4) {
    const int k2 = dims[2] * dims[3];
    return {dims[1] * k2, dims[0] * k2};
  }
  return {dims[1], dims[0]};
}

template <typename T>
const TensorT<T>& find_param(const NamedTensors<T>& params, const char* name) {
  for (const auto& [n, t] : params)
    if (n == name) return t;
  throw DimError(std::string("missing parameter: ") + name);
}

template <typename T>
TensorT<T>& find_param(NamedTensors<T>& params, const char* name) {
  for (auto& [n, t] : params)
    if (n == name) return t;
  throw DimError(std::string("missing parameter: ") + name);
}

}  // namespace

Tensor& Model::param(const std::string& name) { return find_param(params, name.c_str()); }
const Tensor& Model::param(const std::string& name) const { return find_param(params, name.c_str()); }

Model init_model(const ArchConfig& arch, Rng& rng, InitScheme scheme) {
  arch.validate();
  Model m;
  m.arch = arch;
  m.init_scheme = scheme;
  for (const auto& [name, dims] : param_shapes(arch)) {
    Tensor t(dims);
    if (dims.size() > 1) {
      const auto [fan_in, fan_out] = fans(dims);
      const float bound = scheme == InitScheme::FanIn
                              ? 1.0f / std::sqrt(static_cast<float>(fan_in))
                              : std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
      for (auto& v : t.data) v = -bound + 2.0f * bound * rng.uniform_f32();
    }
    m.params.emplace_back(name, std::move(t));
  }
  return m;
}

std::size_t param_count(const Model& model) {
  std::size_t n = 0;
  for (const auto& [name, t] : model.params) n += t.numel();
  return n;
}

namespace {

template <typename T>
void mish_bwd_inplace(TensorT<T>& g, const TensorT<T>& pre) {
  for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] *= mish_grad_one(pre.data[i]);
}

template <typename T>
void mask_inplace(TensorT<T>& g, const TensorT<T>& mask) {
  if (mask.data.empty()) return;
  for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] *= mask.data[i];
}

}  // namespace

template <typename T>
TensorT<T> net_forward(const NamedTensors<T>& params, const ArchConfig& arch,
                       const TensorT<T>& batch, Mode mode, Rng* rng, TapeT<T>* tape,
                       std::vector<std::vector<int>>* shape_log) {
  arch.validate();
  if (batch.rank() != 4) throw DimError("forward: batch must be rank 4 [B,3,S,S]");
  const int ps = arch.patch_size;
  if (batch.dim(1) != ArchConfig::kInChannels || batch.dim(2) != ps || batch.dim(3) != ps)
    throw DimError("forward: batch is [" + std::to_string(batch.dim(1)) + "," +
                   std::to_string(batch.dim(2)) + "," + std::to_string(batch.dim(3)) +
                   "] per item, arch wants [3," + std::to_string(ps) + "," + std::to_string(ps) + "]");
  const bool train = mode == Mode::Train;
  if (train && arch.dropout > 0.f && rng == nullptr)
    throw std::invalid_argument("forward: train mode with dropout needs an rng");
  Rng fallback(0);
  Rng& r = rng ? *rng : fallback;

  const int B = batch.dim(0);
  const int s1 = arch.side1(), s2 = arch.side2(), S = arch.spatial();
  const auto& w1 = find_param(params, "conv1.w");
  const auto& b1 = find_param(params, "conv1.b");
  const auto& w2 = find_param(params, "conv2.w");
  const auto& b2 = find_param(params, "conv2.b");

  if (shape_log) shape_log->clear();
  auto log = [&](std::vector<int> s) {
    if (shape_log) shape_log->push_back(std::move(s));
  };

  TapeT<T> t;
  t.x = batch;

  TensorT<T> z0({B, ArchConfig::kConv1Out, s1, s1});
  for (int b = 0; b < B; ++b)
    detail::conv2d_fwd(batch.ptr() + static_cast<std::size_t>(b) * 3 * ps * ps, 3, ps, ps,
                       w1.ptr(), ArchConfig::kConv1Out, ArchConfig::kConv1K, b1.ptr(),
                       z0.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv1Out * s1 * s1);
  log({ArchConfig::kConv1Out, s1, s1});
  auto dr0 = dropout(z0, arch.dropout, train, r);
  t.d0 = std::move(dr0.out);
  t.mask0 = std::move(dr0.mask);
  t.m0 = mish(t.d0);

  TensorT<T> z1({B, ArchConfig::kConv2Out, s2, s2});
  for (int b = 0; b < B; ++b)
    detail::conv2d_fwd(t.m0.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv1Out * s1 * s1,
                       ArchConfig::kConv1Out, s1, s1, w2.ptr(), ArchConfig::kConv2Out,
                       ArchConfig::kConv2K, b2.ptr(),
                       z1.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv2Out * s2 * s2);
  log({ArchConfig::kConv2Out, s2, s2});
  z1.set_dims({B, ArchConfig::kConv2Out, S});
  log({ArchConfig::kConv2Out, S});
  auto dr1 = dropout(z1, arch.dropout, train, r);
  t.d1 = std::move(dr1.out);
  t.mask1 = std::move(dr1.mask);
  t.m1 = mish(t.d1);

  TensorT<T> z2 = linear(t.m1, find_param(params, "linear1.w"), find_param(params, "linear1.b"));
  log({ArchConfig::kConv2Out, ArchConfig::kRowHidden});
  z2.set_dims({B, arch.flat2()});
  log({arch.flat2()});
  auto dr2 = dropout(z2, arch.dropout, train, r);
  t.d2 = std::move(dr2.out);
  t.mask2 = std::move(dr2.mask);
  t.m2 = mish(t.d2);

  TensorT<T> z3 = linear(t.m2, find_param(params, "linear2.w"), find_param(params, "linear2.b"));
  log({ArchConfig::kHidden2});
  auto dr3 = dropout(z3, arch.dropout, train, r);
  t.d3 = std::move(dr3.out);
  t.mask3 = std::move(dr3.mask);
  t.m3 = mish(t.d3);

  TensorT<T> z4 = linear(t.m3, find_param(params, "linear3.w"), find_param(params, "linear3.b"));
  log({ArchConfig::kHidden3});
  auto dr4 = dropout(z4, arch.dropout, train, r);
  t.d4 = std::move(dr4.out);
  t.mask4 = std::move(dr4.mask);
  t.m4 = mish(t.d4);

  TensorT<T> z5 = linear(t.m4, find_param(params, "linear4.w"), find_param(params, "linear4.b"));
  log({ArchConfig::kHidden4});
  auto dr5 = dropout(z5, arch.dropout, train, r);
  t.d5 = std::move(dr5.out);
  t.mask5 = std::move(dr5.mask);
  t.m5 = mish(t.d5);

  t.out = linear(t.m5, find_param(params, "linear5.w"), find_param(params, "linear5.b"));
  log({arch.out_channels});

  TensorT<T> out = t.out;
  if (tape) {
    t.valid = true;
    *tape = std::move(t);
  }
  return out;
}

template <typename T>
NetGrads<T> net_backward(const NamedTensors<T>& params, const ArchConfig& arch,
                         const TapeT<T>& tape, const TensorT<T>& gout) {
  if (!tape.valid) throw std::logic_error("net_backward: no recorded forward pass");
  if (gout.dims != tape.out.dims) throw DimError("net_backward: upstream gradient dims mismatch");

  NetGrads<T> g;
  for (const auto& [name, dims] : param_shapes(arch)) g.params.emplace_back(name, TensorT<T>(dims));
  auto G = [&](const char* name) -> TensorT<T>& { return find_param(g.params, name); };

  const int B = tape.x.dim(0);
  const int ps = arch.patch_size;
  const int s1 = arch.side1(), s2 = arch.side2();

  auto l5 = linear_grad(tape.m5, find_param(params, "linear5.w"), gout);
  G("linear5.w") = std::move(l5.gw);
  G("linear5.b") = std::move(l5.gb);
  TensorT<T> gcur = std::move(l5.gin);
  mish_bwd_inplace(gcur, tape.d5);
  mask_inplace(gcur, tape.mask5);

  auto l4 = linear_grad(tape.m4, find_param(params, "linear4.w"), gcur);
  G("linear4.w") = std::move(l4.gw);
  G("linear4.b") = std::move(l4.gb);
  gcur = std::move(l4.gin);
  mish_bwd_inplace(gcur, tape.d4);
  mask_inplace(gcur, tape.mask4);

  auto l3 = linear_grad(tape.m3, find_param(params, "linear3.w"), gcur);
  G("linear3.w") = std::move(l3.gw);
  G("linear3.b") = std::move(l3.gb);
  gcur = std::move(l3.gin);
  mish_bwd_inplace(gcur, tape.d3);
  mask_inplace(gcur, tape.mask3);

  auto l2 = linear_grad(tape.m2, find_param(params, "linear2.w"), gcur);
  G("linear2.w") = std::move(l2.gw);
  G("linear2.b") = std::move(l2.gb);
  gcur = std::move(l2.gin);
  mish_bwd_inplace(gcur, tape.d2);
  mask_inplace(gcur, tape.mask2);
  gcur.set_dims({B, ArchConfig::kConv2Out, ArchConfig::kRowHidden});

  auto l1 = linear_grad(tape.m1, find_param(params, "linear1.w"), gcur);
  G("linear1.w") = std::move(l1.gw);
  G("linear1.b") = std::move(l1.gb);
  gcur = std::move(l1.gin);
  mish_bwd_inplace(gcur, tape.d1);
  mask_inplace(gcur, tape.mask1);
  gcur.set_dims({B, ArchConfig::kConv2Out, s2, s2});

  const auto& w2 = find_param(params, "conv2.w");
  TensorT<T> gm0({B, ArchConfig::kConv1Out, s1, s1});
  for (int b = 0; b < B; ++b)
    detail::conv2d_bwd(tape.m0.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv1Out * s1 * s1,
                       ArchConfig::kConv1Out, s1, s1, w2.ptr(), ArchConfig::kConv2Out,
                       ArchConfig::kConv2K,
                       gcur.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv2Out * s2 * s2,
                       gm0.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv1Out * s1 * s1,
                       G("conv2.w").ptr(), G("conv2.b").ptr());
  mish_bwd_inplace(gm0, tape.d0);
  mask_inplace(gm0, tape.mask0);

  const auto& w1 = find_param(params, "conv1.w");
  g.input = TensorT<T>(tape.x.dims);
  for (int b = 0; b < B; ++b)
    detail::conv2d_bwd(tape.x.ptr() + static_cast<std::size_t>(b) * 3 * ps * ps, 3, ps, ps,
                       w1.ptr(), ArchConfig::kConv1Out, ArchConfig::kConv1K,
                       gm0.ptr() + static_cast<std::size_t>(b) * ArchConfig::kConv1Out * s1 * s1,
                       g.input.ptr() + static_cast<std::size_t>(b) * 3 * ps * ps,
                       G("conv1.w").ptr(), G("conv1.b").ptr());
  return g;
}

template TensorT<float> net_forward<float>(const NamedTensors<float>&, const ArchConfig&,
                                           const TensorT<float>&, Mode, Rng*, TapeT<float>*,
                                           std::vector<std::vector<int>>*);
template TensorT<double> net_forward<double>(const NamedTensors<double>&, const ArchConfig&,
                                             const TensorT<double>&, Mode, Rng*, TapeT<double>*,
                                             std::vector<std::vector<int>>*);
template NetGrads<float> net_backward<float>(const NamedTensors<float>&, const ArchConfig&,
                                             const TapeT<float>&, const TensorT<float>&);
template NetGrads<double> net_backward<double>(const NamedTensors<double>&, const ArchConfig&,
                                               const TapeT<double>&, const TensorT<double>&);

Tensor forward(const Model& model, const Tensor& batch, Mode mode, Rng* rng, Tape* tape,
               std::vector<std::vector<int>>* shape_log) {
  return net_forward(model.params, model.arch, batch, mode, rng, tape, shape_log);
}

namespace {

constexpr std::uint64_t kDropoutProbeSeed = 7777;
constexpr std::uint64_t kIndexSampleSeed = 4242;

TensorT<double> as_batch64(const Tensor& patch, int patch_size) {
  TensorT<double> x = patch.cast<double>();
  if (x.rank() == 3) x.set_dims({1, x.dim(0), x.dim(1), x.dim(2)});
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != patch_size || x.dim(3) != patch_size)
    throw DimError("grad_check: patch must be [3,S,S] or [B,3,S,S] matching the arch");
  return x;
}

TensorT<double> as_target64(const Tensor& target, int B, int C) {
  TensorT<double> t = target.cast<double>();
  if (t.rank() == 1) t.set_dims({1, t.dim(0)});
  if (t.rank() != 2 || t.dim(0) != B || t.dim(1) != C)
    throw DimError("grad_check: target must be [C] or [B,C] matching the batch");
  return t;
}

double loss_at(const NamedTensors<double>& p, const ArchConfig& arch, const TensorT<double>& x,
               const TensorT<double>& t) {
  Rng r(kDropoutProbeSeed);
  TensorT<double> out = net_forward(p, arch, x, Mode::Train, &r);
  return mse_loss(out, t);
}

}  // namespace

NetGrads<double> analytic_grads64(const Model& model, const Tensor& patch, const Tensor& target) {
  NamedTensors<double> p = cast_params<double>(model.params);
  TensorT<double> x = as_batch64(patch, model.arch.patch_size);
  TensorT<double> t = as_target64(target, x.dim(0), model.arch.out_channels);
  Rng r(kDropoutProbeSeed);
  TapeT<double> tape;
  TensorT<double> out = net_forward(p, model.arch, x, Mode::Train, &r, &tape);
  return net_backward(p, model.arch, tape, mse_grad(out, t));
}

double grad_check_against(const Model& model, const Tensor& patch, const Tensor& target,
                          double eps, const NetGrads<double>& analytic) {
  if (eps <= 0.0) throw DataError("grad_check: eps must be positive");
  NamedTensors<double> p = cast_params<double>(model.params);
  TensorT<double> x = as_batch64(patch, model.arch.patch_size);
  TensorT<double> t = as_target64(target, x.dim(0), model.arch.out_channels);

  Rng idx_rng(kIndexSampleSeed);
  double worst = 0.0;
  for (std::size_t pi = 0; pi < p.size(); ++pi) {
    TensorT<double>& tensor = p[pi].second;
    const TensorT<double>& a = analytic.params[pi].second;
    const std::size_t n = tensor.numel();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::size_t take = n;
    if (n > 200) {
      take = 200;
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + idx_rng.uniform_u32(static_cast<std::uint32_t>(n - i));
        std::swap(idx[i], idx[j]);
      }
    }
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t k = idx[i];
      const double old = tensor.data[k];
      tensor.data[k] = old + eps;
      const double lp = loss_at(p, model.arch, x, t);
      tensor.data[k] = old - eps;
      const double lm = loss_at(p, model.arch, x, t);
      tensor.data[k] = old;
      const double num = (lp - lm) / (2.0 * eps);
      const double ana = a.data[k];
      const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

double grad_check(const Model& model, const Tensor& patch, const Tensor& target, double eps) {
  return grad_check_against(model, patch, target, eps, analytic_grads64(model, patch, target));
}

namespace {

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& s, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(s, u);
}

struct Reader {
  const std::string& s;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > s.size()) throw DataError("model file truncated: " + path);
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(
        static_cast<std::uint8_t>(s[pos]) | (static_cast<std::uint8_t>(s[pos + 1]) << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    const std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(s[pos++]);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = s.substr(pos, n);
    pos += n;
    return out;
  }
};

constexpr std::uint32_t kModelVersion = 1;

}  // namespace

void save_model(const Model& model, const std::string& path) {
  model.arch.validate();
  std::string out;
  out.reserve(param_count(model) * 4 + 512);
  out += "DIFT";
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.arch.patch_size));
  put_u32(out, static_cast<std::uint32_t>(model.arch.out_channels));
  put_f32(out, model.arch.dropout);
  out.push_back(static_cast<char>(model.init_scheme));
  for (const auto& [name, t] : model.params) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.rank()));
    for (int d : t.dims) put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.data.data()), t.numel() * sizeof(float));
  }
  atomic_write_file(path, out);
}

Model load_model(const std::string& path, int expect_channels) {
  const std::string s = read_file(path);
  Reader r{s, 0, path};
  if (r.bytes(4) != "DIFT") throw DataError("bad model magic: " + path);
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw DataError("unsupported model version " + std::to_string(version) + ": " + path);
  Model m;
  m.arch.patch_size = static_cast<int>(r.u32());
  m.arch.out_channels = static_cast<int>(r.u32());
  m.arch.dropout = r.f32();
  const std::uint8_t tag = r.u8();
  if (tag > 1) throw DataError("unknown init-scheme tag in model file: " + path);
  m.init_scheme = static_cast<InitScheme>(tag);
  m.arch.validate();
  if (expect_channels >= 0 && m.arch.out_channels != expect_channels)
    throw DataError("model arch mismatch: file has " + std::to_string(m.arch.out_channels) +
                    " output channels, caller requires " + std::to_string(expect_channels));
  for (const auto& [name, dims] : param_shapes(m.arch)) {
    const std::uint16_t len = r.u16();
    const std::string got = r.bytes(len);
    if (got != name)
      throw DataError("model file tensor order: expected '" + name + "', got '" + got + "': " + path);
    const int rank = r.u8();
    if (rank != static_cast<int>(dims.size()))
      throw DataError("model file tensor '" + name + "' rank mismatch: " + path);
    for (int d : dims) {
      const std::uint32_t file_d = r.u32();
      if (file_d != static_cast<std::uint32_t>(d))
        throw DataError("model file tensor '" + name + "' dim mismatch: " + path);
    }
    Tensor t(dims);
    r.need(t.numel() * sizeof(float));
    std::memcpy(t.data.data(), s.data() + r.pos, t.numel() * sizeof(float));
    r.pos += t.numel() * sizeof(float);
    m.params.emplace_back(name, std::move(t));
  }
  if (r.pos != s.size()) throw DataError("trailing bytes after model data: " + path);
  return m;
}

std::vector<std::string> export_kernels(const Model& model, const std::string& prefix) {
  const Tensor& w = model.param("conv1.w");
  const int O = w.dim(0), C = w.dim(1), K = w.dim(2);
  std::vector<std::string> paths;
  for (int o = 0; o < O; ++o) {
    std::vector<double> mean(static_cast<std::size_t>(K) * K, 0.0);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < K * K; ++i)
        mean[static_cast<std::size_t>(i)] += w.data[(static_cast<std::size_t>(o) * C + c) * K * K + i];
    double lo = mean[0], hi = mean[0];
    for (double v : mean) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    ImageBuf img(K, K, 1);
    for (int i = 0; i < K * K; ++i)
      img.data[static_cast<std::size_t>(i)] =
          hi > lo ? static_cast<std::uint8_t>(std::lround((mean[static_cast<std::size_t>(i)] - lo) / (hi - lo) * 255.0))
                  : 128;
    const std::string p = prefix + std::to_string(o) + ".pgm";
    save_pnm(img, p);
    paths.push_back(p);
  }
  return paths;
}

}  // namespace dift
