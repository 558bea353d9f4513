#pragma once

// Convolutional UNet noise predictor eps_theta(z_t, t, c_tau, tau).
//
// Input is the channel concatenation of z_t and the (upsampled) augmented
// conditioning image. Each level has `res_blocks_per_level` residual blocks
// followed by a stride-2 conv downsample; the decoder mirrors it with skip
// concatenation and nearest-neighbour upsampling. There are no attention
// layers. t and tau get separate sinusoidal embeddings and projections whose
// sum is added as a per-channel bias inside every residual block. The output
// also carries an embedding-gated per-channel linear term a*z + b*c + d.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/diffusion/sampler.hpp"
#include "blindsr/nn/graph.hpp"
#include "blindsr/nn/tensor.hpp"

namespace blindsr::denoiser {

struct UNetConfig {
  int image_channels = 3;
  int base_channels = 32;
  std::vector<int> channel_multipliers = {1, 2, 4};
  int res_blocks_per_level = 2;
  int embedding_dim = 64;
  int norm_groups = 8;

  int levels() const { return static_cast<int>(channel_multipliers.size()); }
  int divisor() const { return 1 << (levels() - 1); }

  void validate() const {
    if (image_channels != 1 && image_channels != 3) throw InvalidArgument("image_channels must be 1 or 3");
    if (base_channels <= 0 || res_blocks_per_level <= 0) {
      throw InvalidArgument("base_channels and res_blocks_per_level must be positive");
    }
    if (channel_multipliers.empty()) throw InvalidArgument("channel_multipliers must not be empty");
    for (int m : channel_multipliers) {
      if (m <= 0) throw InvalidArgument("channel multipliers must be positive");
    }
    if (embedding_dim <= 0 || embedding_dim % 2 != 0) throw InvalidArgument("embedding_dim must be positive and even");
    if (norm_groups <= 0 || base_channels % norm_groups != 0) {
      throw InvalidArgument("base_channels must be divisible by norm_groups");
    }
  }

  void check_input(int h, int w) const {
    const int d = divisor();
    if (h % d != 0 || w % d != 0) {
      throw InvalidArgument("spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                            " must be divisible by " + std::to_string(d) + " (2^(levels-1))");
    }
  }
};

inline void to_json(nlohmann::json& j, const UNetConfig& c) {
  j = {{"image_channels", c.image_channels},           {"base_channels", c.base_channels},
       {"channel_multipliers", c.channel_multipliers}, {"res_blocks_per_level", c.res_blocks_per_level},
       {"embedding_dim", c.embedding_dim},             {"norm_groups", c.norm_groups}};
}

inline void from_json(const nlohmann::json& j, UNetConfig& c) {
  UNetConfig d;
  c.image_channels = j.value("image_channels", d.image_channels);
  c.base_channels = j.value("base_channels", d.base_channels);
  c.channel_multipliers = j.value("channel_multipliers", d.channel_multipliers);
  c.res_blocks_per_level = j.value("res_blocks_per_level", d.res_blocks_per_level);
  c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  c.norm_groups = j.value("norm_groups", d.norm_groups);
  c.validate();
}

/// Sinusoidal embedding of t * 1000 with frequencies exp(-log(10^4) i / (dim/2)).
template <class T>
nn::Tensor<T> timestep_embedding(const std::vector<double>& ts, int dim) {
  const int n = static_cast<int>(ts.size());
  const int half = dim / 2;
  nn::Tensor<T> out({n, dim});
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < half; ++k) {
      const double f = std::exp(-std::log(10000.0) * k / half);
      const double a = ts[static_cast<std::size_t>(i)] * 1000.0 * f;
      out.data[static_cast<std::size_t>(i * dim + k)] = static_cast<T>(std::sin(a));
      out.data[static_cast<std::size_t>(i * dim + half + k)] = static_cast<T>(std::cos(a));
    }
  }
  return out;
}

namespace detail {

// Builds (init) or replays (forward) the same layer sequence so that the
// parameter layout is defined in exactly one place.
template <class T>
class Builder {
 public:
  // Init mode.
  Builder(nn::ParamStore<T>& store, Prng& prng) : store_(&store), prng_(&prng) {}
  // Forward mode.
  Builder(nn::Graph<T>& g, nn::ParamStore<T>& store) : g_(&g), store_(&store) {}
  Builder(nn::Graph<T>& g, const nn::ParamStore<T>& store) : g_(&g), cstore_(&store) {}

  using Var = typename nn::Graph<T>::Var;

  bool init() const { return g_ == nullptr; }

  Var conv(const std::string& name, Var x, int ci, int co, int k, int stride, bool zero = false) {
    if (init()) {
      const double std = zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(ci * k * k));
      store_->add(name + ".weight", nn::random_normal<T>(*prng_, {co, ci, k, k}, std));
      store_->add(name + ".bias", nn::Tensor<T>({co}));
      return {};
    }
    return g_->conv2d(x, p(name + ".weight"), p(name + ".bias"), stride, k / 2);
  }

  Var norm(const std::string& name, Var x, int c, int groups) {
    if (init()) {
      store_->add(name + ".gamma", nn::Tensor<T>({c}, T(1)));
      store_->add(name + ".beta", nn::Tensor<T>({c}));
      return {};
    }
    return g_->group_norm(x, p(name + ".gamma"), p(name + ".beta"), groups);
  }

  Var dense(const std::string& name, Var x, int in, int out, bool zero = false) {
    if (init()) {
      const double std = zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in));
      store_->add(name + ".weight", nn::random_normal<T>(*prng_, {out, in}, std));
      store_->add(name + ".bias", nn::Tensor<T>({out}));
      return {};
    }
    return g_->linear(x, p(name + ".weight"), p(name + ".bias"));
  }

  Var silu(Var x) { return init() ? Var{} : g_->silu(x); }
  Var add(Var a, Var b) { return init() ? Var{} : g_->add(a, b); }
  Var cat(Var a, Var b) { return init() ? Var{} : g_->concat_channels(a, b); }
  Var up(Var x) { return init() ? Var{} : g_->upsample2(x); }
  Var bias(Var x, Var e) { return init() ? Var{} : g_->add_channel_bias(x, e); }
  Var mul(Var x, Var s) { return init() ? Var{} : g_->mul_channel_scale(x, s); }
  Var slice(Var x, int start, int count) { return init() ? Var{} : g_->slice_channels(x, start, count); }

 private:
  Var p(const std::string& name) { return store_ ? g_->param(*store_, name) : g_->param(*cstore_, name); }

  nn::Graph<T>* g_ = nullptr;
  nn::ParamStore<T>* store_ = nullptr;
  const nn::ParamStore<T>* cstore_ = nullptr;
  Prng* prng_ = nullptr;
};

template <class T>
typename nn::Graph<T>::Var res_block(Builder<T>& b, const std::string& name, typename nn::Graph<T>::Var x,
                                     typename nn::Graph<T>::Var emb, int ci, int co, const UNetConfig& cfg) {
  using Var = typename nn::Graph<T>::Var;
  Var h = b.norm(name + ".gn1", x, ci, cfg.norm_groups);
  h = b.conv(name + ".conv1", b.silu(h), ci, co, 3, 1);
  h = b.bias(h, b.dense(name + ".emb", b.silu(emb), cfg.embedding_dim, co));
  h = b.norm(name + ".gn2", h, co, cfg.norm_groups);
  h = b.conv(name + ".conv2", b.silu(h), co, co, 3, 1, /*zero=*/true);
  const Var skip = ci == co ? x : b.conv(name + ".skip", x, ci, co, 1, 1);
  return b.add(skip, h);
}

template <class T>
typename nn::Graph<T>::Var embed(Builder<T>& b, const std::string& name, typename nn::Graph<T>::Var x, int dim) {
  auto h = b.dense(name + ".fc1", x, dim, dim);
  return b.dense(name + ".fc2", b.silu(h), dim, dim);
}

// Shared layer walk for init and forward. In init mode Var values are ignored.
template <class T>
typename nn::Graph<T>::Var unet_walk(Builder<T>& b, const UNetConfig& cfg, typename nn::Graph<T>::Var input,
                                     typename nn::Graph<T>::Var t_sin, typename nn::Graph<T>::Var tau_sin) {
  using Var = typename nn::Graph<T>::Var;
  const int C = cfg.image_channels;
  const int D = cfg.embedding_dim;
  const Var emb = b.add(embed(b, "temb", t_sin, D), embed(b, "tauemb", tau_sin, D));

  std::vector<Var> skips;
  std::vector<int> skip_ch;
  int ch = cfg.base_channels;
  Var h = b.conv("conv_in", input, 2 * C, ch, 3, 1);
  skips.push_back(h);
  skip_ch.push_back(ch);
  for (int i = 0; i < cfg.levels(); ++i) {
    const int out = cfg.base_channels * cfg.channel_multipliers[static_cast<std::size_t>(i)];
    for (int j = 0; j < cfg.res_blocks_per_level; ++j) {
      h = res_block(b, "enc." + std::to_string(i) + ".res" + std::to_string(j), h, emb, ch, out, cfg);
      ch = out;
      skips.push_back(h);
      skip_ch.push_back(ch);
    }
    if (i + 1 < cfg.levels()) {
      h = b.conv("enc." + std::to_string(i) + ".down", h, ch, ch, 3, 2);
      skips.push_back(h);
      skip_ch.push_back(ch);
    }
  }
  h = res_block(b, "mid.res0", h, emb, ch, ch, cfg);
  h = res_block(b, "mid.res1", h, emb, ch, ch, cfg);
  for (int i = cfg.levels() - 1; i >= 0; --i) {
    const int out = cfg.base_channels * cfg.channel_multipliers[static_cast<std::size_t>(i)];
    for (int j = 0; j <= cfg.res_blocks_per_level; ++j) {
      const Var s = skips.back();
      const int sc = skip_ch.back();
      skips.pop_back();
      skip_ch.pop_back();
      h = res_block(b, "dec." + std::to_string(i) + ".res" + std::to_string(j), b.cat(h, s), emb, ch + sc, out, cfg);
      ch = out;
    }
    if (i > 0) h = b.conv("dec." + std::to_string(i) + ".up", b.up(h), ch, ch, 3, 1);
  }
  h = b.silu(b.norm("out.gn", h, ch, cfg.norm_groups));
  h = b.conv("out.conv", h, ch, C, 3, 1, /*zero=*/true);

  // Per-channel linear head on z and c, gated by the embedding.
  const Var e = b.silu(emb);
  h = b.add(h, b.mul(b.slice(input, 0, C), b.dense("head.a", e, D, C, true)));
  h = b.add(h, b.mul(b.slice(input, C, C), b.dense("head.b", e, D, C, true)));
  return b.bias(h, b.dense("head.d", e, D, C, true));
}

}  // namespace detail

/// LeCun-normal conv/linear weights, zero biases, unit GN scales. The last
/// conv of every residual branch and the output conv start at zero, so a
/// fresh network predicts eps = 0 and each residual block reduces to its skip.
template <class T = float>
nn::ParamStore<T> init_params(Prng& prng, const UNetConfig& cfg) {
  cfg.validate();
  nn::ParamStore<T> store;
  detail::Builder<T> b(store, prng);
  detail::unet_walk<T>(b, cfg, {}, {}, {});
  return store;
}

/// Records the UNet forward pass on `g`. `input` is NCHW with 2C channels
/// (z_t then c_tau); returns an NCHW node with C channels.
template <class T, class Store>
typename nn::Graph<T>::Var unet_forward(nn::Graph<T>& g, Store& params, const UNetConfig& cfg,
                                        typename nn::Graph<T>::Var input, const std::vector<double>& t,
                                        const std::vector<double>& tau) {
  const nn::Tensor<T>& x = g.value(input);
  if (x.rank() != 4 || x.dim(1) != 2 * cfg.image_channels) throw InvalidArgument("unet: bad input channels");
  cfg.check_input(x.dim(2), x.dim(3));
  if (t.size() != static_cast<std::size_t>(x.dim(0)) || tau.size() != t.size()) {
    throw InvalidArgument("unet: t/tau batch size mismatch");
  }
  detail::Builder<T> b(g, params);
  auto t_sin = g.constant(timestep_embedding<T>(t, cfg.embedding_dim));
  auto tau_sin = g.constant(timestep_embedding<T>(tau, cfg.embedding_dim));
  return detail::unet_walk<T>(b, cfg, input, t_sin, tau_sin);
}

namespace detail {

template <class T>
void pack_into(nn::Tensor<T>& out, std::span<const ImageTensor> imgs, int channel_offset) {
  const int N = out.dim(0), Ct = out.dim(1), H = out.dim(2), W = out.dim(3);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    const ImageTensor& img = imgs[static_cast<std::size_t>(n)];
    if (img.height() != H || img.width() != W || img.channels() != imgs[0].channels()) {
      throw InvalidArgument("all images in a batch must share one shape");
    }
    const int C = img.channels();
    auto v = img.values();
    for (int ch = 0; ch < C; ++ch) {
      T* dst = &out.data[(static_cast<std::size_t>(n) * Ct + channel_offset + ch) * hw];
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(v[i * C + ch]);
    }
  }
}

}  // namespace detail

/// Per-sample HWC images -> one NCHW tensor.
template <class T>
nn::Tensor<T> pack_images(std::span<const ImageTensor> imgs) {
  if (imgs.empty()) throw InvalidArgument("pack_images: empty batch");
  nn::Tensor<T> out({static_cast<int>(imgs.size()), imgs[0].channels(), imgs[0].height(), imgs[0].width()});
  detail::pack_into(out, imgs, 0);
  return out;
}

/// Packs per-sample (z, c) pairs into one NCHW tensor of 2C channels.
template <class T>
nn::Tensor<T> pack_inputs(std::span<const ImageTensor> z, std::span<const ImageTensor> c) {
  if (z.empty() || z.size() != c.size()) throw InvalidArgument("pack_inputs: batch mismatch");
  if (!z[0].same_shape(c[0])) throw InvalidArgument("pack_inputs: z and c shapes differ");
  const int C = z[0].channels();
  nn::Tensor<T> out({static_cast<int>(z.size()), 2 * C, z[0].height(), z[0].width()});
  detail::pack_into(out, z, 0);
  detail::pack_into(out, c, C);
  return out;
}

/// NCHW -> per-sample HWC latents.
template <class T>
std::vector<ImageTensor> unpack_output(const nn::Tensor<T>& t) {
  const int N = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  std::vector<ImageTensor> out;
  out.reserve(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    ImageTensor img(H, W, C, Domain::latent);
    auto v = img.values();
    for (int ch = 0; ch < C; ++ch) {
      const T* src = &t.data[(static_cast<std::size_t>(n) * C + ch) * hw];
      for (std::size_t i = 0; i < hw; ++i) v[i * C + ch] = static_cast<float>(src[i]);
    }
    out.push_back(std::move(img));
  }
  return out;
}

/// Inference-only batched forward.
inline std::vector<ImageTensor> unet_apply(const nn::ParamStore<float>& params, const UNetConfig& cfg,
                                           std::span<const ImageTensor> z, std::span<const ImageTensor> c,
                                           const std::vector<double>& t, const std::vector<double>& tau) {
  nn::Graph<float> g(nn::Graph<float>::Mode::inference);
  auto in = g.constant(pack_inputs<float>(z, c));
  auto out = unet_forward<float>(g, params, cfg, in, t, tau);
  return unpack_output(g.value(out));
}

/// Adapts a trained network to the sampler's Denoiser interface.
inline diffusion::Denoiser make_denoiser(const nn::ParamStore<float>& params, const UNetConfig& cfg,
                                         std::size_t max_batch = 64) {
  return [&params, cfg, max_batch](const diffusion::DenoiseRequest& req) {
    std::vector<ImageTensor> out;
    out.reserve(req.z.size());
    for (std::size_t i = 0; i < req.z.size(); i += max_batch) {
      const std::size_t n = std::min(max_batch, req.z.size() - i);
      std::vector<double> t(n, req.t), tau(n, req.tau);
      auto part = unet_apply(params, cfg, req.z.subspan(i, n), req.cond.subspan(i, n), t, tau);
      for (auto& p : part) out.push_back(std::move(p));
    }
    return out;
  };
}

/// True if any parameter name refers to an attention layer.
template <class T>
bool has_attention_params(const nn::ParamStore<T>& store) {
  for (const auto& [name, _] : store.entries()) {
    if (name.find("attn") != std::string::npos || name.find("attention") != std::string::npos) return true;
  }
  return false;
}

}  // namespace blindsr::denoiser
