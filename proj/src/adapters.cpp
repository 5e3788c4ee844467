#include "f2f/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "f2f/errors.hpp"
#include "f2f/parallel.hpp"
#include "f2f/rng.hpp"

namespace f2f {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t count) {
  const std::size_t c = x.dim(x.rank() - 1);
  std::vector<std::size_t> shape = x.shape();
  shape.back() = count;
  Tensor out(shape);
  const std::size_t rows = x.numel() / c;
  for (std::size_t m = 0; m < rows; ++m)
    for (std::size_t j = 0; j < count; ++j)
      out[m * count + j] = x[m * c + start + j];
  return out;
}

// adjoint of slice_last: scatter the slice gradient into a zero tensor
void scatter_last(Tensor& dst, const Tensor& part, std::size_t start) {
  const std::size_t c = dst.dim(dst.rank() - 1);
  const std::size_t count = part.dim(part.rank() - 1);
  const std::size_t rows = dst.numel() / c;
  for (std::size_t m = 0; m < rows; ++m)
    for (std::size_t j = 0; j < count; ++j)
      dst[m * c + start + j] += part[m * count + j];
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  const std::size_t ca = a.dim(a.rank() - 1), cb = b.dim(b.rank() - 1);
  std::vector<std::size_t> shape = a.shape();
  shape.back() = ca + cb;
  Tensor out(shape);
  const std::size_t rows = a.numel() / ca;
  for (std::size_t m = 0; m < rows; ++m) {
    for (std::size_t j = 0; j < ca; ++j) out[m * (ca + cb) + j] = a[m * ca + j];
    for (std::size_t j = 0; j < cb; ++j)
      out[m * (ca + cb) + ca + j] = b[m * cb + j];
  }
  return out;
}

// [B, T, N, C] -> [B, N, C, T]; its own inverse transpose pairs with
// bnct_to_btnc below, and each is the other's adjoint
Tensor btnc_to_bnct(const Tensor& x) {
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), c = x.dim(3);
  Tensor out({b, n, c, t});
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(b * n * c); ++row) {
    const std::size_t bi = static_cast<std::size_t>(row) / (n * c);
    const std::size_t ni = (static_cast<std::size_t>(row) / c) % n;
    const std::size_t ci = static_cast<std::size_t>(row) % c;
    double* orow = out.data() + static_cast<std::size_t>(row) * t;
    for (std::size_t ti = 0; ti < t; ++ti)
      orow[ti] = x[((bi * t + ti) * n + ni) * c + ci];
  }
  return out;
}

// [B, N, C, T] -> [B, T, N, C]
Tensor bnct_to_btnc(const Tensor& x) {
  const std::size_t b = x.dim(0), n = x.dim(1), c = x.dim(2), t = x.dim(3);
  Tensor out({b, t, n, c});
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(b * t * n); ++row) {
    const std::size_t bi = static_cast<std::size_t>(row) / (t * n);
    const std::size_t ti = (static_cast<std::size_t>(row) / n) % t;
    const std::size_t ni = static_cast<std::size_t>(row) % n;
    double* orow = out.data() + static_cast<std::size_t>(row) * c;
    for (std::size_t ci = 0; ci < c; ++ci)
      orow[ci] = x[((bi * n + ni) * c + ci) * t + ti];
  }
  return out;
}

// per-line real transforms over the last axis
ComplexTensor rfft_lines(const Tensor& x) {
  const std::size_t len = x.dim(x.rank() - 1);
  const std::size_t lines = x.numel() / len;
  std::vector<std::size_t> shape = x.shape();
  shape.back() = len / 2 + 1;
  ComplexTensor out(shape);
  const std::size_t bins = len / 2 + 1;
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t m = 0; m < static_cast<std::int64_t>(lines); ++m) {
    Tensor line({len});
    for (std::size_t i = 0; i < len; ++i)
      line[i] = x[static_cast<std::size_t>(m) * len + i];
    const ComplexTensor spec = rfft(line);
    for (std::size_t f = 0; f < bins; ++f)
      out[static_cast<std::size_t>(m) * bins + f] = spec[f];
  }
  return out;
}

Tensor irfft_lines(const ComplexTensor& spec, std::size_t len) {
  const std::size_t bins = spec.dim(spec.rank() - 1);
  const std::size_t lines = spec.numel() / bins;
  std::vector<std::size_t> shape = spec.shape();
  shape.back() = len;
  Tensor out(shape);
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t m = 0; m < static_cast<std::int64_t>(lines); ++m) {
    ComplexTensor line({bins});
    for (std::size_t f = 0; f < bins; ++f)
      line[f] = spec[static_cast<std::size_t>(m) * bins + f];
    const Tensor sig = irfft(line, len);
    for (std::size_t i = 0; i < len; ++i)
      out[static_cast<std::size_t>(m) * len + i] = sig[i];
  }
  return out;
}

Tensor rfft_lines_backward(const ComplexTensor& grad, std::size_t len) {
  const std::size_t bins = grad.dim(grad.rank() - 1);
  const std::size_t lines = grad.numel() / bins;
  std::vector<std::size_t> shape = grad.shape();
  shape.back() = len;
  Tensor out(shape);
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t m = 0; m < static_cast<std::int64_t>(lines); ++m) {
    ComplexTensor line({bins});
    for (std::size_t f = 0; f < bins; ++f)
      line[f] = grad[static_cast<std::size_t>(m) * bins + f];
    const Tensor d = rfft_backward(line, len);
    for (std::size_t i = 0; i < len; ++i)
      out[static_cast<std::size_t>(m) * len + i] = d[i];
  }
  return out;
}

ComplexTensor irfft_lines_backward(const Tensor& grad) {
  const std::size_t len = grad.dim(grad.rank() - 1);
  const std::size_t lines = grad.numel() / len;
  std::vector<std::size_t> shape = grad.shape();
  shape.back() = len / 2 + 1;
  ComplexTensor out(shape);
  const std::size_t bins = len / 2 + 1;
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t m = 0; m < static_cast<std::int64_t>(lines); ++m) {
    Tensor line({len});
    for (std::size_t i = 0; i < len; ++i)
      line[i] = grad[static_cast<std::size_t>(m) * len + i];
    const ComplexTensor d = irfft_backward(line);
    for (std::size_t f = 0; f < bins; ++f)
      out[static_cast<std::size_t>(m) * bins + f] = d[f];
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate_config(const AdapterConfig& cfg) {
  if (cfg.d == 0) throw ConfigError("adapter config: D must be positive");
  if (cfg.c_a == 0) throw ConfigError("adapter config: C_a must be positive");
  switch (cfg.variant) {
    case AdapterVariant::St:
      if (!is_pow2(cfg.n_fft) || cfg.n_fft < 2)
        throw ConfigError("adapter config: n_fft must be a power of two, got " +
                          std::to_string(cfg.n_fft));
      if (cfg.hop == 0) throw ConfigError("adapter config: hop must be positive");
      break;
    case AdapterVariant::Ms:
      if (cfg.c_a % 2 != 0)
        throw ConfigError("adapter config: C_a must be even for the channel split, got " +
                          std::to_string(cfg.c_a));
      if (cfg.window_scales.empty())
        throw ConfigError("adapter config: window_scales must not be empty");
      for (std::size_t w : cfg.window_scales)
        if (w < 2 || w % 2 != 0)
          throw ConfigError("adapter config: window_scales entries must be even and >= 2, got " +
                            std::to_string(w));
      break;
    case AdapterVariant::BaselineTemporal:
      break;
  }
}

AdapterConfig default_st_config(std::size_t d, std::size_t c_a, std::size_t t) {
  AdapterConfig cfg;
  cfg.variant = AdapterVariant::St;
  cfg.d = d;
  cfg.c_a = c_a;
  cfg.n_fft = std::min<std::size_t>(32, t / 2);
  cfg.hop = cfg.n_fft / 4;
  validate_config(cfg);
  return cfg;
}

AdapterConfig default_ms_config(std::size_t d, std::size_t c_a, std::size_t t) {
  AdapterConfig cfg;
  cfg.variant = AdapterVariant::Ms;
  cfg.d = d;
  cfg.c_a = c_a;
  cfg.window_scales = {t, t / 2, t / 4};
  validate_config(cfg);
  return cfg;
}

ParamSet init_adapter(const AdapterConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  const std::size_t c = cfg.c_a;
  const std::size_t half = c / 2;
  const bool ms = cfg.variant == AdapterVariant::Ms;
  const std::size_t conv_channels = ms ? half : c;
  const bool weighted_fuse = cfg.fusion != Fusion::MeanConcat &&
                             cfg.variant != AdapterVariant::BaselineTemporal;
  // with a weighted fuse the MS halves merge instead of concatenating
  const std::size_t up_in = (ms && weighted_fuse) ? half : c;

  Rng rng(mix_seed(seed, 0xada7));
  const double bound = std::sqrt(1.0 / static_cast<double>(cfg.d));

  ParamSet params;
  Tensor down_w({cfg.d, c});
  for (std::size_t i = 0; i < down_w.numel(); ++i)
    down_w[i] = rng.uniform(-bound, bound);
  Tensor down_b({c});
  for (std::size_t i = 0; i < down_b.numel(); ++i)
    down_b[i] = rng.uniform(-bound, bound);
  params.add("fc_down.w", std::move(down_w));
  params.add("fc_down.b", std::move(down_b));

  params.add("fc_up.w", Tensor({up_in, cfg.d}));
  params.add("fc_up.b", Tensor({cfg.d}));

  Tensor identity({conv_channels, 3});
  for (std::size_t ch = 0; ch < conv_channels; ++ch) identity[ch * 3 + 1] = 1.0;
  params.add("conv_temp.k", identity);
  if (cfg.variant != AdapterVariant::BaselineTemporal)
    params.add("conv_freq.k", identity);

  if (weighted_fuse) {
    const std::size_t fuse_c = ms ? half : c;
    if (cfg.fusion == Fusion::Gated) {
      params.add("fuse.gate", Tensor({fuse_c}));  // logit 0: even blend
    } else {
      params.add("fuse.alpha", Tensor::full({fuse_c}, 0.5));
    }
  }
  return params;
}

std::size_t adapter_param_count(const AdapterConfig& cfg) {
  const std::size_t d = cfg.d, c = cfg.c_a, half = c / 2;
  const bool ms = cfg.variant == AdapterVariant::Ms;
  const bool weighted_fuse = cfg.fusion != Fusion::MeanConcat &&
                             cfg.variant != AdapterVariant::BaselineTemporal;
  const std::size_t up_in = (ms && weighted_fuse) ? half : c;
  std::size_t count = d * c + c + up_in * d + d;
  switch (cfg.variant) {
    case AdapterVariant::St:
      count += 3 * c + 3 * c;
      break;
    case AdapterVariant::Ms:
      count += 3 * half + 3 * half;
      break;
    case AdapterVariant::BaselineTemporal:
      count += 3 * c;
      break;
  }
  if (weighted_fuse) count += ms ? half : c;
  return count;
}

Tensor fuse(const Tensor& a, const Tensor& b, Fusion strategy,
            MeanCombine mean_mode, const Tensor* weights,
            std::size_t channel_axis) {
  if (strategy == Fusion::MeanConcat && mean_mode == MeanCombine::Concat) {
    if (a.rank() != b.rank())
      throw DimensionError("fuse: rank mismatch " + shape_to_string(a.shape()) +
                           " vs " + shape_to_string(b.shape()));
    for (std::size_t i = 0; i + 1 < a.rank(); ++i)
      if (a.dim(i) != b.dim(i))
        throw DimensionError("fuse: concat shapes differ off the last axis: " +
                             shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    return concat_last(a, b);
  }
  if (!a.same_shape(b))
    throw DimensionError("fuse: branch shapes differ: " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  if (strategy == Fusion::MeanConcat) {
    Tensor out = a;
    add_into(out, b);
    return out;
  }

  if (weights == nullptr || weights->rank() != 1 ||
      weights->numel() != a.dim(channel_axis))
    throw DimensionError("fuse: per-channel weights must have length " +
                         std::to_string(a.dim(channel_axis)));
  const std::size_t ch_stride = row_major_strides(a.shape())[channel_axis];
  const std::size_t ch_dim = a.dim(channel_axis);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const std::size_t ch = (i / ch_stride) % ch_dim;
    const double w = strategy == Fusion::Gated ? sigmoid((*weights)[ch])
                                               : (*weights)[ch];
    out[i] = w * a[i] + (1.0 - w) * b[i];
  }
  return out;
}

FuseGrads fuse_backward(const Tensor& a, const Tensor& b, Fusion strategy,
                        MeanCombine mean_mode, const Tensor* weights,
                        std::size_t channel_axis, const Tensor& dy) {
  FuseGrads g;
  if (strategy == Fusion::MeanConcat && mean_mode == MeanCombine::Concat) {
    g.da = slice_last(dy, 0, a.dim(a.rank() - 1));
    g.db = slice_last(dy, a.dim(a.rank() - 1), b.dim(b.rank() - 1));
    return g;
  }
  if (strategy == Fusion::MeanConcat) {
    g.da = dy;
    g.db = dy;
    return g;
  }
  if (weights == nullptr)
    throw ConfigError("fuse backward: weighted strategy without weights");
  const std::size_t ch_stride = row_major_strides(a.shape())[channel_axis];
  const std::size_t ch_dim = a.dim(channel_axis);
  g.da = Tensor(a.shape());
  g.db = Tensor(b.shape());
  g.dweights = Tensor({ch_dim});
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const std::size_t ch = (i / ch_stride) % ch_dim;
    if (strategy == Fusion::Gated) {
      const double s = sigmoid((*weights)[ch]);
      g.da[i] = dy[i] * s;
      g.db[i] = dy[i] * (1.0 - s);
      g.dweights[ch] += dy[i] * (a[i] - b[i]) * s * (1.0 - s);
    } else {
      const double w = (*weights)[ch];
      g.da[i] = dy[i] * w;
      g.db[i] = dy[i] * (1.0 - w);
      g.dweights[ch] += dy[i] * (a[i] - b[i]);
    }
  }
  return g;
}

namespace {

struct BatchDims {
  std::size_t b, t, n, d;
};

BatchDims batch_dims(const AdapterConfig& cfg, const Tensor& x) {
  if (x.rank() != 4)
    throw DimensionError("adapter input must be [B, T, N, D], got " +
                         shape_to_string(x.shape()));
  if (x.dim(3) != cfg.d)
    throw DimensionError("adapter input D " + std::to_string(x.dim(3)) +
                         " does not match config D " + std::to_string(cfg.d));
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

const Tensor* fuse_weights(const AdapterConfig& cfg, const ParamSet& params) {
  if (cfg.fusion == Fusion::Gated) return &params.value("fuse.gate");
  if (cfg.fusion == Fusion::Learnable) return &params.value("fuse.alpha");
  return nullptr;
}

// --- single-scale variant ---

Tensor forward_st(const AdapterConfig& cfg, const ParamSet& params,
                  const Tensor& x, AdapterTrace* trace) {
  const BatchDims dims = batch_dims(cfg, x);
  const std::size_t c = cfg.c_a;
  if (dims.t < 2 * cfg.n_fft)
    throw ConfigError("sequence length " + std::to_string(dims.t) +
                      " must be at least twice n_fft " + std::to_string(cfg.n_fft));

  Tensor h0 = linear_apply(x, params.value("fc_down.w"), params.value("fc_down.b"));
  Tensor h = activation_apply(cfg.activation, h0);

  Tensor sig = btnc_to_bnct(h).reshaped({dims.b * dims.n * c, dims.t});
  SpectralFrames frames = stft(sig, cfg.n_fft, cfg.hop);
  const std::size_t bins = frames.bins(), fr = frames.frames();

  // view the stacked spectrum as [B, N, 2, C, F, T'] so the re/im planes of
  // one adapter channel share that channel's kernel row
  Tensor conv_in =
      complex_to_stacked(frames.data.reshaped({dims.b, dims.n, c, bins, fr}), 2)
          .reshaped({dims.b, dims.n, 2, c, bins, fr});

  Tensor branch_f = depthwise_conv_axis(conv_in, 4, params.value("conv_freq.k"), 3);
  Tensor branch_t = depthwise_conv_axis(conv_in, 5, params.value("conv_temp.k"), 3);
  Tensor fused = fuse(branch_f, branch_t, cfg.fusion, MeanCombine::Sum,
                      fuse_weights(cfg, params), 3);

  SpectralFrames out_frames;
  out_frames.n_fft = cfg.n_fft;
  out_frames.hop = cfg.hop;
  out_frames.original_length = dims.t;
  out_frames.mono = false;
  out_frames.data =
      stacked_to_complex(fused.reshaped({dims.b, dims.n, 2 * c, bins, fr}), 2)
          .reshaped({dims.b * dims.n * c, bins, fr});

  Tensor y = bnct_to_btnc(istft(out_frames).reshaped({dims.b, dims.n, c, dims.t}));
  Tensor out = linear_apply(y, params.value("fc_up.w"), params.value("fc_up.b"));
  add_into(out, x);

  if (trace) {
    trace->x = x;
    trace->h0 = std::move(h0);
    trace->h = std::move(h);
    trace->conv_in = std::move(conv_in);
    trace->branch_f = std::move(branch_f);
    trace->branch_t = std::move(branch_t);
    trace->signal_t = dims.t;
    trace->pre_up = std::move(y);
  }
  return out;
}

Tensor backward_st(const AdapterConfig& cfg, ParamSet& params,
                   const AdapterTrace& trace, const Tensor& dy) {
  const BatchDims dims = batch_dims(cfg, trace.x);
  const std::size_t c = cfg.c_a;

  Tensor dx = dy;
  LinearGrads up = linear_backward(trace.pre_up, params.value("fc_up.w"), dy);
  add_into(params.grad("fc_up.w"), up.dw);
  add_into(params.grad("fc_up.b"), up.db);

  Tensor d_sig = btnc_to_bnct(up.dx).reshaped({dims.b * dims.n * c, dims.t});
  SpectralFrames g_frames = istft_backward(d_sig, cfg.n_fft, cfg.hop);
  const std::size_t bins = g_frames.bins(), fr = g_frames.frames();

  Tensor d_fused =
      complex_to_stacked(g_frames.data.reshaped({dims.b, dims.n, c, bins, fr}), 2)
          .reshaped({dims.b, dims.n, 2, c, bins, fr});

  FuseGrads fg = fuse_backward(trace.branch_f, trace.branch_t, cfg.fusion,
                               MeanCombine::Sum, fuse_weights(cfg, params), 3,
                               d_fused);
  if (cfg.fusion == Fusion::Gated) add_into(params.grad("fuse.gate"), fg.dweights);
  if (cfg.fusion == Fusion::Learnable)
    add_into(params.grad("fuse.alpha"), fg.dweights);

  ConvGrads cf = depthwise_conv_axis_backward(trace.conv_in, 4,
                                              params.value("conv_freq.k"), 3, fg.da);
  add_into(params.grad("conv_freq.k"), cf.dkernel);
  ConvGrads ct = depthwise_conv_axis_backward(trace.conv_in, 5,
                                              params.value("conv_temp.k"), 3, fg.db);
  add_into(params.grad("conv_temp.k"), ct.dkernel);
  Tensor d_conv_in = cf.dx;
  add_into(d_conv_in, ct.dx);

  SpectralFrames g_in;
  g_in.n_fft = cfg.n_fft;
  g_in.hop = cfg.hop;
  g_in.original_length = dims.t;
  g_in.mono = false;
  g_in.data =
      stacked_to_complex(d_conv_in.reshaped({dims.b, dims.n, 2 * c, bins, fr}), 2)
          .reshaped({dims.b * dims.n * c, bins, fr});

  Tensor d_h = bnct_to_btnc(stft_backward(g_in).reshaped({dims.b, dims.n, c, dims.t}));
  Tensor d_h0 = activation_backward(cfg.activation, trace.h0, d_h);
  LinearGrads down = linear_backward(trace.x, params.value("fc_down.w"), d_h0);
  add_into(params.grad("fc_down.w"), down.dw);
  add_into(params.grad("fc_down.b"), down.db);
  add_into(dx, down.dx);
  return dx;
}

// --- multi-scale variant ---

Tensor forward_ms(const AdapterConfig& cfg, const ParamSet& params,
                  const Tensor& x, AdapterTrace* trace) {
  const BatchDims dims = batch_dims(cfg, x);
  const std::size_t half = cfg.c_a / 2;
  for (std::size_t w : cfg.window_scales)
    if (dims.t % w != 0)
      throw ConfigError("window scale " + std::to_string(w) +
                        " does not divide sequence length " + std::to_string(dims.t));

  Tensor h0 = linear_apply(x, params.value("fc_down.w"), params.value("fc_down.b"));
  Tensor h = activation_apply(cfg.activation, h0);

  // first half of the bottleneck channels feeds the frequency branch
  Tensor hf = slice_last(h, 0, half);
  Tensor ht = slice_last(h, half, half);

  Tensor sigf = btnc_to_bnct(hf);  // [B, N, Ch, T]
  Tensor freq_acc({dims.b, dims.n, half, dims.t});
  std::vector<Tensor> scale_conv_in;
  scale_conv_in.reserve(cfg.window_scales.size());

  const Tensor& shared_kernel = params.value("conv_freq.k");
  for (std::size_t w : cfg.window_scales) {
    const std::size_t segs = dims.t / w;
    const std::size_t bins = w / 2 + 1;
    ComplexTensor spec =
        rfft_lines(sigf.reshaped({dims.b, dims.n, half, segs, w}));
    Tensor conv_in = complex_to_stacked(spec, 2).reshaped(
        {dims.b, dims.n, 2, half, segs, bins});
    Tensor conv_out = depthwise_conv_axis(conv_in, 5, shared_kernel, 3);
    ComplexTensor spec2 = stacked_to_complex(
        conv_out.reshaped({dims.b, dims.n, 2 * half, segs, bins}), 2);
    Tensor rebuilt = irfft_lines(spec2, w).reshaped({dims.b, dims.n, half, dims.t});
    add_into(freq_acc, rebuilt);
    scale_conv_in.push_back(std::move(conv_in));
  }
  const double inv_k = 1.0 / static_cast<double>(cfg.window_scales.size());
  for (std::size_t i = 0; i < freq_acc.numel(); ++i) freq_acc[i] *= inv_k;

  Tensor freq_out = bnct_to_btnc(freq_acc);  // [B, T, N, Ch]
  Tensor temp_out = depthwise_conv_axis(ht, 1, params.value("conv_temp.k"), 3);

  Tensor pre_up = fuse(freq_out, temp_out, cfg.fusion, MeanCombine::Concat,
                       fuse_weights(cfg, params), 3);
  Tensor out = linear_apply(pre_up, params.value("fc_up.w"), params.value("fc_up.b"));
  add_into(out, x);

  if (trace) {
    trace->x = x;
    trace->h0 = std::move(h0);
    trace->h = std::move(h);
    trace->scale_conv_in = std::move(scale_conv_in);
    trace->temp_branch = std::move(ht);  // temporal conv input
    trace->fuse_a = std::move(freq_out);
    trace->fuse_b = std::move(temp_out);
    trace->pre_up = std::move(pre_up);
  }
  return out;
}

Tensor backward_ms(const AdapterConfig& cfg, ParamSet& params,
                   const AdapterTrace& trace, const Tensor& dy) {
  const BatchDims dims = batch_dims(cfg, trace.x);
  const std::size_t half = cfg.c_a / 2;

  Tensor dx = dy;
  LinearGrads up = linear_backward(trace.pre_up, params.value("fc_up.w"), dy);
  add_into(params.grad("fc_up.w"), up.dw);
  add_into(params.grad("fc_up.b"), up.db);

  FuseGrads fg = fuse_backward(trace.fuse_a, trace.fuse_b, cfg.fusion,
                               MeanCombine::Concat, fuse_weights(cfg, params), 3,
                               up.dx);
  if (cfg.fusion == Fusion::Gated) add_into(params.grad("fuse.gate"), fg.dweights);
  if (cfg.fusion == Fusion::Learnable)
    add_into(params.grad("fuse.alpha"), fg.dweights);

  // temporal half
  ConvGrads tg = depthwise_conv_axis_backward(trace.temp_branch, 1,
                                              params.value("conv_temp.k"), 3, fg.db);
  add_into(params.grad("conv_temp.k"), tg.dkernel);

  // frequency half: distribute the scale average, then walk each scale's
  // chain backwards; the shared kernel accumulates across scales
  const double inv_k = 1.0 / static_cast<double>(cfg.window_scales.size());
  Tensor d_freq_acc = btnc_to_bnct(fg.da);
  for (std::size_t i = 0; i < d_freq_acc.numel(); ++i) d_freq_acc[i] *= inv_k;

  Tensor d_sigf({dims.b, dims.n, half, dims.t});
  const Tensor& shared_kernel = params.value("conv_freq.k");
  for (std::size_t k = 0; k < cfg.window_scales.size(); ++k) {
    const std::size_t w = cfg.window_scales[k];
    const std::size_t segs = dims.t / w;
    const std::size_t bins = w / 2 + 1;
    ComplexTensor d_spec2 = irfft_lines_backward(
        d_freq_acc.reshaped({dims.b, dims.n, half, segs, w}));
    Tensor d_conv_out = complex_to_stacked(d_spec2, 2).reshaped(
        {dims.b, dims.n, 2, half, segs, bins});
    ConvGrads cg = depthwise_conv_axis_backward(trace.scale_conv_in[k], 5,
                                                shared_kernel, 3, d_conv_out);
    add_into(params.grad("conv_freq.k"), cg.dkernel);
    ComplexTensor d_spec = stacked_to_complex(
        cg.dx.reshaped({dims.b, dims.n, 2 * half, segs, bins}), 2);
    add_into(d_sigf, rfft_lines_backward(d_spec, w)
                         .reshaped({dims.b, dims.n, half, dims.t}));
  }

  Tensor d_h({dims.b, dims.t, dims.n, cfg.c_a});
  scatter_last(d_h, bnct_to_btnc(d_sigf), 0);
  scatter_last(d_h, tg.dx, half);

  Tensor d_h0 = activation_backward(cfg.activation, trace.h0, d_h);
  LinearGrads down = linear_backward(trace.x, params.value("fc_down.w"), d_h0);
  add_into(params.grad("fc_down.w"), down.dw);
  add_into(params.grad("fc_down.b"), down.db);
  add_into(dx, down.dx);
  return dx;
}

// --- time-domain baseline ---

Tensor forward_baseline(const AdapterConfig& cfg, const ParamSet& params,
                        const Tensor& x, AdapterTrace* trace) {
  batch_dims(cfg, x);
  Tensor h0 = linear_apply(x, params.value("fc_down.w"), params.value("fc_down.b"));
  Tensor h = activation_apply(cfg.activation, h0);
  Tensor pre_up = depthwise_conv_axis(h, 1, params.value("conv_temp.k"), 3);
  Tensor out = linear_apply(pre_up, params.value("fc_up.w"), params.value("fc_up.b"));
  add_into(out, x);
  if (trace) {
    trace->x = x;
    trace->h0 = std::move(h0);
    trace->h = std::move(h);
    trace->pre_up = std::move(pre_up);
  }
  return out;
}

Tensor backward_baseline(const AdapterConfig& cfg, ParamSet& params,
                         const AdapterTrace& trace, const Tensor& dy) {
  Tensor dx = dy;
  LinearGrads up = linear_backward(trace.pre_up, params.value("fc_up.w"), dy);
  add_into(params.grad("fc_up.w"), up.dw);
  add_into(params.grad("fc_up.b"), up.db);
  ConvGrads cg = depthwise_conv_axis_backward(trace.h, 1,
                                              params.value("conv_temp.k"), 3, up.dx);
  add_into(params.grad("conv_temp.k"), cg.dkernel);
  Tensor d_h0 = activation_backward(cfg.activation, trace.h0, cg.dx);
  LinearGrads down = linear_backward(trace.x, params.value("fc_down.w"), d_h0);
  add_into(params.grad("fc_down.w"), down.dw);
  add_into(params.grad("fc_down.b"), down.db);
  add_into(dx, down.dx);
  return dx;
}

}  // namespace

Tensor adapter_forward(const AdapterConfig& cfg, const ParamSet& params,
                       const Tensor& x, AdapterTrace* trace) {
  validate_config(cfg);
  switch (cfg.variant) {
    case AdapterVariant::St:
      return forward_st(cfg, params, x, trace);
    case AdapterVariant::Ms:
      return forward_ms(cfg, params, x, trace);
    case AdapterVariant::BaselineTemporal:
      return forward_baseline(cfg, params, x, trace);
  }
  throw ConfigError("unknown adapter variant");
}

Tensor adapter_backward(const AdapterConfig& cfg, ParamSet& params,
                        const AdapterTrace& trace, const Tensor& dy) {
  switch (cfg.variant) {
    case AdapterVariant::St:
      return backward_st(cfg, params, trace, dy);
    case AdapterVariant::Ms:
      return backward_ms(cfg, params, trace, dy);
    case AdapterVariant::BaselineTemporal:
      return backward_baseline(cfg, params, trace, dy);
  }
  throw ConfigError("unknown adapter variant");
}

}  // namespace f2f
