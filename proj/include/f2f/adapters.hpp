#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "f2f/ops.hpp"
#include "f2f/param_set.hpp"
#include "f2f/spectral.hpp"
#include "f2f/tensor.hpp"

namespace f2f {

enum class AdapterVariant { St, Ms, BaselineTemporal };
enum class Placement { BeforeAttention, AfterAttention, Both };
enum class Fusion { MeanConcat, Gated, Learnable };

// Inputs are embedding batches [B, T, N, D] with token 0 per frame playing
// the classification role. Every adapter is a residual map that preserves
// this shape exactly.
struct AdapterConfig {
  AdapterVariant variant = AdapterVariant::Ms;
  std::size_t d = 0;    // embedding dim
  std::size_t c_a = 0;  // adapter width (bottleneck channels)

  // single-scale variant only
  std::size_t n_fft = 0;
  std::size_t hop = 0;

  // multi-scale variant only; every scale must divide T and be even
  std::vector<std::size_t> window_scales;

  Activation activation = Activation::Gelu;
  Placement placement = Placement::AfterAttention;
  Fusion fusion = Fusion::MeanConcat;
};

// throws ConfigError naming the offending field
void validate_config(const AdapterConfig& cfg);

AdapterConfig default_st_config(std::size_t d, std::size_t c_a, std::size_t t);
AdapterConfig default_ms_config(std::size_t d, std::size_t c_a, std::size_t t);

// fc_down uniform in +-sqrt(1/D), conv kernels identity (center tap 1),
// fc_up zeroed so the freshly initialized adapter is an exact identity.
ParamSet init_adapter(const AdapterConfig& cfg, std::uint64_t seed);

// Branch fusion. MeanCombine::Sum adds the branches elementwise (the
// single-scale default), MeanCombine::Concat joins them along the last axis
// (the channel-split variant). Gated/Learnable read one weight per entry of
// the channel axis; weights is ignored for MeanConcat.
enum class MeanCombine { Sum, Concat };

Tensor fuse(const Tensor& a, const Tensor& b, Fusion strategy,
            MeanCombine mean_mode, const Tensor* weights,
            std::size_t channel_axis);

struct FuseGrads {
  Tensor da;
  Tensor db;
  Tensor dweights;  // empty unless the strategy owns weights
};
FuseGrads fuse_backward(const Tensor& a, const Tensor& b, Fusion strategy,
                        MeanCombine mean_mode, const Tensor* weights,
                        std::size_t channel_axis, const Tensor& dy);

// Saved intermediates from a forward pass, consumed by adapter_backward.
// Members are populated per variant; unused ones stay empty.
struct AdapterTrace {
  Tensor x;   // adapter input [B, T, N, D]
  Tensor h0;  // fc_down output before the activation
  Tensor h;   // after the activation

  // single-scale: stacked conv input [B, N, 2, C, F, T'] and branch outputs
  Tensor conv_in;
  Tensor branch_t;
  Tensor branch_f;
  std::size_t signal_t = 0;  // original signal length for the inverse

  // multi-scale: per-scale stacked conv inputs [B, N, 2, Ch, S_k, F_k],
  // branch outputs in signal layout [B, N, Ch, T]
  std::vector<Tensor> scale_conv_in;
  Tensor freq_branch;
  Tensor temp_branch;
  // branches in embedding layout [B, T, N, .] as fed to fuse
  Tensor fuse_a;
  Tensor fuse_b;

  Tensor pre_up;  // input of fc_up
};

// x: [B, T, N, D] -> same shape; trace may be null when no backward follows
Tensor adapter_forward(const AdapterConfig& cfg, const ParamSet& params,
                       const Tensor& x, AdapterTrace* trace = nullptr);

// Accumulates parameter gradients into params (+=) and returns dL/dx.
Tensor adapter_backward(const AdapterConfig& cfg, ParamSet& params,
                        const AdapterTrace& trace, const Tensor& dy);

// closed-form trainable-parameter count; equals enumerating init_adapter
std::size_t adapter_param_count(const AdapterConfig& cfg);

}  // namespace f2f
