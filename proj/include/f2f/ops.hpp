#pragma once

#include <cstddef>

#include "f2f/tensor.hpp"

namespace f2f {

// x: [..., d_in], w: [d_in, d_out], b: [d_out] -> [..., d_out]
Tensor linear_apply(const Tensor& x, const Tensor& w, const Tensor& b);

struct LinearGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;
};
LinearGrads linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy);

// exact-erf form 0.5 x (1 + erf(x / sqrt 2))
Tensor gelu_apply(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& dy);

Tensor relu_apply(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

enum class Activation { Gelu, Relu };
Tensor activation_apply(Activation act, const Tensor& x);
Tensor activation_backward(Activation act, const Tensor& x, const Tensor& dy);

// Per-channel 1-D cross-correlation (no kernel flip) along `axis` with zero
// "same" padding. kernel: [channels, k], k odd; channels must match x's size
// along channel_axis and axis != channel_axis.
Tensor depthwise_conv_axis(const Tensor& x, std::size_t axis,
                           const Tensor& kernel, std::size_t channel_axis);

struct ConvGrads {
  Tensor dx;
  Tensor dkernel;
};
ConvGrads depthwise_conv_axis_backward(const Tensor& x, std::size_t axis,
                                       const Tensor& kernel,
                                       std::size_t channel_axis,
                                       const Tensor& dy);

}  // namespace f2f
