#pragma once

#include <cstddef>

#include "f2f/tensor.hpp"

namespace f2f::ref {

// Serial reference kernels, written as direct loop transcriptions of the op
// definitions. They stay in the library so the verification suites and the
// benchmark target can compare them against the parallel versions at runtime.

Tensor linear_apply(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor depthwise_conv_axis(const Tensor& x, std::size_t axis,
                           const Tensor& kernel, std::size_t channel_axis);

}  // namespace f2f::ref
