#include "f2f/ref_kernels.hpp"

#include <cstdint>

#include "f2f/errors.hpp"

namespace f2f::ref {

Tensor linear_apply(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || b.rank() != 1 ||
      x.dim(x.rank() - 1) != w.dim(0) || w.dim(1) != b.dim(0))
    throw DimensionError("ref linear shape mismatch: x " + shape_to_string(x.shape()) +
                         ", w " + shape_to_string(w.shape()) + ", b " +
                         shape_to_string(b.shape()));
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < x.rank(); ++i) rows *= x.dim(i);
  const std::size_t d_in = x.dim(x.rank() - 1);
  const std::size_t d_out = w.dim(1);

  std::vector<std::size_t> out_shape = x.shape();
  out_shape.back() = d_out;
  Tensor out(out_shape);
  for (std::size_t m = 0; m < rows; ++m)
    for (std::size_t j = 0; j < d_out; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < d_in; ++i)
        acc += x[m * d_in + i] * w[i * d_out + j];
      out[m * d_out + j] = acc;
    }
  return out;
}

Tensor depthwise_conv_axis(const Tensor& x, std::size_t axis,
                           const Tensor& kernel, std::size_t channel_axis) {
  if (axis >= x.rank() || channel_axis >= x.rank() || axis == channel_axis)
    throw DimensionError("ref conv axes invalid for shape " + shape_to_string(x.shape()));
  if (kernel.rank() != 2 || kernel.dim(1) % 2 == 0 ||
      kernel.dim(0) != x.dim(channel_axis))
    throw DimensionError("ref conv kernel invalid: " + shape_to_string(kernel.shape()));

  const std::size_t k = kernel.dim(1);
  const std::int64_t half = static_cast<std::int64_t>((k - 1) / 2);
  const auto strides = row_major_strides(x.shape());
  const std::size_t len = x.dim(axis);

  Tensor out(x.shape());
  std::vector<std::size_t> idx(x.rank(), 0);
  for (std::size_t flat = 0; flat < x.numel(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t d = 0; d < x.rank(); ++d) {
      idx[d] = rem / strides[d];
      rem %= strides[d];
    }
    const std::size_t c = idx[channel_axis];
    const std::size_t line_base = flat - idx[axis] * strides[axis];
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::int64_t src =
          static_cast<std::int64_t>(idx[axis]) + static_cast<std::int64_t>(j) - half;
      if (src < 0 || src >= static_cast<std::int64_t>(len)) continue;
      acc += kernel[c * k + j] *
             x[line_base + static_cast<std::size_t>(src) * strides[axis]];
    }
    out[flat] = acc;
  }
  return out;
}

}  // namespace f2f::ref
