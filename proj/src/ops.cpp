#include "f2f/ops.hpp"

#include <cmath>
#include <cstdint>

#include "f2f/errors.hpp"
#include "f2f/parallel.hpp"

namespace f2f {

namespace {

// (rows, d_in) view of x treating all leading axes as rows
std::size_t leading_rows(const Tensor& x) {
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < x.rank(); ++i) rows *= x.dim(i);
  return rows;
}

void check_linear_shapes(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || b.rank() != 1)
    throw DimensionError("linear expects x[..., d_in], w[d_in, d_out], b[d_out]; got x " +
                         shape_to_string(x.shape()) + ", w " + shape_to_string(w.shape()) +
                         ", b " + shape_to_string(b.shape()));
  if (x.dim(x.rank() - 1) != w.dim(0) || w.dim(1) != b.dim(0))
    throw DimensionError("linear shape mismatch: x " + shape_to_string(x.shape()) +
                         " vs w " + shape_to_string(w.shape()) + ", b " +
                         shape_to_string(b.shape()));
}

}  // namespace

Tensor linear_apply(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_linear_shapes(x, w, b);
  const std::size_t rows = leading_rows(x);
  const std::size_t d_in = x.dim(x.rank() - 1);
  const std::size_t d_out = w.dim(1);

  std::vector<std::size_t> out_shape = x.shape();
  out_shape.back() = d_out;
  Tensor out(out_shape);

  const double* xp = x.data();
  const double* wp = w.data();
  const double* bp = b.data();
  double* op = out.data();

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t m = 0; m < static_cast<std::int64_t>(rows); ++m) {
    const double* xr = xp + static_cast<std::size_t>(m) * d_in;
    double* orow = op + static_cast<std::size_t>(m) * d_out;
    for (std::size_t j = 0; j < d_out; ++j) orow[j] = bp[j];
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xv = xr[i];
      const double* wrow = wp + i * d_out;
      for (std::size_t j = 0; j < d_out; ++j) orow[j] += xv * wrow[j];
    }
  }
  return out;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
  const std::size_t rows = leading_rows(x);
  const std::size_t d_in = x.dim(x.rank() - 1);
  const std::size_t d_out = w.dim(1);
  if (dy.rank() != x.rank() || dy.dim(dy.rank() - 1) != d_out ||
      leading_rows(dy) != rows)
    throw DimensionError("linear backward: dy " + shape_to_string(dy.shape()) +
                         " does not match x " + shape_to_string(x.shape()) +
                         " with w " + shape_to_string(w.shape()));

  LinearGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor({d_out})};
  const double* xp = x.data();
  const double* wp = w.data();
  const double* dyp = dy.data();

  // dx[m, i] = sum_j dy[m, j] w[i, j]
  double* dxp = g.dx.data();
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t m = 0; m < static_cast<std::int64_t>(rows); ++m) {
    const double* dyr = dyp + static_cast<std::size_t>(m) * d_out;
    double* dxr = dxp + static_cast<std::size_t>(m) * d_in;
    for (std::size_t i = 0; i < d_in; ++i) {
      const double* wrow = wp + i * d_out;
      double acc = 0.0;
      for (std::size_t j = 0; j < d_out; ++j) acc += dyr[j] * wrow[j];
      dxr[i] = acc;
    }
  }

  // dw[i, j] = sum_m x[m, i] dy[m, j]; rows accumulate in index order so the
  // result is identical for any thread count
  double* dwp = g.dw.data();
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(d_in); ++i) {
    double* dwrow = dwp + static_cast<std::size_t>(i) * d_out;
    for (std::size_t m = 0; m < rows; ++m) {
      const double xv = xp[m * d_in + static_cast<std::size_t>(i)];
      const double* dyr = dyp + m * d_out;
      for (std::size_t j = 0; j < d_out; ++j) dwrow[j] += xv * dyr[j];
    }
  }

  // db[j] = sum_m dy[m, j]
  double* dbp = g.db.data();
  for (std::size_t m = 0; m < rows; ++m) {
    const double* dyr = dyp + m * d_out;
    for (std::size_t j = 0; j < d_out; ++j) dbp[j] += dyr[j];
  }
  return g;
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor gelu_apply(const Tensor& x) {
  Tensor out(x.shape());
  const double* xp = x.data();
  double* op = out.data();
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.numel()); ++i)
    op[i] = 0.5 * xp[i] * (1.0 + std::erf(xp[i] * kInvSqrt2));
  return out;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  if (!x.same_shape(dy))
    throw DimensionError("gelu backward shape mismatch: " + shape_to_string(x.shape()) +
                         " vs " + shape_to_string(dy.shape()));
  Tensor out(x.shape());
  const double* xp = x.data();
  const double* dyp = dy.data();
  double* op = out.data();
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.numel()); ++i) {
    const double v = xp[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    op[i] = dyp[i] * (cdf + v * pdf);
  }
  return out;
}

Tensor relu_apply(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  if (!x.same_shape(dy))
    throw DimensionError("relu backward shape mismatch: " + shape_to_string(x.shape()) +
                         " vs " + shape_to_string(dy.shape()));
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return out;
}

Tensor activation_apply(Activation act, const Tensor& x) {
  return act == Activation::Gelu ? gelu_apply(x) : relu_apply(x);
}

Tensor activation_backward(Activation act, const Tensor& x, const Tensor& dy) {
  return act == Activation::Gelu ? gelu_backward(x, dy) : relu_backward(x, dy);
}

namespace {

struct ConvGeometry {
  std::size_t pre = 1, len = 1, post = 1;  // x as [pre, len, post] around axis
  std::size_t channels = 1, k = 1, half = 0;
  std::size_t ch_stride = 1, ch_dim = 1;
};

ConvGeometry conv_geometry(const Tensor& x, std::size_t axis,
                           const Tensor& kernel, std::size_t channel_axis) {
  if (axis >= x.rank() || channel_axis >= x.rank())
    throw DimensionError("conv axes out of range for shape " + shape_to_string(x.shape()));
  if (axis == channel_axis)
    throw ConfigError("conv axis and channel axis must differ");
  if (kernel.rank() != 2)
    throw DimensionError("conv kernel must be [channels, k], got " +
                         shape_to_string(kernel.shape()));
  if (kernel.dim(1) % 2 == 0)
    throw ConfigError("conv kernel length must be odd, got " +
                      std::to_string(kernel.dim(1)));
  if (kernel.dim(0) != x.dim(channel_axis))
    throw DimensionError("conv kernel has " + std::to_string(kernel.dim(0)) +
                         " channel rows but x has " +
                         std::to_string(x.dim(channel_axis)) +
                         " channels along axis " + std::to_string(channel_axis));

  ConvGeometry g;
  for (std::size_t i = 0; i < axis; ++i) g.pre *= x.dim(i);
  g.len = x.dim(axis);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) g.post *= x.dim(i);
  g.channels = kernel.dim(0);
  g.k = kernel.dim(1);
  g.half = (g.k - 1) / 2;
  g.ch_stride = row_major_strides(x.shape())[channel_axis];
  g.ch_dim = x.dim(channel_axis);
  return g;
}

}  // namespace

Tensor depthwise_conv_axis(const Tensor& x, std::size_t axis,
                           const Tensor& kernel, std::size_t channel_axis) {
  const ConvGeometry g = conv_geometry(x, axis, kernel, channel_axis);
  Tensor out(x.shape());
  const double* xp = x.data();
  const double* kp = kernel.data();
  double* op = out.data();

  // each (p, q) pair fixes one line along `axis`; the channel index is
  // constant on that line because channel_axis != axis
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t outer = 0;
       outer < static_cast<std::int64_t>(g.pre * g.post); ++outer) {
    const std::size_t p = static_cast<std::size_t>(outer) / g.post;
    const std::size_t q = static_cast<std::size_t>(outer) % g.post;
    const std::size_t base = p * g.len * g.post + q;
    const std::size_t c = (base / g.ch_stride) % g.ch_dim;
    const double* krow = kp + c * g.k;
    for (std::size_t a = 0; a < g.len; ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.k; ++j) {
        const std::int64_t src = static_cast<std::int64_t>(a) +
                                 static_cast<std::int64_t>(j) -
                                 static_cast<std::int64_t>(g.half);
        if (src < 0 || src >= static_cast<std::int64_t>(g.len)) continue;
        acc += krow[j] * xp[base + static_cast<std::size_t>(src) * g.post];
      }
      op[base + a * g.post] = acc;
    }
  }
  return out;
}

ConvGrads depthwise_conv_axis_backward(const Tensor& x, std::size_t axis,
                                       const Tensor& kernel,
                                       std::size_t channel_axis,
                                       const Tensor& dy) {
  const ConvGeometry g = conv_geometry(x, axis, kernel, channel_axis);
  if (!dy.same_shape(x))
    throw DimensionError("conv backward: dy " + shape_to_string(dy.shape()) +
                         " does not match x " + shape_to_string(x.shape()));

  ConvGrads grads{Tensor(x.shape()), Tensor(kernel.shape())};
  const double* xp = x.data();
  const double* kp = kernel.data();
  const double* dyp = dy.data();
  double* dxp = grads.dx.data();
  double* dkp = grads.dkernel.data();

  // dx[a] = sum_j k[j] dy[a - j + half]: the adjoint correlation
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t outer = 0;
       outer < static_cast<std::int64_t>(g.pre * g.post); ++outer) {
    const std::size_t p = static_cast<std::size_t>(outer) / g.post;
    const std::size_t q = static_cast<std::size_t>(outer) % g.post;
    const std::size_t base = p * g.len * g.post + q;
    const std::size_t c = (base / g.ch_stride) % g.ch_dim;
    const double* krow = kp + c * g.k;
    for (std::size_t a = 0; a < g.len; ++a) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.k; ++j) {
        const std::int64_t dst = static_cast<std::int64_t>(a) -
                                 static_cast<std::int64_t>(j) +
                                 static_cast<std::int64_t>(g.half);
        if (dst < 0 || dst >= static_cast<std::int64_t>(g.len)) continue;
        acc += krow[j] * dyp[base + static_cast<std::size_t>(dst) * g.post];
      }
      dxp[base + a * g.post] = acc;
    }
  }

  // dk[c, j] = sum over that channel's lines and positions, accumulated in a
  // fixed serial order per (c, j) element
#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t cj = 0;
       cj < static_cast<std::int64_t>(g.channels * g.k); ++cj) {
    const std::size_t c = static_cast<std::size_t>(cj) / g.k;
    const std::size_t j = static_cast<std::size_t>(cj) % g.k;
    double acc = 0.0;
    for (std::size_t outer = 0; outer < g.pre * g.post; ++outer) {
      const std::size_t p = outer / g.post;
      const std::size_t q = outer % g.post;
      const std::size_t base = p * g.len * g.post + q;
      if ((base / g.ch_stride) % g.ch_dim != c) continue;
      for (std::size_t a = 0; a < g.len; ++a) {
        const std::int64_t src = static_cast<std::int64_t>(a) +
                                 static_cast<std::int64_t>(j) -
                                 static_cast<std::int64_t>(g.half);
        if (src < 0 || src >= static_cast<std::int64_t>(g.len)) continue;
        acc += dyp[base + a * g.post] * xp[base + static_cast<std::size_t>(src) * g.post];
      }
    }
    dkp[cj] = acc;
  }
  return grads;
}

}  // namespace f2f
