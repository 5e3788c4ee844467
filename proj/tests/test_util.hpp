#pragma once

#include <cmath>
#include <functional>

#include "f2f/rng.hpp"
#include "f2f/tensor.hpp"

namespace testutil {

inline f2f::Tensor random_tensor(std::vector<std::size_t> shape, f2f::Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
  f2f::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline f2f::ComplexTensor random_complex(std::vector<std::size_t> shape,
                                         f2f::Rng& rng) {
  f2f::ComplexTensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return t;
}

// central finite differences of a scalar function w.r.t. every element of x
inline f2f::Tensor central_diff(
    const std::function<double(const f2f::Tensor&)>& loss, const f2f::Tensor& x,
    double h = 1e-5) {
  f2f::Tensor grad(x.shape());
  f2f::Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + h;
    const double up = loss(probe);
    probe[i] = keep - h;
    const double down = loss(probe);
    probe[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// max over elements of |a-b| / max(|a|, |b|, floor)
inline double max_rel_err(const f2f::Tensor& a, const f2f::Tensor& b,
                          double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline double max_abs_diff(const f2f::Tensor& a, const f2f::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// sup-norm relative error of one gradient tensor against its oracle; the
// per-component ratio is meaningless on near-zero components where finite
// differences are pure roundoff
inline double grad_rel_err(const f2f::Tensor& a, const f2f::Tensor& b,
                           double floor = 1e-12) {
  double scale = floor;
  for (std::size_t i = 0; i < a.numel(); ++i)
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  return max_abs_diff(a, b) / scale;
}

inline double rel_l2(const f2f::Tensor& a, const f2f::Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

inline double dot(const f2f::Tensor& a, const f2f::Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

// real inner product treating complex tensors as stacked (re, im) reals
inline double dot(const f2f::ComplexTensor& a, const f2f::ComplexTensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return acc;
}

}  // namespace testutil
