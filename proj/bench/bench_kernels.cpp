// Compares the OpenMP kernels against their serial references: correctness
// deltas plus wall-clock ratios at a few shapes. Not a test; run by hand.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "f2f/analysis.hpp"
#include "f2f/ops.hpp"
#include "f2f/parallel.hpp"
#include "f2f/ref_kernels.hpp"
#include "f2f/rng.hpp"
#include "f2f/tensor.hpp"

using namespace f2f;

namespace {

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

template <typename F>
double time_best_of(F&& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void bench_linear(std::size_t rows, std::size_t d_in, std::size_t d_out) {
  Rng rng(mix_seed(0xbe4c, rows + d_in + d_out));
  const Tensor x = random_tensor({rows, d_in}, rng);
  const Tensor w = random_tensor({d_in, d_out}, rng);
  const Tensor b = random_tensor({d_out}, rng);

  Tensor out_par, out_ref;
  const double t_par =
      time_best_of([&] { out_par = linear_apply(x, w, b); }, 5);
  const double t_ref =
      time_best_of([&] { out_ref = ref::linear_apply(x, w, b); }, 5);
  std::printf(
      "linear_apply   [%5zu x %3zu] -> %3zu  serial %8.3f ms  parallel "
      "%8.3f ms  speedup %5.2fx  max|diff| %.3g\n",
      rows, d_in, d_out, t_ref * 1e3, t_par * 1e3, t_ref / t_par,
      max_abs_diff(out_par, out_ref));
}

void bench_conv(std::size_t channels, std::size_t length, std::size_t taps) {
  Rng rng(mix_seed(0xc0de, channels + length + taps));
  const Tensor x = random_tensor({64, channels, length}, rng);
  const Tensor k = random_tensor({channels, taps}, rng);

  Tensor out_par, out_ref;
  const double t_par = time_best_of(
      [&] { out_par = depthwise_conv_axis(x, 2, k, 1); }, 5);
  const double t_ref = time_best_of(
      [&] { out_ref = ref::depthwise_conv_axis(x, 2, k, 1); }, 5);
  std::printf(
      "depthwise_conv [64 x %3zu x %4zu] k=%zu  serial %8.3f ms  parallel "
      "%8.3f ms  speedup %5.2fx  max|diff| %.3g\n",
      channels, length, taps, t_ref * 1e3, t_par * 1e3, t_ref / t_par,
      max_abs_diff(out_par, out_ref));
}

void bench_discriminability(std::size_t clips, std::size_t bins) {
  Rng rng(mix_seed(0xd15c, clips + bins));
  PowerSpectrumSet s;
  s.power = random_tensor({clips, bins}, rng);
  for (std::size_t i = 0; i < s.power.numel(); ++i)
    s.power[i] = std::fabs(s.power[i]);
  s.labels.resize(clips);
  for (std::size_t i = 0; i < clips; ++i) s.labels[i] = i % 4;
  s.frames = (bins - 1) * 2;

  DiscriminabilityCurve out_par, out_ref;
  const double t_par =
      time_best_of([&] { out_par = discriminability(s); }, 5);
  const double t_ref =
      time_best_of([&] { out_ref = ref::discriminability(s); }, 5);
  double worst = 0.0;
  for (std::size_t b = 0; b < bins; ++b)
    worst = std::max(worst, std::fabs(out_par.d_normalized[b] -
                                      out_ref.d_normalized[b]));
  std::printf(
      "discriminability [%6zu x %3zu]      serial %8.3f ms  parallel "
      "%8.3f ms  speedup %5.2fx  max|diff| %.3g\n",
      clips, bins, t_ref * 1e3, t_par * 1e3, t_ref / t_par, worst);
}

}  // namespace

int main() {
  std::printf("threads: %d\n\n", par::threads());

  bench_linear(1024, 64, 64);
  bench_linear(16384, 64, 64);
  bench_linear(16384, 256, 256);
  std::printf("\n");

  bench_conv(16, 256, 3);
  bench_conv(64, 1024, 3);
  bench_conv(64, 4096, 7);
  std::printf("\n");

  bench_discriminability(4096, 9);
  bench_discriminability(65536, 17);
  return 0;
}
