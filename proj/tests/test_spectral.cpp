#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "f2f/errors.hpp"
#include "f2f/rng.hpp"
#include "f2f/spectral.hpp"
#include "test_util.hpp"

using namespace f2f;
using testutil::random_complex;
using testutil::random_tensor;

namespace {

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double rel_l2(const ComplexTensor& a, const ComplexTensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

}  // namespace

TEST_CASE("window endpoints and closed form") {
  Tensor w4 = hann_window(4);
  CHECK(w4[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(w4[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w4[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w4[3] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor w8 = hann_window(8);
  CHECK(w8[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(w8[4] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(hann_window(1), ConfigError);
}

TEST_CASE("squared window overlap-adds to a constant at 75% overlap") {
  // direct summation over hop = n/4 placements; interior positions only
  const std::size_t n = 8, hop = 2;
  Tensor w = hann_window(n);
  // value at one interior position, summed over all frames covering it
  auto coverage = [&](std::size_t pos) {
    double acc = 0.0;
    for (int start = static_cast<int>(pos) - static_cast<int>(n) + 1;
         start <= static_cast<int>(pos); ++start) {
      if (start % static_cast<int>(hop) != 0) continue;
      const int j = static_cast<int>(pos) - start;
      acc += w[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];
    }
    return acc;
  };
  const double interior = coverage(100);
  CHECK(interior == doctest::Approx(1.5).epsilon(1e-12));
  for (std::size_t pos = 100; pos < 120; ++pos)
    CHECK(coverage(pos) == doctest::Approx(interior).epsilon(1e-12));
}

TEST_CASE("transform of a constant concentrates at DC") {
  ComplexTensor x({4}, {{1, 0}, {1, 0}, {1, 0}, {1, 0}});
  ComplexTensor y = fft(x);
  CHECK(std::abs(y[0] - std::complex<double>(4, 0)) < 1e-12);
  for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(y[k]) < 1e-12);
}

TEST_CASE("impulse transforms to a flat spectrum") {
  ComplexTensor x({4}, {{1, 0}, {0, 0}, {0, 0}, {0, 0}});
  ComplexTensor y = fft(x);
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(std::abs(y[k] - std::complex<double>(1, 0)) < 1e-12);
}

TEST_CASE("fast transform agrees with the naive oracle and Parseval") {
  Rng rng(101);
  for (std::size_t n : {4u, 8u, 16u, 32u, 64u}) {
    for (int trial = 0; trial < 100; ++trial) {
      ComplexTensor x = random_complex({n}, rng);
      ComplexTensor fast = fft(x);
      ComplexTensor slow = dft_naive(x);
      CHECK(max_abs_diff(fast, slow) < 1e-9 * static_cast<double>(n));

      double time_energy = 0.0, freq_energy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        time_energy += std::norm(x[i]);
        freq_energy += std::norm(fast[i]);
      }
      freq_energy /= static_cast<double>(n);
      CHECK(std::abs(time_energy - freq_energy) <= 1e-9 * time_energy);
    }
  }
}

TEST_CASE("round trip holds for every power of two up to 1024") {
  Rng rng(7);
  for (std::size_t n = 2; n <= 1024; n *= 2) {
    ComplexTensor x = random_complex({n}, rng);
    CHECK(rel_l2(ifft(fft(x)), x) < 1e-10);
  }
}

TEST_CASE("non-power-of-two lengths fall back to the naive path") {
  Rng rng(13);
  ComplexTensor x = random_complex({6}, rng);
  ComplexTensor y = fft(x);
  ComplexTensor oracle = dft_naive(x);
  CHECK(max_abs_diff(y, oracle) == 0.0);
  CHECK(rel_l2(ifft(y), x) < 1e-10);
}

TEST_CASE("transforms are linear") {
  Rng rng(19);
  const std::size_t n = 16;
  ComplexTensor x = random_complex({n}, rng);
  ComplexTensor y = random_complex({n}, rng);
  const double a = 0.7, b = -1.3;
  ComplexTensor mix({n});
  for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];
  ComplexTensor lhs = fft(mix);
  ComplexTensor fx = fft(x), fy = fft(y);
  ComplexTensor rhs({n});
  for (std::size_t i = 0; i < n; ++i) rhs[i] = a * fx[i] + b * fy[i];
  CHECK(rel_l2(lhs, rhs) < 1e-10);
}

TEST_CASE("real transform of a pure cosine lands on its bin") {
  const std::size_t n = 8;
  Tensor x({n});
  for (std::size_t t = 0; t < n; ++t)
    x[t] = std::cos(2.0 * 3.14159265358979323846 * 2.0 * static_cast<double>(t) /
                    static_cast<double>(n));
  ComplexTensor spec = rfft(x);
  REQUIRE(spec.numel() == n / 2 + 1);
  // naive-DFT confirmation of the same value
  ComplexTensor full({n});
  for (std::size_t t = 0; t < n; ++t) full[t] = {x[t], 0.0};
  ComplexTensor oracle = dft_naive(full);
  for (std::size_t k = 0; k <= n / 2; ++k)
    CHECK(std::abs(spec[k] - oracle[k]) < 1e-12);
  CHECK(std::abs(spec[2] - std::complex<double>(4, 0)) < 1e-10);
  for (std::size_t k = 0; k <= n / 2; ++k)
    if (k != 2) CHECK(std::abs(spec[k]) < 1e-10);
}

TEST_CASE("real transform of a constant is n times the value at bin 0") {
  Tensor x = Tensor::full({8}, 3.25);
  ComplexTensor spec = rfft(x);
  CHECK(std::abs(spec[0] - std::complex<double>(26.0, 0)) < 1e-12);
  for (std::size_t k = 1; k < spec.numel(); ++k) CHECK(std::abs(spec[k]) < 1e-12);
}

TEST_CASE("real transform round trips") {
  Rng rng(23);
  Tensor x = random_tensor({16}, rng);
  Tensor back = irfft(rfft(x), 16);
  CHECK(testutil::rel_l2(back, x) < 1e-10);
  CHECK_THROWS_AS(irfft(rfft(x), 32), DimensionError);
}

TEST_CASE("rfft and irfft adjoints satisfy the inner-product identity") {
  Rng rng(29);
  for (std::size_t n : {8u, 16u}) {
    // <rfft(x), G> == <x, rfft_backward(G)> over real components
    Tensor x = random_tensor({n}, rng);
    ComplexTensor g = random_complex({n / 2 + 1}, rng);
    CHECK(testutil::dot(rfft(x), g) ==
          doctest::Approx(testutil::dot(x, rfft_backward(g, n))).epsilon(1e-11));

    // <irfft(X), gy> == <X, irfft_backward(gy)>
    ComplexTensor spec = random_complex({n / 2 + 1}, rng);
    Tensor gy = random_tensor({n}, rng);
    CHECK(testutil::dot(irfft(spec, n), gy) ==
          doctest::Approx(testutil::dot(spec, irfft_backward(gy))).epsilon(1e-11));
  }
}

TEST_CASE("short-time frame grid follows the length rule") {
  Rng rng(31);
  Tensor x = random_tensor({16}, rng);
  SpectralFrames frames = stft(x, 8, 2);
  CHECK(frames.bins() == 5);
  CHECK(frames.frames() == 9);
  CHECK(frames.channels() == 1);
}

TEST_CASE("short-time transform of zeros is all zero frames") {
  Tensor x({32});
  SpectralFrames frames = stft(x, 16, 4);
  for (std::size_t i = 0; i < frames.data.numel(); ++i)
    CHECK(std::abs(frames.data[i]) == 0.0);
}

TEST_CASE("short-time transform validates its preconditions") {
  Tensor x({16});
  CHECK_THROWS_AS(stft(x, 6, 2), ConfigError);    // not a power of two
  CHECK_THROWS_AS(stft(x, 8, 3), ConfigError);    // hop does not divide T
  CHECK_THROWS_AS(stft(Tensor({4}), 8, 2), ConfigError);  // too short
}

TEST_CASE("inversion reconstructs random signals at the contract grid") {
  Rng rng(37);
  const std::size_t combos[3][3] = {{16, 8, 2}, {32, 16, 4}, {64, 32, 8}};
  for (const auto& combo : combos) {
    for (int trial = 0; trial < 5; ++trial) {
      Tensor x = random_tensor({combo[0]}, rng);
      Tensor back = istft(stft(x, combo[1], combo[2]));
      REQUIRE(back.same_shape(x));
      CHECK(testutil::rel_l2(back, x) < 1e-8);
    }
  }
}

TEST_CASE("inversion recovers an impulse") {
  Tensor x({16});
  x[7] = 1.0;
  Tensor back = istft(stft(x, 8, 2));
  CHECK(testutil::rel_l2(back, x) < 1e-8);
}

TEST_CASE("inversion is linear in the frames") {
  Rng rng(41);
  Tensor x1 = random_tensor({16}, rng);
  Tensor x2 = random_tensor({16}, rng);
  SpectralFrames f1 = stft(x1, 8, 2);
  SpectralFrames f2 = stft(x2, 8, 2);
  const double a = 1.7, b = -0.4;
  SpectralFrames mix = f1;
  for (std::size_t i = 0; i < mix.data.numel(); ++i)
    mix.data[i] = a * f1.data[i] + b * f2.data[i];
  Tensor lhs = istft(mix);
  Tensor y1 = istft(f1), y2 = istft(f2);
  Tensor rhs({16});
  for (std::size_t i = 0; i < 16; ++i) rhs[i] = a * y1[i] + b * y2[i];
  CHECK(testutil::rel_l2(lhs, rhs) < 1e-10);
}

TEST_CASE("batched channels reconstruct independently") {
  Rng rng(43);
  Tensor x = random_tensor({3, 32}, rng);
  SpectralFrames frames = stft(x, 16, 4);
  CHECK(frames.channels() == 3);
  Tensor back = istft(frames);
  REQUIRE(back.same_shape(x));
  CHECK(testutil::rel_l2(back, x) < 1e-8);
}

TEST_CASE("short-time adjoints satisfy the inner-product identity") {
  Rng rng(47);
  // <stft(x), G> == <x, stft_backward(G)>
  Tensor x = random_tensor({2, 16}, rng);
  SpectralFrames fx = stft(x, 8, 2);
  SpectralFrames g = fx;
  g.data = random_complex(fx.data.shape(), rng);
  CHECK(testutil::dot(fx.data, g.data) ==
        doctest::Approx(testutil::dot(x, stft_backward(g))).epsilon(1e-11));

  // <istft(F), gy> == <F, istft_backward(gy)>
  SpectralFrames f = fx;
  f.data = random_complex(fx.data.shape(), rng);
  Tensor gy = random_tensor({2, 16}, rng);
  SpectralFrames gf = istft_backward(gy, 8, 2);
  CHECK(testutil::dot(istft(f), gy) ==
        doctest::Approx(testutil::dot(f.data, gf.data)).epsilon(1e-11));
}

TEST_CASE("3D transform of a constant volume concentrates at the center") {
  const std::size_t h = 4, w = 4, t = 4;
  Tensor volume = Tensor::full({h, w, t}, 2.0);
  ComplexTensor spec = fft3d_shifted(volume);
  const std::size_t center = (h / 2 * w + w / 2) * t + t / 2;
  CHECK(std::abs(spec[center] - std::complex<double>(2.0 * h * w * t, 0)) < 1e-9);
  for (std::size_t i = 0; i < spec.numel(); ++i)
    if (i != center) CHECK(std::abs(spec[i]) < 1e-9);
}

TEST_CASE("3D transform places cosine peaks symmetrically") {
  const std::size_t h = 16, w = 4, t = 4;
  Tensor volume({h, w, t});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t k = 0; k < t; ++k)
        volume[(i * w + j) * t + k] =
            std::cos(2.0 * 3.14159265358979323846 * 3.0 * static_cast<double>(i) /
                     static_cast<double>(h));
  ComplexTensor spec = fft3d_shifted(volume);
  const std::size_t ch = h / 2, cw = w / 2, ct = t / 2;
  const double expected = 0.5 * h * w * t;
  CHECK(std::abs(spec[((ch + 3) * w + cw) * t + ct] -
                 std::complex<double>(expected, 0)) < 1e-9);
  CHECK(std::abs(spec[((ch - 3) * w + cw) * t + ct] -
                 std::complex<double>(expected, 0)) < 1e-9);

  // per-axis naive-DFT confirmation of the H-axis line through the peak
  ComplexTensor line({h});
  for (std::size_t i = 0; i < h; ++i) line[i] = {volume[(i * w) * t], 0.0};
  ComplexTensor oracle = dft_naive(line);
  CHECK(std::abs(oracle[3] - std::complex<double>(0.5 * h, 0)) < 1e-9);
}

TEST_CASE("3D transform preserves energy") {
  Rng rng(53);
  Tensor volume = random_tensor({8, 4, 4}, rng);
  ComplexTensor spec = fft3d_shifted(volume);
  double time_energy = 0.0, freq_energy = 0.0;
  for (std::size_t i = 0; i < volume.numel(); ++i)
    time_energy += volume[i] * volume[i];
  for (std::size_t i = 0; i < spec.numel(); ++i) freq_energy += std::norm(spec[i]);
  freq_energy /= static_cast<double>(volume.numel());
  CHECK(std::abs(time_energy - freq_energy) <= 1e-9 * time_energy);
}

TEST_CASE("spectrum map of a constant volume with DC removed is zero") {
  Tensor volume = Tensor::full({8, 8, 4}, 5.0);
  SpectrumOptions opts;
  opts.remove_dc = true;
  SpectrumMap map = spectrum_map(volume, opts);
  CHECK(map.dc_removed);
  for (std::size_t i = 0; i < map.values.numel(); ++i) CHECK(map.values[i] == 0.0);
}

TEST_CASE("whitening divides by the radial distance before compression") {
  Rng rng(59);
  Tensor volume = random_tensor({8, 8, 4}, rng);
  SpectrumOptions raw_opts, white_opts;
  white_opts.whiten = true;
  SpectrumMap raw = spectrum_map(volume, raw_opts);
  SpectrumMap white = spectrum_map(volume, white_opts);
  const std::size_t ch = 4, cw = 4;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double di = static_cast<double>(i) - static_cast<double>(ch);
      const double dj = static_cast<double>(j) - static_cast<double>(cw);
      double r = std::sqrt(di * di + dj * dj);
      if (r == 0.0) r = 1.0;
      // undo the log on both sides, then the radius relation must hold
      const double m_raw = std::expm1(raw.values[i * 8 + j]);
      const double m_white = std::expm1(white.values[i * 8 + j]);
      CHECK(m_white * r == doctest::Approx(m_raw).epsilon(1e-9));
    }
}

TEST_CASE("planted spatial frequency shows up at the right map location") {
  const std::size_t h = 32, w = 32, t = 16;
  Tensor volume({h, w, t});
  // sinusoid moving in time: spatial frequency (5, 0), drifting phase
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t k = 0; k < t; ++k)
        volume[(i * w + j) * t + k] =
            std::cos(2.0 * 3.14159265358979323846 *
                     (5.0 * static_cast<double>(i) / static_cast<double>(h)));
  SpectrumOptions opts;
  opts.remove_dc = true;
  SpectrumMap map = spectrum_map(volume, opts);
  std::size_t best = 0;
  for (std::size_t i = 0; i < map.values.numel(); ++i)
    if (map.values[i] > map.values[best]) best = i;
  const std::size_t bi = best / w, bj = best % w;
  CHECK(bj == w / 2);
  CHECK((bi == h / 2 + 5 || bi == h / 2 - 5));
}

TEST_CASE("class means reduce to the single map for singleton classes") {
  Rng rng(61);
  std::vector<Tensor> volumes{random_tensor({8, 8, 4}, rng),
                              random_tensor({8, 8, 4}, rng)};
  std::vector<int> labels{0, 1};
  SpectrumOptions opts;
  ClassMeanSpectra means = class_mean_spectra(volumes, labels, opts);
  REQUIRE(means.per_class.size() == 2);
  SpectrumMap direct = spectrum_map(volumes[0], opts);
  CHECK(testutil::max_abs_diff(means.per_class.at(0).values, direct.values) == 0.0);
}

TEST_CASE("duplicating a volume does not move its class mean") {
  Rng rng(67);
  Tensor v = random_tensor({8, 8, 4}, rng);
  SpectrumOptions opts;
  ClassMeanSpectra once = class_mean_spectra({v}, {0}, opts);
  ClassMeanSpectra twice = class_mean_spectra({v, v}, {0, 0}, opts);
  CHECK(testutil::max_abs_diff(once.per_class.at(0).values,
                               twice.per_class.at(0).values) < 1e-15);
}

TEST_CASE("class means average linear magnitudes before compression") {
  Rng rng(71);
  Tensor a = random_tensor({8, 8, 4}, rng);
  Tensor b = random_tensor({8, 8, 4}, rng);
  SpectrumOptions opts;
  ClassMeanSpectra mean = class_mean_spectra({a, b}, {0, 0}, opts);
  SpectrumMap ma = spectrum_map(a, opts);
  SpectrumMap mb = spectrum_map(b, opts);
  for (std::size_t i = 0; i < ma.values.numel(); ++i) {
    const double expect =
        std::log1p(0.5 * (std::expm1(ma.values[i]) + std::expm1(mb.values[i])));
    CHECK(mean.per_class.at(0).values[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("empty classes are excluded with a warning record") {
  Rng rng(73);
  std::vector<Tensor> volumes{random_tensor({4, 4, 4}, rng)};
  std::vector<int> labels{1};
  ClassMeanSpectra means = class_mean_spectra(volumes, labels, {}, 3);
  CHECK(means.per_class.count(1) == 1);
  CHECK(means.per_class.count(0) == 0);
  CHECK(means.warnings.size() == 2);
}

TEST_CASE("map export writes a readable PGM") {
  Rng rng(79);
  SpectrumMap map = spectrum_map(random_tensor({4, 4, 4}, rng), {});
  const std::string path = "./map.pgm";
  write_pgm(path, map);
  std::ifstream in(path);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P2");
  CHECK(w == 4);
  CHECK(h == 4);
  CHECK(maxval == 65535);
  long value = -1;
  long lo = 65536, hi = -1;
  while (in >> value) {
    CHECK(value >= 0);
    CHECK(value <= 65535);
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  CHECK(lo == 0);
  CHECK(hi == 65535);
  std::remove(path.c_str());
}
