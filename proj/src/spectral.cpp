#include "f2f/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "f2f/errors.hpp"
#include "f2f/parallel.hpp"

namespace f2f {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kWolaFloor = 1e-12;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// iterative radix-2; sign = -1 forward, +1 inverse (caller scales)
void fft_radix2_inplace(std::complex<double>* a, std::size_t n, int sign) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t m = 2; m <= n; m <<= 1) {
    const std::size_t half = m / 2;
    for (std::size_t start = 0; start < n; start += m)
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> tw =
            std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(j) /
                                static_cast<double>(m));
        const std::complex<double> u = a[start + j];
        const std::complex<double> v = a[start + j + half] * tw;
        a[start + j] = u + v;
        a[start + j + half] = u - v;
      }
  }
}

void dft_line(const std::complex<double>* in, std::complex<double>* out,
              std::size_t n, int sign) {
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t)
      acc += in[t] * std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(k) *
                                         static_cast<double>(t) /
                                         static_cast<double>(n));
    out[k] = acc;
  }
}

// forward or inverse transform of one line, naive fallback off powers of two
void transform_line(std::complex<double>* a, std::size_t n, bool inverse) {
  const int sign = inverse ? +1 : -1;
  if (is_pow2(n)) {
    fft_radix2_inplace(a, n, sign);
  } else {
    std::vector<std::complex<double>> tmp(a, a + n);
    dft_line(tmp.data(), a, n, sign);
  }
  if (inverse)
    for (std::size_t i = 0; i < n; ++i) a[i] /= static_cast<double>(n);
}

void check_rank1(const ComplexTensor& x, const char* op) {
  if (x.rank() != 1)
    throw DimensionError(std::string(op) + " expects a rank-1 tensor, got " +
                         shape_to_string(x.shape()));
}

}  // namespace

Tensor hann_window(std::size_t n) {
  if (n < 2) throw ConfigError("window length must be at least 2, got " + std::to_string(n));
  Tensor w({n});
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                 static_cast<double>(n)));
  return w;
}

ComplexTensor fft(const ComplexTensor& x) {
  check_rank1(x, "fft");
  ComplexTensor out = x;
  transform_line(out.data(), out.numel(), false);
  return out;
}

ComplexTensor ifft(const ComplexTensor& x) {
  check_rank1(x, "ifft");
  ComplexTensor out = x;
  transform_line(out.data(), out.numel(), true);
  return out;
}

ComplexTensor dft_naive(const ComplexTensor& x) {
  check_rank1(x, "dft_naive");
  ComplexTensor out(x.shape());
  dft_line(x.data(), out.data(), x.numel(), -1);
  return out;
}

ComplexTensor idft_naive(const ComplexTensor& x) {
  check_rank1(x, "idft_naive");
  ComplexTensor out(x.shape());
  dft_line(x.data(), out.data(), x.numel(), +1);
  const double n = static_cast<double>(x.numel());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= n;
  return out;
}

ComplexTensor rfft(const Tensor& x) {
  if (x.rank() != 1)
    throw DimensionError("rfft expects a rank-1 tensor, got " + shape_to_string(x.shape()));
  const std::size_t n = x.numel();
  if (n < 2 || n % 2 != 0)
    throw ConfigError("rfft length must be even and at least 2, got " + std::to_string(n));
  ComplexTensor full({n});
  for (std::size_t i = 0; i < n; ++i) full[i] = {x[i], 0.0};
  transform_line(full.data(), n, false);
  ComplexTensor out({n / 2 + 1});
  for (std::size_t k = 0; k <= n / 2; ++k) out[k] = full[k];
  return out;
}

Tensor irfft(const ComplexTensor& spectrum, std::size_t n) {
  if (spectrum.rank() != 1)
    throw DimensionError("irfft expects a rank-1 spectrum, got " +
                         shape_to_string(spectrum.shape()));
  if (n < 2 || n % 2 != 0 || spectrum.numel() != n / 2 + 1)
    throw DimensionError("irfft: spectrum length " + std::to_string(spectrum.numel()) +
                         " does not match signal length " + std::to_string(n));
  ComplexTensor full({n});
  for (std::size_t k = 0; k <= n / 2; ++k) full[k] = spectrum[k];
  for (std::size_t k = 1; k < n / 2; ++k) full[n - k] = std::conj(spectrum[k]);
  transform_line(full.data(), n, true);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real();
  return out;
}

Tensor rfft_backward(const ComplexTensor& grad_spectrum, std::size_t n) {
  if (grad_spectrum.rank() != 1 || grad_spectrum.numel() != n / 2 + 1 || n % 2 != 0)
    throw DimensionError("rfft backward: gradient " +
                         shape_to_string(grad_spectrum.shape()) +
                         " does not match signal length " + std::to_string(n));
  // adjoint of bin-truncation is zero extension (no Hermitian mirroring);
  // then the adjoint of the forward DFT is n times the inverse DFT
  ComplexTensor padded({n});
  for (std::size_t k = 0; k <= n / 2; ++k) padded[k] = grad_spectrum[k];
  transform_line(padded.data(), n, true);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i)
    out[i] = padded[i].real() * static_cast<double>(n);
  return out;
}

ComplexTensor irfft_backward(const Tensor& grad_signal) {
  if (grad_signal.rank() != 1 || grad_signal.numel() % 2 != 0)
    throw DimensionError("irfft backward expects an even rank-1 gradient, got " +
                         shape_to_string(grad_signal.shape()));
  const std::size_t n = grad_signal.numel();
  ComplexTensor spec = rfft(grad_signal);
  // interior bins appear twice in the Hermitian extension; the edge bins'
  // imaginary parts never reach the real output
  const double scale2 = 2.0 / static_cast<double>(n);
  const double scale1 = 1.0 / static_cast<double>(n);
  for (std::size_t k = 1; k < n / 2; ++k)
    spec[k] = {spec[k].real() * scale2, spec[k].imag() * scale2};
  spec[0] = {spec[0].real() * scale1, 0.0};
  spec[n / 2] = {spec[n / 2].real() * scale1, 0.0};
  return spec;
}

namespace {

struct StftGeometry {
  std::size_t channels = 1, t = 0, n_fft = 0, hop = 0;
  std::size_t pad = 0, padded = 0, bins = 0, frames = 0;
  bool mono = false;
};

StftGeometry stft_geometry(const std::vector<std::size_t>& shape,
                           std::size_t n_fft, std::size_t hop) {
  StftGeometry g;
  if (shape.size() == 1) {
    g.mono = true;
    g.t = shape[0];
  } else if (shape.size() == 2) {
    g.channels = shape[0];
    g.t = shape[1];
  } else {
    throw DimensionError("stft expects [T] or [channels, T], got " +
                         shape_to_string(shape));
  }
  if (!is_pow2(n_fft) || n_fft < 2)
    throw ConfigError("n_fft must be a power of two, got " + std::to_string(n_fft));
  if (hop == 0 || g.t % hop != 0)
    throw ConfigError("hop " + std::to_string(hop) + " must divide T " +
                      std::to_string(g.t));
  if (g.t < n_fft)
    throw ConfigError("sequence too short for window: T " + std::to_string(g.t) +
                      " < n_fft " + std::to_string(n_fft));
  g.n_fft = n_fft;
  g.hop = hop;
  g.pad = n_fft / 2;
  g.padded = g.t + 2 * g.pad;
  g.bins = n_fft / 2 + 1;
  g.frames = g.t / hop + 1;
  return g;
}

// reflection without boundary repetition: padded index -> source index
std::size_t reflect_source(std::size_t p, std::size_t pad, std::size_t t) {
  if (p < pad) return pad - p;
  if (p >= pad + t) return 2 * t - 2 + pad - p;
  return p - pad;
}

// squared-window overlap-add envelope over the padded domain
Tensor wola_envelope(const StftGeometry& g, const Tensor& window) {
  Tensor env({g.padded});
  for (std::size_t i = 0; i < g.frames; ++i) {
    const std::size_t start = i * g.hop;
    for (std::size_t j = 0; j < g.n_fft; ++j)
      env[start + j] += window[j] * window[j];
  }
  return env;
}

}  // namespace

SpectralFrames stft(const Tensor& x, std::size_t n_fft, std::size_t hop) {
  const StftGeometry g = stft_geometry(x.shape(), n_fft, hop);
  const Tensor window = hann_window(n_fft);

  SpectralFrames out;
  out.n_fft = n_fft;
  out.hop = hop;
  out.original_length = g.t;
  out.mono = g.mono;
  out.data = ComplexTensor({g.channels, g.bins, g.frames});

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t job = 0;
       job < static_cast<std::int64_t>(g.channels * g.frames); ++job) {
    const std::size_t c = static_cast<std::size_t>(job) / g.frames;
    const std::size_t i = static_cast<std::size_t>(job) % g.frames;
    const double* xc = x.data() + c * g.t;
    const std::size_t start = i * g.hop;

    Tensor frame({g.n_fft});
    for (std::size_t j = 0; j < g.n_fft; ++j)
      frame[j] = window[j] * xc[reflect_source(start + j, g.pad, g.t)];
    const ComplexTensor spec = rfft(frame);
    for (std::size_t f = 0; f < g.bins; ++f)
      out.data[(c * g.bins + f) * g.frames + i] = spec[f];
  }
  return out;
}

Tensor istft(const SpectralFrames& frames) {
  if (frames.data.rank() != 3)
    throw DimensionError("istft expects [channels, bins, frames] data, got " +
                         shape_to_string(frames.data.shape()));
  const StftGeometry g =
      stft_geometry(frames.mono ? std::vector<std::size_t>{frames.original_length}
                                : std::vector<std::size_t>{frames.channels(),
                                                           frames.original_length},
                    frames.n_fft, frames.hop);
  if (frames.bins() != g.bins || frames.frames() != g.frames ||
      frames.channels() != g.channels)
    throw DimensionError("istft: frame grid " + shape_to_string(frames.data.shape()) +
                         " inconsistent with n_fft " + std::to_string(frames.n_fft) +
                         ", hop " + std::to_string(frames.hop) + ", T " +
                         std::to_string(frames.original_length));

  const Tensor window = hann_window(g.n_fft);
  const Tensor env = wola_envelope(g, window);
  Tensor out(frames.mono ? std::vector<std::size_t>{g.t}
                         : std::vector<std::size_t>{g.channels, g.t});

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(g.channels); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    Tensor acc({g.padded});
    ComplexTensor spec({g.bins});
    for (std::size_t i = 0; i < g.frames; ++i) {
      for (std::size_t f = 0; f < g.bins; ++f)
        spec[f] = frames.data[(c * g.bins + f) * g.frames + i];
      const Tensor frame = irfft(spec, g.n_fft);
      const std::size_t start = i * g.hop;
      for (std::size_t j = 0; j < g.n_fft; ++j)
        acc[start + j] += window[j] * frame[j];
    }
    double* oc = out.data() + c * g.t;
    for (std::size_t t = 0; t < g.t; ++t)
      oc[t] = acc[g.pad + t] / std::max(env[g.pad + t], kWolaFloor);
  }
  return out;
}

Tensor stft_backward(const SpectralFrames& grad_frames) {
  const StftGeometry g = stft_geometry(
      grad_frames.mono
          ? std::vector<std::size_t>{grad_frames.original_length}
          : std::vector<std::size_t>{grad_frames.channels(),
                                     grad_frames.original_length},
      grad_frames.n_fft, grad_frames.hop);
  if (grad_frames.bins() != g.bins || grad_frames.frames() != g.frames ||
      grad_frames.channels() != g.channels)
    throw DimensionError("stft backward: frame grid " +
                         shape_to_string(grad_frames.data.shape()) +
                         " inconsistent with its metadata");
  const Tensor window = hann_window(g.n_fft);
  Tensor out(grad_frames.mono ? std::vector<std::size_t>{g.t}
                              : std::vector<std::size_t>{g.channels, g.t});

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(g.channels); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    Tensor dpad({g.padded});
    ComplexTensor spec({g.bins});
    for (std::size_t i = 0; i < g.frames; ++i) {
      for (std::size_t f = 0; f < g.bins; ++f)
        spec[f] = grad_frames.data[(c * g.bins + f) * g.frames + i];
      const Tensor dframe = rfft_backward(spec, g.n_fft);
      const std::size_t start = i * g.hop;
      for (std::size_t j = 0; j < g.n_fft; ++j)
        dpad[start + j] += window[j] * dframe[j];
    }
    // fold the reflection padding back onto the source samples
    double* oc = out.data() + c * g.t;
    for (std::size_t t = 0; t < g.t; ++t) oc[t] = dpad[g.pad + t];
    for (std::size_t p = 0; p < g.pad; ++p)
      oc[reflect_source(p, g.pad, g.t)] += dpad[p];
    for (std::size_t p = g.pad + g.t; p < g.padded; ++p)
      oc[reflect_source(p, g.pad, g.t)] += dpad[p];
  }
  return out;
}

SpectralFrames istft_backward(const Tensor& grad_signal, std::size_t n_fft,
                              std::size_t hop) {
  const StftGeometry g = stft_geometry(grad_signal.shape(), n_fft, hop);
  const Tensor window = hann_window(g.n_fft);
  const Tensor env = wola_envelope(g, window);

  SpectralFrames out;
  out.n_fft = n_fft;
  out.hop = hop;
  out.original_length = g.t;
  out.mono = g.mono;
  out.data = ComplexTensor({g.channels, g.bins, g.frames});

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(g.channels); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const double* dyc = grad_signal.data() + c * g.t;
    Tensor dacc({g.padded});
    for (std::size_t t = 0; t < g.t; ++t)
      dacc[g.pad + t] = dyc[t] / std::max(env[g.pad + t], kWolaFloor);
    Tensor dframe({g.n_fft});
    for (std::size_t i = 0; i < g.frames; ++i) {
      const std::size_t start = i * g.hop;
      for (std::size_t j = 0; j < g.n_fft; ++j)
        dframe[j] = window[j] * dacc[start + j];
      const ComplexTensor dspec = irfft_backward(dframe);
      for (std::size_t f = 0; f < g.bins; ++f)
        out.data[(c * g.bins + f) * g.frames + i] = dspec[f];
    }
  }
  return out;
}

namespace {

// in-place transform of every line along `axis` of a rank-3 complex volume
void transform_axis(ComplexTensor& v, std::size_t axis, bool inverse) {
  const auto& shape = v.shape();
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < axis; ++i) pre *= shape[i];
  const std::size_t len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) post *= shape[i];

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::int64_t outer = 0; outer < static_cast<std::int64_t>(pre * post);
       ++outer) {
    const std::size_t p = static_cast<std::size_t>(outer) / post;
    const std::size_t q = static_cast<std::size_t>(outer) % post;
    const std::size_t base = p * len * post + q;
    std::vector<std::complex<double>> line(len);
    for (std::size_t a = 0; a < len; ++a) line[a] = v[base + a * post];
    transform_line(line.data(), len, inverse);
    for (std::size_t a = 0; a < len; ++a) v[base + a * post] = line[a];
  }
}

ComplexTensor fftshift_all(const ComplexTensor& v) {
  const auto& shape = v.shape();
  const auto strides = row_major_strides(shape);
  ComplexTensor out(shape);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < v.numel(); ++flat) {
    std::size_t rem = flat, src = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      idx[d] = rem / strides[d];
      rem %= strides[d];
      // out[i] = in[(i + ceil(d/2)) mod d] puts bin 0 at floor(d/2)
      const std::size_t shift = shape[d] - shape[d] / 2;
      src += ((idx[d] + shift) % shape[d]) * strides[d];
    }
    out[flat] = v[src];
  }
  return out;
}

}  // namespace

ComplexTensor fft3d_shifted(const Tensor& volume) {
  if (volume.rank() != 3)
    throw DimensionError("fft3d expects [H, W, T], got " + shape_to_string(volume.shape()));
  if (volume.numel() == 0) throw ConfigError("empty volume");
  ComplexTensor v(volume.shape());
  for (std::size_t i = 0; i < volume.numel(); ++i) v[i] = {volume[i], 0.0};
  for (std::size_t axis = 0; axis < 3; ++axis) transform_axis(v, axis, false);
  return fftshift_all(v);
}

namespace {

// magnitude pipeline before log compression: [H, W] central temporal slice
Tensor spectrum_linear(const Tensor& volume, const SpectrumOptions& opts) {
  const ComplexTensor spec = fft3d_shifted(volume);
  const std::size_t h = spec.dim(0), w = spec.dim(1), t = spec.dim(2);
  const std::size_t ch = h / 2, cw = w / 2, ct = t / 2;

  Tensor map({h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      double m = std::abs(spec[(i * w + j) * t + ct]);
      if (opts.remove_dc && i == ch && j == cw) m = 0.0;
      if (opts.whiten) {
        const double di = static_cast<double>(i) - static_cast<double>(ch);
        const double dj = static_cast<double>(j) - static_cast<double>(cw);
        const double r = std::sqrt(di * di + dj * dj);
        m /= (r == 0.0 ? 1.0 : r);
      }
      map[i * w + j] = m;
    }
  return map;
}

SpectrumMap finish_map(Tensor linear, const SpectrumOptions& opts) {
  SpectrumMap out;
  out.height = linear.dim(0);
  out.width = linear.dim(1);
  out.dc_removed = opts.remove_dc;
  out.whitened = opts.whiten;
  for (std::size_t i = 0; i < linear.numel(); ++i)
    linear[i] = std::log1p(linear[i]);
  out.values = std::move(linear);
  return out;
}

}  // namespace

SpectrumMap spectrum_map(const Tensor& volume, const SpectrumOptions& opts) {
  return finish_map(spectrum_linear(volume, opts), opts);
}

ClassMeanSpectra class_mean_spectra(const std::vector<Tensor>& volumes,
                                    const std::vector<int>& labels,
                                    const SpectrumOptions& opts,
                                    int num_classes) {
  if (volumes.size() != labels.size())
    throw DimensionError("class_mean_spectra: " + std::to_string(volumes.size()) +
                         " volumes vs " + std::to_string(labels.size()) + " labels");
  for (const auto& v : volumes)
    if (!v.same_shape(volumes.front()))
      throw DimensionError("class_mean_spectra: volumes must share one shape");

  int max_label = -1;
  for (int c : labels) max_label = std::max(max_label, c);
  const int classes = num_classes < 0 ? max_label + 1 : num_classes;

  ClassMeanSpectra result;
  for (int c = 0; c < classes; ++c) {
    Tensor sum;
    std::size_t count = 0;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
      if (labels[i] != c) continue;
      Tensor m = spectrum_linear(volumes[i], opts);
      if (count == 0) {
        sum = std::move(m);
      } else {
        for (std::size_t j = 0; j < sum.numel(); ++j) sum[j] += m[j];
      }
      ++count;
    }
    if (count == 0) {
      result.warnings.push_back("class " + std::to_string(c) +
                                " has no volumes; excluded");
      continue;
    }
    for (std::size_t j = 0; j < sum.numel(); ++j)
      sum[j] /= static_cast<double>(count);
    result.per_class.emplace(c, finish_map(std::move(sum), opts));
  }
  return result;
}

void write_pgm(const std::string& path, const SpectrumMap& map) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  double lo = map.values[0], hi = map.values[0];
  for (std::size_t i = 0; i < map.values.numel(); ++i) {
    lo = std::min(lo, map.values[i]);
    hi = std::max(hi, map.values[i]);
  }
  const double span = hi - lo;
  out << "P2\n" << map.width << " " << map.height << "\n65535\n";
  for (std::size_t i = 0; i < map.height; ++i) {
    for (std::size_t j = 0; j < map.width; ++j) {
      const double v = map.values[i * map.width + j];
      const long pixel =
          span == 0.0 ? 0 : std::lround((v - lo) / span * 65535.0);
      out << pixel << (j + 1 == map.width ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace f2f
