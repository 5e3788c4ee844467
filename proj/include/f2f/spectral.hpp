#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "f2f/tensor.hpp"

namespace f2f {

// periodic Hann, w[i] = 0.5 (1 - cos(2 pi i / n)); n >= 2
Tensor hann_window(std::size_t n);

// Forward transform is unnormalized with negative exponent; inverse divides
// by n. Non-power-of-two lengths fall back to the naive DFT transparently.
ComplexTensor fft(const ComplexTensor& x);
ComplexTensor ifft(const ComplexTensor& x);
ComplexTensor dft_naive(const ComplexTensor& x);
ComplexTensor idft_naive(const ComplexTensor& x);

// Real transforms keep bins 0..n/2; n must be even.
ComplexTensor rfft(const Tensor& x);
Tensor irfft(const ComplexTensor& spectrum, std::size_t n);

// Adjoints of rfft/irfft viewed as linear maps between real vector spaces
// (complex gradients carry d/dRe and d/dIm in their components). These are
// the building blocks for the spectral adapters' backward passes.
Tensor rfft_backward(const ComplexTensor& grad_spectrum, std::size_t n);
ComplexTensor irfft_backward(const Tensor& grad_signal);

// Centered short-time transform of a signal bundle. data is [C, F, T'] with
// F = n_fft/2 + 1 and T' = T/hop + 1; mono records a rank-1 input so the
// inverse can return the original rank.
struct SpectralFrames {
  std::size_t n_fft = 0;
  std::size_t hop = 0;
  std::size_t original_length = 0;
  bool mono = false;
  ComplexTensor data;

  std::size_t channels() const { return data.dim(0); }
  std::size_t bins() const { return data.dim(1); }
  std::size_t frames() const { return data.dim(2); }
};

// x: [T] or [C, T]; T divisible by hop, T >= n_fft, n_fft a power of two.
// Reflect-pads by n_fft/2 per side and windows frames centered at
// tau in {0, hop, ..., T}.
SpectralFrames stft(const Tensor& x, std::size_t n_fft, std::size_t hop);

// Windowed overlap-add inversion with squared-window normalization
// (denominator floored at 1e-12); exact inverse of stft to rounding error.
Tensor istft(const SpectralFrames& frames);

// Adjoints of stft/istft as linear maps; grad_frames/grad_signal mirror the
// corresponding forward output shapes.
Tensor stft_backward(const SpectralFrames& grad_frames);
SpectralFrames istft_backward(const Tensor& grad_signal, std::size_t n_fft,
                              std::size_t hop);

// Separable FFT over all three axes of a real volume, then fftshift on each
// axis so DC sits at (floor(H/2), floor(W/2), floor(T/2)).
ComplexTensor fft3d_shifted(const Tensor& volume);

struct SpectrumOptions {
  bool remove_dc = false;
  bool whiten = false;
};

struct SpectrumMap {
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor values;  // [H, W], log(1 + magnitude)
  bool dc_removed = false;
  bool whitened = false;
};

// Magnitude of the shifted 3D spectrum, optional DC removal and radial
// whitening (center radius treated as 1), central temporal slice, log(1+m).
SpectrumMap spectrum_map(const Tensor& volume, const SpectrumOptions& opts);

struct ClassMeanSpectra {
  std::map<int, SpectrumMap> per_class;
  std::vector<std::string> warnings;  // one record per empty class
};

// Per class, the mean of linear (pre-log) magnitude maps, log-compressed at
// the end. num_classes < 0 infers max(label)+1.
ClassMeanSpectra class_mean_spectra(const std::vector<Tensor>& volumes,
                                    const std::vector<int>& labels,
                                    const SpectrumOptions& opts,
                                    int num_classes = -1);

// ASCII PGM (P2) export, values linearly rescaled to 0..65535.
void write_pgm(const std::string& path, const SpectrumMap& map);

}  // namespace f2f
