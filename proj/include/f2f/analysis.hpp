#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "f2f/tensor.hpp"

namespace f2f {

enum class TokenPool { Mean, Cls };

// Per-clip temporal power spectra. power is [clips, bins] with
// bins = floor(frames / 2) + 1; every entry is nonnegative.
struct PowerSpectrumSet {
  Tensor power{std::vector<std::size_t>{1, 1}};
  std::vector<std::size_t> labels;
  std::size_t frames = 0;
  double frame_rate_hz = 0.0;

  std::size_t clips() const { return power.dim(0); }
  std::size_t bins() const { return power.dim(1); }
};

enum class Band { Dc, Mid, High };

inline constexpr std::size_t kMidBandFirst = 1;
inline constexpr std::size_t kMidBandLast = 5;

Band band_of(std::size_t bin);
const char* band_name(Band band);

// Normalized per-bin ratio of between-class to within-class spectral power
// variance. d_normalized sums to 1; degenerate_uniform marks the all-zero
// fallback where every bin gets 1/bins.
struct DiscriminabilityCurve {
  std::vector<double> d_normalized;
  std::vector<double> between;
  std::vector<double> within;
  double epsilon = 0.0;
  bool degenerate_uniform = false;

  std::size_t bins() const { return d_normalized.size(); }
};

// [B, T, N, D] -> [B, T, D] by token mean or CLS (token 0) selection;
// rank-3 input passes through untouched.
Tensor pool_tokens(const Tensor& x, TokenPool pool);

// Temporal FFT per embedding dimension, power averaged over dimensions.
// x is [B, T, D] or [B, T, N, D] (tokens pooled first); T >= 2.
PowerSpectrumSet spectral_power(const Tensor& x,
                                const std::vector<std::size_t>& labels,
                                TokenPool pool = TokenPool::Mean,
                                double frame_rate_hz = 0.0);

// Per-bin variance-ratio curve. Class sums run over sorted per-class values
// so the result is bit-identical under any clip permutation.
DiscriminabilityCurve discriminability(const PowerSpectrumSet& spectra,
                                       double epsilon = 1e-8);

namespace ref {
// Literal serial transcription of the published procedure, clip-index order;
// the independent oracle for the optimized path.
DiscriminabilityCurve discriminability(const PowerSpectrumSet& spectra,
                                       double epsilon = 1e-8);
}  // namespace ref

// Sum of d_normalized over bins [first, last]; first > last is the empty
// range and yields 0.
double band_mass(const DiscriminabilityCurve& curve, std::size_t first,
                 std::size_t last);

double bin_to_hz(std::size_t bin, std::size_t frames, double fps);

// band_mass(after) - band_mass(before) over the same bin range.
double compare_curves(const DiscriminabilityCurve& before,
                      const DiscriminabilityCurve& after, std::size_t first,
                      std::size_t last);

void write_curve_csv(std::ostream& os, const DiscriminabilityCurve& curve,
                     std::size_t frames, double fps);
void write_curve_csv_file(const std::string& path,
                          const DiscriminabilityCurve& curve,
                          std::size_t frames, double fps);

void write_labels_csv(std::ostream& os,
                      const std::vector<std::size_t>& labels);
void write_labels_csv_file(const std::string& path,
                           const std::vector<std::size_t>& labels);

// Header `clip_id,label`; rows must cover clip ids 0..n-1 exactly once in
// any order.
std::vector<std::size_t> read_labels_csv(std::istream& is,
                                         const std::string& origin);
std::vector<std::size_t> read_labels_csv_file(const std::string& path);

}  // namespace f2f
