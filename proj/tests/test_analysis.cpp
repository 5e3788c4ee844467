#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "f2f/analysis.hpp"
#include "f2f/errors.hpp"
#include "f2f/rng.hpp"
#include "f2f/spectral.hpp"
#include "test_util.hpp"

using namespace f2f;
using testutil::random_tensor;

namespace {

bool curves_bit_identical(const DiscriminabilityCurve& a,
                          const DiscriminabilityCurve& b) {
  return a.d_normalized == b.d_normalized && a.between == b.between &&
         a.within == b.within && a.degenerate_uniform == b.degenerate_uniform;
}

// two classes, two clips each, identical rows except an offset at one bin
PowerSpectrumSet planted_set(std::size_t bins, std::size_t planted,
                             double offset) {
  PowerSpectrumSet set;
  set.power = Tensor({4, bins});
  set.labels = {0, 0, 1, 1};
  set.frames = 2 * (bins - 1);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t f = 0; f < bins; ++f) set.power[i * bins + f] = 1.0;
  set.power[2 * bins + planted] += offset;
  set.power[3 * bins + planted] += offset;
  return set;
}

PowerSpectrumSet random_set(Rng& rng, std::size_t clips, std::size_t bins,
                            std::size_t classes) {
  PowerSpectrumSet set;
  set.power = Tensor({clips, bins});
  set.labels.resize(clips);
  set.frames = 2 * (bins - 1);
  for (std::size_t i = 0; i < clips; ++i) {
    set.labels[i] = (i < classes) ? i : rng.index(classes);
    for (std::size_t f = 0; f < bins; ++f)
      set.power[i * bins + f] = rng.uniform();
  }
  return set;
}

}  // namespace

TEST_CASE("constant embedding puts all spectral power at the DC bin") {
  const std::size_t t = 16, d = 3;
  Tensor x({1, t, d});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t k = 0; k < d; ++k)
      x[i * d + k] = 0.7 + 0.1 * static_cast<double>(k);
  PowerSpectrumSet set = spectral_power(x, {0});
  REQUIRE(set.bins() == 9);
  CHECK(set.power[0] > 1.0);
  for (std::size_t f = 1; f < set.bins(); ++f) CHECK(set.power[f] < 1e-18);
}

TEST_CASE("sinusoid at bin 2 concentrates power there for any phases") {
  const std::size_t t = 16, d = 4;
  Rng rng(5);
  Tensor x({1, t, d});
  for (std::size_t k = 0; k < d; ++k) {
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < t; ++i)
      x[i * d + k] = std::sin(2.0 * std::numbers::pi * 2.0 *
                                  static_cast<double>(i) / 16.0 +
                              phase);
  }
  PowerSpectrumSet set = spectral_power(x, {0});

  std::size_t argmax = 0;
  for (std::size_t f = 1; f < set.bins(); ++f)
    if (set.power[f] > set.power[argmax]) argmax = f;
  CHECK(argmax == 2);

  // independent confirmation per dimension with the naive transform
  for (std::size_t f = 0; f < set.bins(); ++f) {
    double expected = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      ComplexTensor line({t});
      for (std::size_t i = 0; i < t; ++i) line[i] = {x[i * d + k], 0.0};
      expected += std::norm(dft_naive(line)[f]);
    }
    expected /= static_cast<double>(d);
    CHECK(std::abs(set.power[f] - expected) < 1e-9);
  }
}

TEST_CASE("doubling the signal quadruples every power exactly") {
  Rng rng(7);
  Tensor x = random_tensor({3, 16, 5}, rng);
  Tensor x2 = x;
  for (std::size_t i = 0; i < x2.numel(); ++i) x2[i] *= 2.0;
  PowerSpectrumSet a = spectral_power(x, {0, 1, 0});
  PowerSpectrumSet b = spectral_power(x2, {0, 1, 0});
  for (std::size_t i = 0; i < a.power.numel(); ++i)
    CHECK(b.power[i] == 4.0 * a.power[i]);
}

TEST_CASE("token pooling") {
  Rng rng(11);
  Tensor flat = random_tensor({2, 8, 3}, rng);
  Tensor tokens({2, 8, 2, 3});
  for (std::size_t i = 0; i < 2 * 8; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      tokens[(i * 2 + 0) * 3 + k] = flat[i * 3 + k];
      tokens[(i * 2 + 1) * 3 + k] = flat[i * 3 + k];
    }

  SUBCASE("mean of identical tokens reproduces the flat batch bit-exactly") {
    Tensor pooled = pool_tokens(tokens, TokenPool::Mean);
    REQUIRE(pooled.same_shape(flat));
    for (std::size_t i = 0; i < flat.numel(); ++i)
      CHECK(pooled[i] == flat[i]);
  }

  SUBCASE("cls pooling selects token 0") {
    tokens[3] += 5.0;  // perturb token 1 of (b=0, t=0)
    Tensor pooled = pool_tokens(tokens, TokenPool::Cls);
    for (std::size_t i = 0; i < flat.numel(); ++i)
      CHECK(pooled[i] == flat[i]);
  }

  SUBCASE("mean pooling averages distinct tokens") {
    tokens[3] = 2.0;
    tokens[0] = 1.0;
    Tensor pooled = pool_tokens(tokens, TokenPool::Mean);
    CHECK(pooled[0] == doctest::Approx(1.5).epsilon(1e-15));
  }
}

TEST_CASE("spectral power validates its inputs") {
  CHECK_THROWS_AS(spectral_power(Tensor({2, 1, 3}), {0, 1}), ConfigError);
  CHECK_THROWS_AS(spectral_power(Tensor({2, 8, 3}), {0}), DimensionError);
  CHECK_THROWS_AS(pool_tokens(Tensor({4, 4}), TokenPool::Mean),
                  DimensionError);
}

TEST_CASE("identical clips across classes give the degenerate uniform curve") {
  PowerSpectrumSet set = planted_set(9, 3, 0.0);
  DiscriminabilityCurve curve = discriminability(set);
  CHECK(curve.degenerate_uniform);
  double total = 0.0;
  for (std::size_t f = 0; f < curve.bins(); ++f) {
    CHECK(curve.d_normalized[f] == 1.0 / 9.0);
    total += curve.d_normalized[f];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a planted offset at one bin captures the whole curve") {
  PowerSpectrumSet set = planted_set(9, 3, 2.0);
  DiscriminabilityCurve curve = discriminability(set);
  CHECK(!curve.degenerate_uniform);
  CHECK(curve.d_normalized[3] == 1.0);
  for (std::size_t f = 0; f < 9; ++f)
    if (f != 3) CHECK(curve.d_normalized[f] == 0.0);
  CHECK(band_mass(curve, 1, 5) == 1.0);
}

TEST_CASE("optimized curve equals the literal transcription on 50 instances") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t clips = 20 + rng.index(180);
    const std::size_t bins = 5 + rng.index(13);
    const std::size_t classes = 2 + rng.index(3);
    PowerSpectrumSet set = random_set(rng, clips, bins, classes);
    DiscriminabilityCurve opt = discriminability(set);
    DiscriminabilityCurve lit = ref::discriminability(set);
    REQUIRE(opt.bins() == lit.bins());
    double total = 0.0;
    for (std::size_t f = 0; f < bins; ++f) {
      CHECK(std::abs(opt.d_normalized[f] - lit.d_normalized[f]) < 1e-12);
      CHECK(std::abs(opt.between[f] - lit.between[f]) < 1e-12);
      CHECK(std::abs(opt.within[f] - lit.within[f]) < 1e-12);
      CHECK(opt.d_normalized[f] >= 0.0);
      total += opt.d_normalized[f];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("curve is invariant to uniform power scaling at epsilon zero") {
  Rng rng(17);
  PowerSpectrumSet set = random_set(rng, 24, 9, 3);
  PowerSpectrumSet scaled = set;
  for (std::size_t i = 0; i < scaled.power.numel(); ++i)
    scaled.power[i] *= 4.0;
  DiscriminabilityCurve a = discriminability(set, 0.0);
  DiscriminabilityCurve b = discriminability(scaled, 0.0);
  CHECK(a.d_normalized == b.d_normalized);
}

TEST_CASE("curve is bit-identical under clip permutation") {
  Rng rng(19);
  PowerSpectrumSet set = random_set(rng, 40, 9, 3);

  PowerSpectrumSet shuffled = set;
  std::vector<std::size_t> perm(set.clips());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.index(i)]);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.labels[i] = set.labels[perm[i]];
    for (std::size_t f = 0; f < set.bins(); ++f)
      shuffled.power[i * set.bins() + f] = set.power[perm[i] * set.bins() + f];
  }

  DiscriminabilityCurve a = discriminability(set);
  DiscriminabilityCurve b = discriminability(shuffled);
  CHECK(curves_bit_identical(a, b));
}

TEST_CASE("duplicating a clip within its class keeps the curve normalized") {
  Rng rng(23);
  PowerSpectrumSet set = random_set(rng, 20, 9, 2);
  PowerSpectrumSet grown;
  grown.power = Tensor({21, 9});
  grown.labels = set.labels;
  grown.labels.push_back(set.labels[0]);
  grown.frames = set.frames;
  for (std::size_t i = 0; i < set.power.numel(); ++i)
    grown.power[i] = set.power[i];
  for (std::size_t f = 0; f < 9; ++f)
    grown.power[20 * 9 + f] = set.power[f];

  DiscriminabilityCurve curve = discriminability(grown);
  double total = 0.0;
  for (std::size_t f = 0; f < curve.bins(); ++f) total += curve.d_normalized[f];
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("a single class is rejected") {
  PowerSpectrumSet set;
  set.power = Tensor({3, 5});
  set.labels = {2, 2, 2};
  set.frames = 8;
  try {
    discriminability(set);
    FAIL("single class accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "discriminability undefined for one class");
  }
}

TEST_CASE("band mass") {
  Rng rng(29);
  DiscriminabilityCurve curve = discriminability(random_set(rng, 30, 9, 3));
  CHECK(band_mass(curve, 0, 8) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(band_mass(curve, 1, 0) == 0.0);
  CHECK_THROWS_AS(band_mass(curve, 0, 9), ConfigError);
  CHECK_THROWS_AS(band_mass(curve, 9, 12), ConfigError);
}

TEST_CASE("bin to hertz conversion") {
  CHECK(bin_to_hz(1, 16, 30.0) == doctest::Approx(1.875).epsilon(1e-15));
  CHECK(bin_to_hz(5, 16, 30.0) == doctest::Approx(9.375).epsilon(1e-15));
  CHECK(bin_to_hz(0, 16, 30.0) == 0.0);
}

TEST_CASE("curve comparison reports the signed band mass delta") {
  PowerSpectrumSet planted = planted_set(9, 3, 2.0);
  DiscriminabilityCurve after = discriminability(planted);
  DiscriminabilityCurve uniform = discriminability(planted_set(9, 3, 0.0));
  CHECK(compare_curves(after, after, 1, 5) == 0.0);
  CHECK(compare_curves(uniform, after, 1, 5) ==
        doctest::Approx(1.0 - 5.0 / 9.0).epsilon(1e-12));

  DiscriminabilityCurve small = discriminability(planted_set(5, 2, 1.0));
  CHECK_THROWS_AS(compare_curves(small, after, 1, 4), DimensionError);
}

TEST_CASE("band annotations split dc, mid, and high bins") {
  CHECK(band_of(0) == Band::Dc);
  CHECK(band_of(1) == Band::Mid);
  CHECK(band_of(5) == Band::Mid);
  CHECK(band_of(6) == Band::High);
  CHECK(std::string(band_name(Band::Mid)) == "mid");
}

TEST_CASE("curve csv export") {
  DiscriminabilityCurve curve = discriminability(planted_set(9, 3, 2.0));
  std::ostringstream os;
  write_curve_csv(os, curve, 16, 30.0);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "bin,freq_hz,d_normalized,between,within,band");
  std::getline(is, line);
  CHECK(line.substr(0, 4) == "0,0,");
  CHECK(line.substr(line.size() - 3) == ",dc");
  std::getline(is, line);
  CHECK(line.substr(0, 8) == "1,1.875,");
  for (int skip = 0; skip < 2; ++skip) std::getline(is, line);
  CHECK(line.substr(0, 8) == "3,5.625,");
  CHECK(line.find(",1,") != std::string::npos);  // d_normalized column
  CHECK(line.substr(line.size() - 4) == ",mid");
}

TEST_CASE("labels csv round trip and defects") {
  std::vector<std::size_t> labels = {3, 1, 4, 1, 5};
  std::ostringstream os;
  write_labels_csv(os, labels);
  std::istringstream is(os.str());
  CHECK(read_labels_csv(is, "mem") == labels);

  std::istringstream bad_header("clip,label\n0,1\n");
  CHECK_THROWS_AS(read_labels_csv(bad_header, "mem"), IoError);
  std::istringstream dup("clip_id,label\n0,1\n0,2\n");
  CHECK_THROWS_AS(read_labels_csv(dup, "mem"), IoError);
  std::istringstream gap("clip_id,label\n0,1\n2,0\n");
  CHECK_THROWS_AS(read_labels_csv(gap, "mem"), IoError);
  std::istringstream junk("clip_id,label\n0,x\n");
  CHECK_THROWS_AS(read_labels_csv(junk, "mem"), IoError);
}

TEST_CASE("negative or non-finite powers are rejected") {
  PowerSpectrumSet set = planted_set(5, 2, 1.0);
  set.power[3] = -1.0;
  CHECK_THROWS_AS(discriminability(set), ConfigError);
  set.power[3] = std::nan("");
  CHECK_THROWS_AS(discriminability(set), ConfigError);
}
