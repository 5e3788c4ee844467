#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "f2f/adapters.hpp"
#include "f2f/errors.hpp"
#include "f2f/rng.hpp"
#include "test_util.hpp"

using namespace f2f;
using testutil::central_diff;
using testutil::max_rel_err;
using testutil::random_tensor;

namespace {

// small dims keep the finite-difference sweeps fast while exercising every
// code path (token axis > 1, batch > 1, odd token count)
AdapterConfig small_config(AdapterVariant variant) {
  const std::size_t d = 6, c_a = 4, t = 16;
  AdapterConfig cfg;
  switch (variant) {
    case AdapterVariant::St:
      cfg = default_st_config(d, c_a, t);
      break;
    case AdapterVariant::Ms:
      cfg = default_ms_config(d, c_a, t);
      break;
    case AdapterVariant::BaselineTemporal:
      cfg.variant = AdapterVariant::BaselineTemporal;
      cfg.d = d;
      cfg.c_a = c_a;
      break;
  }
  return cfg;
}

void randomize(ParamSet& params, Rng& rng, double lo = -0.5, double hi = 0.5) {
  for (auto& e : params.entries())
    for (std::size_t i = 0; i < e.value.numel(); ++i)
      e.value[i] = rng.uniform(lo, hi);
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

// full-pipeline check of d<G, forward(X)>/d(theta) for every parameter and
// the input, against central finite differences
void gradcheck(const AdapterConfig& cfg, ParamSet& params, const Tensor& x,
               const Tensor& g, double tol) {
  AdapterTrace trace;
  (void)adapter_forward(cfg, params, x, &trace);
  params.zero_grads();
  Tensor dx = adapter_backward(cfg, params, trace, g);

  for (auto& entry : params.entries()) {
    Tensor fd = central_diff(
        [&](const Tensor& probe) {
          Tensor saved = entry.value;
          entry.value = probe;
          const double loss = testutil::dot(adapter_forward(cfg, params, x), g);
          entry.value = saved;
          return loss;
        },
        entry.value);
    INFO("parameter ", entry.name);
    CHECK(max_rel_err(entry.grad, fd, 1e-6) < tol);
  }

  Tensor fd_x = central_diff(
      [&](const Tensor& probe) {
        return testutil::dot(adapter_forward(cfg, params, probe), g);
      },
      x);
  CHECK(max_rel_err(dx, fd_x, 1e-6) < tol);
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  AdapterConfig cfg = small_config(AdapterVariant::St);
  cfg.n_fft = 6;
  try {
    validate_config(cfg);
    FAIL("bad n_fft accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("n_fft") != std::string::npos);
  }

  cfg = small_config(AdapterVariant::Ms);
  cfg.c_a = 5;
  try {
    validate_config(cfg);
    FAIL("odd C_a accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("C_a") != std::string::npos);
  }

  cfg = small_config(AdapterVariant::Ms);
  cfg.window_scales = {16, 5};
  try {
    validate_config(cfg);
    FAIL("odd scale accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("window_scales") != std::string::npos);
  }
}

TEST_CASE("default configs encode the standard settings") {
  AdapterConfig st = default_st_config(64, 16, 16);
  CHECK(st.n_fft == 8);  // min(32, T/2)
  CHECK(st.hop == 2);    // n_fft / 4
  AdapterConfig st_long = default_st_config(64, 16, 128);
  CHECK(st_long.n_fft == 32);
  CHECK(st_long.hop == 8);

  AdapterConfig ms = default_ms_config(64, 16, 16);
  REQUIRE(ms.window_scales.size() == 3);
  CHECK(ms.window_scales[0] == 16);
  CHECK(ms.window_scales[1] == 8);
  CHECK(ms.window_scales[2] == 4);
  CHECK(ms.fusion == Fusion::MeanConcat);
  CHECK(ms.activation == Activation::Gelu);
  CHECK(ms.placement == Placement::AfterAttention);
}

TEST_CASE("initialization is deterministic in the seed") {
  AdapterConfig cfg = small_config(AdapterVariant::Ms);
  ParamSet a = init_adapter(cfg, 42);
  ParamSet b = init_adapter(cfg, 42);
  ParamSet c = init_adapter(cfg, 43);
  REQUIRE(a.size() == b.size());
  bool all_equal = true, any_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal = all_equal && bit_identical(a.entries()[i].value, b.entries()[i].value);
    any_differs = any_differs ||
                  !bit_identical(a.entries()[i].value, c.entries()[i].value);
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("initial values follow the documented scheme") {
  AdapterConfig cfg = small_config(AdapterVariant::St);
  ParamSet params = init_adapter(cfg, 7);
  const double bound = std::sqrt(1.0 / static_cast<double>(cfg.d));
  const Tensor& dw = params.value("fc_down.w");
  for (std::size_t i = 0; i < dw.numel(); ++i) {
    CHECK(dw[i] >= -bound);
    CHECK(dw[i] < bound);
  }
  const Tensor& uw = params.value("fc_up.w");
  for (std::size_t i = 0; i < uw.numel(); ++i) CHECK(uw[i] == 0.0);
  for (std::size_t i = 0; i < params.value("fc_up.b").numel(); ++i)
    CHECK(params.value("fc_up.b")[i] == 0.0);
  const Tensor& kt = params.value("conv_temp.k");
  for (std::size_t ch = 0; ch < kt.dim(0); ++ch) {
    CHECK(kt[ch * 3 + 0] == 0.0);
    CHECK(kt[ch * 3 + 1] == 1.0);
    CHECK(kt[ch * 3 + 2] == 0.0);
  }
}

TEST_CASE("zero-initialized adapters are bit-exact identities") {
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    AdapterConfig cfg = small_config(variant);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      ParamSet params = init_adapter(cfg, seed);
      Tensor x = random_tensor({2, 16, 3, cfg.d}, rng);
      Tensor y = adapter_forward(cfg, params, x);
      CHECK(bit_identical(x, y));
    }
  }
}

TEST_CASE("adapters preserve the input shape") {
  Rng rng(3);
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    AdapterConfig cfg = small_config(variant);
    ParamSet params = init_adapter(cfg, 5);
    randomize(params, rng);
    Tensor x = random_tensor({2, 16, 3, cfg.d}, rng);
    Tensor y = adapter_forward(cfg, params, x);
    CHECK(y.same_shape(x));
  }
}

TEST_CASE("forward is bit-identical across repeated calls") {
  Rng rng(9);
  AdapterConfig cfg = small_config(AdapterVariant::Ms);
  ParamSet params = init_adapter(cfg, 11);
  randomize(params, rng);
  Tensor x = random_tensor({2, 16, 3, cfg.d}, rng);
  Tensor y1 = adapter_forward(cfg, params, x);
  Tensor y2 = adapter_forward(cfg, params, x);
  CHECK(bit_identical(y1, y2));
}

TEST_CASE("spectral path is transparent at identity kernels") {
  // both conv branches pass the spectrum through unchanged, so their sum is
  // exactly twice the spectrum and the inverse transform returns twice the
  // bottleneck activations
  Rng rng(13);
  AdapterConfig cfg = small_config(AdapterVariant::St);
  ParamSet params = init_adapter(cfg, 17);
  for (std::size_t i = 0; i < params.value("fc_up.w").numel(); ++i)
    params.value("fc_up.w")[i] = rng.uniform(-0.5, 0.5);
  for (std::size_t i = 0; i < params.value("fc_up.b").numel(); ++i)
    params.value("fc_up.b")[i] = rng.uniform(-0.5, 0.5);

  Tensor x = random_tensor({2, 16, 3, cfg.d}, rng);
  Tensor y = adapter_forward(cfg, params, x);

  Tensor h = gelu_apply(linear_apply(x, params.value("fc_down.w"),
                                     params.value("fc_down.b")));
  for (std::size_t i = 0; i < h.numel(); ++i) h[i] *= 2.0;
  Tensor direct = linear_apply(h, params.value("fc_up.w"), params.value("fc_up.b"));
  for (std::size_t i = 0; i < direct.numel(); ++i) direct[i] += x[i];
  CHECK(testutil::rel_l2(y, direct) < 1e-8);
}

TEST_CASE("single full-length scale with identity kernels collapses to the bottleneck") {
  Rng rng(19);
  AdapterConfig cfg = small_config(AdapterVariant::Ms);
  cfg.window_scales = {16};
  ParamSet params = init_adapter(cfg, 23);
  for (std::size_t i = 0; i < params.value("fc_up.w").numel(); ++i)
    params.value("fc_up.w")[i] = rng.uniform(-0.5, 0.5);

  Tensor x = random_tensor({2, 16, 3, cfg.d}, rng);
  Tensor y = adapter_forward(cfg, params, x);

  Tensor h = gelu_apply(linear_apply(x, params.value("fc_down.w"),
                                     params.value("fc_down.b")));
  Tensor direct = linear_apply(h, params.value("fc_up.w"), params.value("fc_up.b"));
  for (std::size_t i = 0; i < direct.numel(); ++i) direct[i] += x[i];
  CHECK(testutil::rel_l2(y, direct) < 1e-8);
}

TEST_CASE("baseline with identity kernel equals the pure bottleneck") {
  Rng rng(29);
  AdapterConfig cfg = small_config(AdapterVariant::BaselineTemporal);
  ParamSet params = init_adapter(cfg, 31);
  for (std::size_t i = 0; i < params.value("fc_up.w").numel(); ++i)
    params.value("fc_up.w")[i] = rng.uniform(-0.5, 0.5);

  Tensor x = random_tensor({1, 16, 2, cfg.d}, rng);
  Tensor y = adapter_forward(cfg, params, x);
  Tensor h = gelu_apply(linear_apply(x, params.value("fc_down.w"),
                                     params.value("fc_down.b")));
  Tensor direct = linear_apply(h, params.value("fc_up.w"), params.value("fc_up.b"));
  for (std::size_t i = 0; i < direct.numel(); ++i) direct[i] += x[i];
  CHECK(testutil::max_abs_diff(y, direct) < 1e-12);
}

TEST_CASE("scaling fc_up scales the residual branch exactly") {
  Rng rng(37);
  AdapterConfig cfg = small_config(AdapterVariant::Ms);
  ParamSet params = init_adapter(cfg, 41);
  randomize(params, rng);
  Tensor x = random_tensor({1, 16, 2, cfg.d}, rng);
  Tensor y1 = adapter_forward(cfg, params, x);
  for (std::size_t i = 0; i < params.value("fc_up.w").numel(); ++i)
    params.value("fc_up.w")[i] *= 3.0;
  for (std::size_t i = 0; i < params.value("fc_up.b").numel(); ++i)
    params.value("fc_up.b")[i] *= 3.0;
  Tensor y3 = adapter_forward(cfg, params, x);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(y3[i] - x[i] == doctest::Approx(3.0 * (y1[i] - x[i])).epsilon(1e-10));
}

TEST_CASE("gate at logit zero blends branches evenly") {
  Rng rng(43);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 3, 4}, rng);
  Tensor gate({4});
  Tensor out = fuse(a, b, Fusion::Gated, MeanCombine::Sum, &gate, 2);
  for (std::size_t i = 0; i < out.numel(); ++i)
    CHECK(out[i] == doctest::Approx(0.5 * (a[i] + b[i])).epsilon(1e-12));
}

TEST_CASE("learnable weight one selects the first branch exactly") {
  Rng rng(47);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 3, 4}, rng);
  Tensor alpha = Tensor::full({4}, 1.0);
  Tensor out = fuse(a, b, Fusion::Learnable, MeanCombine::Sum, &alpha, 2);
  CHECK(testutil::max_abs_diff(out, a) == 0.0);
}

TEST_CASE("concat joins halves along the channel axis") {
  Tensor a({1, 2, 2}, {1, 2, 3, 4});
  Tensor b({1, 2, 2}, {5, 6, 7, 8});
  Tensor out = fuse(a, b, Fusion::MeanConcat, MeanCombine::Concat, nullptr, 2);
  REQUIRE(out.shape() == std::vector<std::size_t>{1, 2, 4});
  CHECK(out[0] == 1.0);
  CHECK(out[2] == 5.0);
  CHECK(out[4] == 3.0);
  CHECK(out[6] == 7.0);
  CHECK_THROWS_AS(fuse(a, Tensor({1, 3, 2}), Fusion::MeanConcat,
                       MeanCombine::Concat, nullptr, 2),
                  DimensionError);
}

TEST_CASE("parameter count formula matches enumeration for every variant and fusion") {
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    for (Fusion fusion : {Fusion::MeanConcat, Fusion::Gated, Fusion::Learnable}) {
      for (std::size_t width : {4u, 8u, 16u}) {
        AdapterConfig cfg = small_config(variant);
        cfg.c_a = width;
        cfg.fusion = fusion;
        ParamSet params = init_adapter(cfg, 1);
        INFO("variant ", static_cast<int>(variant), " fusion ",
             static_cast<int>(fusion), " width ", width);
        CHECK(adapter_param_count(cfg) == param_count(params));
      }
    }
  }
}

TEST_CASE("doubling the multi-scale width dominates the single-scale count") {
  for (std::size_t w = 2; w <= 64; w *= 2) {
    AdapterConfig st = default_st_config(64, w, 16);
    AdapterConfig ms = default_ms_config(64, 2 * w, 16);
    CHECK(adapter_param_count(ms) > adapter_param_count(st));
  }
}

TEST_CASE("full-pipeline gradients match finite differences across 10 seeds") {
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    AdapterConfig cfg = small_config(variant);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      ParamSet params = init_adapter(cfg, seed);
      randomize(params, rng);
      Tensor x = random_tensor({2, 16, 2, cfg.d}, rng);
      Tensor g = random_tensor({2, 16, 2, cfg.d}, rng);
      gradcheck(cfg, params, x, g, 1e-5);
    }
  }
}

TEST_CASE("gradients flow through gated and learnable fusion") {
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms}) {
    for (Fusion fusion : {Fusion::Gated, Fusion::Learnable}) {
      AdapterConfig cfg = small_config(variant);
      cfg.fusion = fusion;
      Rng rng(71 + static_cast<std::uint64_t>(fusion));
      ParamSet params = init_adapter(cfg, 73);
      randomize(params, rng);
      Tensor x = random_tensor({1, 16, 2, cfg.d}, rng);
      Tensor g = random_tensor({1, 16, 2, cfg.d}, rng);
      gradcheck(cfg, params, x, g, 1e-5);
    }
  }
}

TEST_CASE("window scales must divide the sequence length") {
  AdapterConfig cfg = small_config(AdapterVariant::Ms);
  cfg.window_scales = {16, 6};
  ParamSet params = init_adapter(cfg, 1);
  Tensor x({1, 16, 2, cfg.d});
  CHECK_THROWS_AS(adapter_forward(cfg, params, x), ConfigError);
}

TEST_CASE("short sequences are rejected by the single-scale variant") {
  AdapterConfig cfg = small_config(AdapterVariant::St);
  ParamSet params = init_adapter(cfg, 1);
  Tensor x({1, 8, 2, cfg.d});  // T = 8 < 2 * n_fft = 16
  CHECK_THROWS_AS(adapter_forward(cfg, params, x), ConfigError);
}
