#include "f2f/verify.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "f2f/adapters.hpp"
#include "f2f/analysis.hpp"
#include "f2f/commands.hpp"
#include "f2f/config_json.hpp"
#include "f2f/errors.hpp"
#include "f2f/harness.hpp"
#include "f2f/rng.hpp"
#include "f2f/spectral.hpp"

namespace f2f {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite difference of a scalar function over every entry of x.
template <typename Loss>
Tensor central_diff(Loss&& loss, Tensor& x, double h = 1e-5) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Sup-norm relative error between a gradient tensor and its oracle; the
// per-component ratio is meaningless on near-zero components where finite
// differences are pure roundoff.
double grad_rel_err(const Tensor& a, const Tensor& b) {
  double scale = 1e-12;
  for (std::size_t i = 0; i < a.numel(); ++i)
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
  double diff = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    diff = std::max(diff, std::fabs(a[i] - b[i]));
  return diff / scale;
}

// ---- criterion 1: FFT against the quadratic-time oracle ----

CheckResult check_fft_oracle() {
  CheckResult r{1, "fft_matches_naive_dft", true, ""};
  double worst_ratio = 0.0;
  double worst_err = 0.0;
  std::size_t worst_n = 4;
  for (std::size_t n : {4u, 8u, 16u, 32u, 64u}) {
    Rng rng(mix_seed(0xff7, n));
    const double tol = 1e-9 * static_cast<double>(n);
    for (int rep = 0; rep < 100; ++rep) {
      ComplexTensor x({n});
      for (std::size_t i = 0; i < n; ++i)
        x[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      const ComplexTensor fast = fft(x);
      const ComplexTensor slow = dft_naive(x);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        err = std::max(err, std::abs(fast[i] - slow[i]));
      if (err / tol > worst_ratio) {
        worst_ratio = err / tol;
        worst_err = err;
        worst_n = n;
      }
      if (err >= tol) r.pass = false;
    }
  }
  r.detail = "max |fft - dft| = " + fmt(worst_err) + " at n = " +
             std::to_string(worst_n) + " (tol 1e-9*n)";
  return r;
}

CheckResult check_fft_parseval() {
  CheckResult r{1, "fft_parseval", true, ""};
  double worst = 0.0;
  for (std::size_t n : {4u, 8u, 16u, 32u, 64u}) {
    Rng rng(mix_seed(0x9a55, n));
    for (int rep = 0; rep < 100; ++rep) {
      ComplexTensor x({n});
      for (std::size_t i = 0; i < n; ++i)
        x[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      const ComplexTensor spec = fft(x);
      double time_e = 0.0;
      double freq_e = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        time_e += std::norm(x[i]);
        freq_e += std::norm(spec[i]);
      }
      freq_e /= static_cast<double>(n);
      const double rel = std::fabs(time_e - freq_e) / time_e;
      worst = std::max(worst, rel);
      if (rel >= 1e-9) r.pass = false;
    }
  }
  r.detail = "max relative energy mismatch = " + fmt(worst) + " (tol 1e-9)";
  return r;
}

// ---- criterion 2: short-time round trip at the contract grid ----

CheckResult check_stft_round_trip() {
  CheckResult r{2, "stft_round_trip", true, ""};
  struct Grid {
    std::size_t t, n_fft, hop;
  };
  double worst = 0.0;
  for (const Grid g : {Grid{16, 8, 2}, Grid{32, 16, 4}, Grid{64, 32, 8}}) {
    Rng rng(mix_seed(0x57f7, g.t));
    for (int rep = 0; rep < 50; ++rep) {
      Tensor x = random_tensor({g.t}, rng);
      const Tensor back = istft(stft(x, g.n_fft, g.hop));
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < g.t; ++i) {
        num += (back[i] - x[i]) * (back[i] - x[i]);
        den += x[i] * x[i];
      }
      const double rel = std::sqrt(num / den);
      worst = std::max(worst, rel);
      if (rel >= 1e-8) r.pass = false;
    }
  }
  r.detail = "max relative L2 round-trip error = " + fmt(worst) +
             " (tol 1e-8)";
  return r;
}

// ---- criterion 3: freshly initialized adapters are the identity ----

CheckResult check_zero_init_identity() {
  CheckResult r{3, "adapter_zero_init_identity", true, ""};
  std::size_t checked = 0;
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(mix_seed(0x1de7, mix_seed(static_cast<std::uint64_t>(variant),
                                        seed)));
      const std::size_t t = 8u << rng.index(3);  // 8, 16, 32
      const std::size_t d = 2 + rng.index(9);
      const std::size_t c_a = 2 * (1 + rng.index(4));
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
      const ParamSet params = init_adapter(cfg, seed);
      const Tensor x =
          random_tensor({2, t, 1 + rng.index(3), d}, rng, -3.0, 3.0);
      const Tensor y = adapter_forward(cfg, params, x);
      ++checked;
      if (y.shape() != x.shape() ||
          std::memcmp(y.data(), x.data(), x.numel() * sizeof(double)) != 0) {
        r.pass = false;
        r.detail = to_string(variant) + " seed " + std::to_string(seed) +
                   " is not bit-identical";
      }
    }
  }
  if (r.pass)
    r.detail = std::to_string(checked) +
               " (config, input) pairs bit-identical across 3 variants";
  return r;
}

// ---- criterion 4: full-pipeline gradients vs finite differences ----

CheckResult check_gradients(double fault) {
  CheckResult r{4, "model_gradients_finite_difference", true, ""};
  double worst = 0.0;
  std::string worst_at = "none";
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      AdapterConfig acfg;
      switch (variant) {
        case AdapterVariant::St:
          acfg = default_st_config(6, 4, 16);
          break;
        case AdapterVariant::Ms:
          acfg = default_ms_config(6, 4, 16);
          break;
        case AdapterVariant::BaselineTemporal:
          acfg.variant = AdapterVariant::BaselineTemporal;
          acfg.d = 6;
          acfg.c_a = 4;
          break;
      }
      acfg.placement = Placement::BeforeAttention;
      Model model = build_model(acfg, false, 3, seed);
      Rng rng(seed);
      for (auto& adapter : model.adapters)
        for (auto& e : adapter.entries())
          for (std::size_t i = 0; i < e.value.numel(); ++i)
            e.value[i] = rng.uniform(-0.5, 0.5);

      Tensor x = random_tensor({2, 16, 2, 6}, rng);
      const std::vector<std::size_t> labels = {1, 2};
      const auto loss = [&]() {
        const Tensor logits = model_logits(model, x);
        return cross_entropy(logits, labels).loss;
      };

      ModelTrace trace;
      const Tensor logits = model_logits(model, x, &trace);
      const CrossEntropyResult ce = cross_entropy(logits, labels);
      for (auto& adapter : model.adapters) adapter.zero_grads();
      model.head.zero_grads();
      Tensor dx = model_backward(model, trace, ce.dlogits);

      // Negative control: poison one analytic gradient on the first case.
      if (fault != 0.0 && seed == 1 && variant == AdapterVariant::St) {
        Tensor& g = model.adapters[0].grad("conv_temp.k");
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += fault;
      }

      const auto record = [&](const std::string& name, double err) {
        if (err > worst) {
          worst = err;
          worst_at = to_string(variant) + " seed " + std::to_string(seed) +
                     " " + name;
        }
        if (err >= 1e-5) r.pass = false;
      };

      for (std::size_t ai = 0; ai < model.adapters.size(); ++ai) {
        for (auto& entry : model.adapters[ai].entries()) {
          const Tensor fd = central_diff(loss, entry.value);
          record("adapter" + std::to_string(ai) + "." + entry.name,
                 grad_rel_err(entry.grad, fd));
        }
      }
      for (auto& entry : model.head.entries()) {
        const Tensor fd = central_diff(loss, entry.value);
        record("head." + entry.name, grad_rel_err(entry.grad, fd));
      }
      const Tensor fd_x = central_diff(loss, x);
      record("input", grad_rel_err(dx, fd_x));
    }
  }
  r.detail = "max relative error " + fmt(worst) + " at " + worst_at +
             " (tol 1e-5, h=1e-5, 10 seeds x 3 variants)";
  return r;
}

// ---- criterion 5: discriminability against the literal transcription ----

PowerSpectrumSet random_spectra(Rng& rng) {
  PowerSpectrumSet s;
  const std::size_t clips = 6 + rng.index(15);
  const std::size_t bins = 3 + rng.index(7);
  const std::size_t classes = 2 + rng.index(3);
  s.power = Tensor({clips, bins});
  for (std::size_t i = 0; i < s.power.numel(); ++i)
    s.power[i] = rng.uniform(0.0, 2.0);
  s.labels.resize(clips);
  for (std::size_t i = 0; i < clips; ++i) s.labels[i] = i % classes;
  s.frames = (bins - 1) * 2;
  return s;
}

CheckResult check_discriminability_reference() {
  CheckResult r{5, "discriminability_matches_reference", true, ""};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(mix_seed(0xa40a, seed));
    const PowerSpectrumSet s = random_spectra(rng);
    const DiscriminabilityCurve fast = discriminability(s);
    const DiscriminabilityCurve slow = ref::discriminability(s);
    for (std::size_t b = 0; b < fast.bins(); ++b) {
      const double err = std::fabs(fast.d_normalized[b] -
                                   slow.d_normalized[b]);
      worst = std::max(worst, err);
      if (err >= 1e-12) r.pass = false;
    }
  }
  r.detail = "max per-bin difference vs reference = " + fmt(worst) +
             " over 50 instances (tol 1e-12)";
  return r;
}

CheckResult check_discriminability_normalization() {
  CheckResult r{5, "discriminability_curve_sums_to_one", true, ""};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(mix_seed(0x5e11, seed));
    const DiscriminabilityCurve curve = discriminability(random_spectra(rng));
    double sum = 0.0;
    for (double v : curve.d_normalized) sum += v;
    const double err = std::fabs(sum - 1.0);
    worst = std::max(worst, err);
    if (err >= 1e-12) r.pass = false;
  }
  r.detail = "max |sum - 1| = " + fmt(worst) + " (tol 1e-12)";
  return r;
}

CheckResult check_planted_argmax() {
  CheckResult r{5, "discriminability_planted_argmax", true, ""};
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(mix_seed(0x9147, seed));
    const std::size_t bins = 9;
    const std::size_t clips = 24;
    const std::size_t classes = 3;
    const std::size_t planted = rng.index(bins);
    PowerSpectrumSet s;
    s.power = Tensor({clips, bins});
    s.labels.resize(clips);
    s.frames = (bins - 1) * 2;
    for (std::size_t i = 0; i < clips; ++i) {
      s.labels[i] = i % classes;
      for (std::size_t b = 0; b < bins; ++b)
        s.power[i * bins + b] = rng.uniform(0.0, 0.01);
      s.power[i * bins + planted] +=
          10.0 * static_cast<double>(s.labels[i] + 1);
    }
    const DiscriminabilityCurve curve = discriminability(s);
    const std::size_t argmax = static_cast<std::size_t>(
        std::max_element(curve.d_normalized.begin(),
                         curve.d_normalized.end()) -
        curve.d_normalized.begin());
    if (argmax == planted) ++hits;
  }
  r.pass = hits == 100;
  r.detail = "planted bin recovered in " + std::to_string(hits) +
             "/100 seeds";
  return r;
}

// ---- criteria 6-7: desk-scale training experiments ----

TrainConfig e2e_train_config() {
  TrainConfig cfg;
  cfg.adapter = default_ms_config(64, 16, 16);
  cfg.adapter.placement = Placement::BeforeAttention;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.base_lr = 2e-3;
  return cfg;
}

CheckResult check_ms_accuracy() {
  CheckResult r{6, "ms_adapter_reaches_accuracy", false, ""};
  const DataBundle data = synth_generate(SynthConfig{});
  const TrainResult result = train(e2e_train_config(), data);
  const double acc = result.report.final_test_accuracy;
  r.pass = acc >= 0.95;
  r.detail = "test accuracy " + fmt(acc) + " after 30 epochs (need >= 0.95)";
  return r;
}

CheckResult check_pooled_baseline() {
  CheckResult r{6, "pooled_baseline_at_chance", false, ""};
  const DataBundle data = synth_generate(SynthConfig{});
  TrainConfig cfg = e2e_train_config();
  cfg.pooled_baseline = true;
  const TrainResult result = train(cfg, data);
  const double acc = result.report.final_test_accuracy;
  r.pass = std::fabs(acc - 0.25) <= 0.10;
  r.detail = "pooled baseline accuracy " + fmt(acc) +
             " (need within 0.10 of chance 0.25)";
  return r;
}

CheckResult check_band_mass_shift(std::ostream* log) {
  CheckResult r{7, "mid_band_mass_increases", false, ""};
  int ups = 0;
  std::string deltas;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig synth;
    synth.class_bins = {2, 3, 4, 6};
    synth.clips_per_class = 50;
    synth.seed = seed;
    const DataBundle data = synth_generate(synth);

    TrainConfig cfg;
    cfg.adapter = default_ms_config(64, 16, 16);
    cfg.adapter.placement = Placement::BeforeAttention;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.base_lr = 3e-3;
    cfg.seed = seed;

    const Model fresh =
        build_model(cfg.adapter, false, data.classes, cfg.seed);
    const Tensor emb_before =
        model_embeddings(fresh, data.test.x, TapPoint::PostAdapter);

    const TrainResult result = train(cfg, data);
    const Model trained = model_from_checkpoint(result.checkpoint);
    const Tensor emb_after =
        model_embeddings(trained, data.test.x, TapPoint::PostAdapter);

    const DiscriminabilityCurve before = discriminability(
        spectral_power(emb_before, data.test.labels, TokenPool::Mean));
    const DiscriminabilityCurve after = discriminability(
        spectral_power(emb_after, data.test.labels, TokenPool::Mean));
    const double delta =
        compare_curves(before, after, kMidBandFirst, kMidBandLast);
    if (delta > 0.0) ++ups;
    if (!deltas.empty()) deltas += ", ";
    deltas += fmt(delta);
    if (log)
      *log << "    seed " << seed << ": mid-band mass delta " << fmt(delta)
           << " (accuracy " << fmt(result.report.final_test_accuracy) << ")\n";
  }
  r.pass = ups >= 8;
  r.detail = "mid-band mass rose in " + std::to_string(ups) +
             "/10 seeds (need >= 8); deltas [" + deltas + "]";
  return r;
}

// ---- criterion 8: closed-form parameter count vs enumeration ----

CheckResult check_param_count() {
  CheckResult r{8, "param_count_enumeration", true, ""};
  for (AdapterVariant variant : {AdapterVariant::St, AdapterVariant::Ms,
                                 AdapterVariant::BaselineTemporal}) {
    for (std::size_t width : {16u, 32u, 64u}) {
      AdapterConfig cfg;
      switch (variant) {
        case AdapterVariant::St:
          cfg = default_st_config(64, width, 16);
          break;
        case AdapterVariant::Ms:
          cfg = default_ms_config(64, width, 16);
          break;
        case AdapterVariant::BaselineTemporal:
          cfg.variant = AdapterVariant::BaselineTemporal;
          cfg.d = 64;
          cfg.c_a = width;
          break;
      }
      const std::size_t closed = adapter_param_count(cfg);
      const std::size_t counted = param_count(init_adapter(cfg, 0));
      if (closed != counted) {
        r.pass = false;
        r.detail = to_string(variant) + " width " + std::to_string(width) +
                   ": closed form " + std::to_string(closed) +
                   " vs enumerated " + std::to_string(counted);
        return r;
      }
    }
  }
  for (std::size_t width : {16u, 32u, 64u}) {
    const std::size_t ms2w =
        adapter_param_count(default_ms_config(64, 2 * width, 16));
    const std::size_t stw =
        adapter_param_count(default_st_config(64, width, 16));
    if (ms2w <= stw) {
      r.pass = false;
      r.detail = "ms at width " + std::to_string(2 * width) + " (" +
                 std::to_string(ms2w) + ") not larger than st at width " +
                 std::to_string(width) + " (" + std::to_string(stw) + ")";
      return r;
    }
  }
  r.detail =
      "closed form equals enumeration for 3 variants x widths {16,32,64}; "
      "ms(2w) > st(w) at every width";
  return r;
}

// ---- criterion 9: the train command is byte-deterministic ----

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CheckResult check_train_determinism() {
  CheckResult r{9, "train_runs_byte_identical", false, ""};
  const fs::path root =
      fs::temp_directory_path() /
      ("f2f-verify-" + std::to_string(
                           static_cast<unsigned long>(::getpid())));
  fs::remove_all(root);
  fs::create_directories(root);

  RunConfig cfg;
  cfg.synth.clips_per_class = 20;
  cfg.synth.d = 32;
  cfg.synth.n = 4;
  cfg.adapter.variant = AdapterVariant::Ms;  // d, scales resolve off the data
  cfg.adapter.c_a = 8;
  cfg.adapter.placement = Placement::BeforeAttention;
  cfg.train.epochs = 6;
  cfg.train.batch_size = 16;
  cfg.train.base_lr = 2e-3;
  const nlohmann::json doc = run_config_to_json(cfg);
  const std::string cfg_path = (root / "config.json").string();
  {
    std::ofstream out(cfg_path, std::ios::binary);
    out << doc.dump(2) << "\n";
  }

  SynthArgs synth_args;
  synth_args.config_path = cfg_path;
  synth_args.out_dir = (root / "data").string();
  run_cmd_synth(synth_args);

  std::vector<std::string> ckpt(2), report(2);
  for (int run = 0; run < 2; ++run) {
    TrainArgs args;
    args.config_path = cfg_path;
    args.data_dir = synth_args.out_dir;
    args.checkpoint_path =
        (root / ("run" + std::to_string(run) + ".f2fc")).string();
    args.report_path =
        (root / ("run" + std::to_string(run) + ".json")).string();
    run_cmd_train(args);
    ckpt[run] = read_bytes(args.checkpoint_path);
    report[run] = read_bytes(args.report_path);
  }
  const bool ckpt_same = ckpt[0] == ckpt[1];
  const bool report_same = report[0] == report[1];
  r.pass = ckpt_same && report_same;
  r.detail = std::string("checkpoints ") +
             (ckpt_same ? "identical" : "DIFFER") + " (" +
             std::to_string(ckpt[0].size()) + " bytes), reports " +
             (report_same ? "identical" : "DIFFER");
  fs::remove_all(root);
  return r;
}

void log_result(std::ostream* log, const CheckResult& r) {
  if (!log) return;
  *log << (r.pass ? "[ ok ] " : "[FAIL] ") << r.name << ": " << r.detail
       << "\n";
  log->flush();
}

}  // namespace

std::vector<CheckResult> run_suite(const std::string& suite,
                                   const VerifyOptions& opts) {
  const std::set<std::string> known = {"all",  "fft",   "stft",
                                       "grad", "anova", "e2e"};
  if (!known.count(suite))
    throw ConfigError("unknown suite \"" + suite +
                      "\" (expected one of all, fft, stft, grad, anova, "
                      "e2e)");
  const bool all = suite == "all";
  std::vector<CheckResult> out;
  const auto run = [&](CheckResult r) {
    log_result(opts.log, r);
    out.push_back(std::move(r));
  };

  if (all || suite == "fft") {
    run(check_fft_oracle());
    run(check_fft_parseval());
  }
  if (all || suite == "stft") run(check_stft_round_trip());
  if (all || suite == "grad") {
    run(check_zero_init_identity());
    run(check_gradients(opts.grad_fault));
  }
  if (all || suite == "anova") {
    run(check_discriminability_reference());
    run(check_discriminability_normalization());
    run(check_planted_argmax());
  }
  if (all || suite == "e2e") {
    run(check_ms_accuracy());
    run(check_pooled_baseline());
    run(check_band_mass_shift(opts.log));
    run(check_param_count());
    run(check_train_determinism());
  }
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

nlohmann::json results_to_json(const std::string& suite,
                               const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : results) {
    checks.push_back({{"criterion", r.criterion},
                      {"name", r.name},
                      {"pass", r.pass},
                      {"detail", r.detail}});
    if (!r.pass) ++failed;
  }
  return {{"suite", suite},
          {"checks", checks},
          {"total", results.size()},
          {"failed", failed},
          {"pass", failed == 0}};
}

}  // namespace f2f
