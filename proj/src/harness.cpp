#include "f2f/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "f2f/analysis.hpp"
#include "f2f/errors.hpp"
#include "f2f/ops.hpp"
#include "f2f/parallel.hpp"
#include "f2f/rng.hpp"

namespace fs = std::filesystem;

namespace f2f {

namespace {

constexpr std::uint64_t kSynthTag = 0x57ea;
constexpr std::uint64_t kBackboneTag = 0xbbb0;
constexpr std::uint64_t kAdapterTag = 0xad00;
constexpr std::uint64_t kHeadTag = 0x4ead;
constexpr std::uint64_t kShuffleTag = 0x5f1e;

bool has_pre_adapter(const Model& model) {
  return !model.pooled_baseline &&
         (model.adapter_cfg.placement == Placement::BeforeAttention ||
          model.adapter_cfg.placement == Placement::Both);
}

bool has_post_adapter(const Model& model) {
  return !model.pooled_baseline &&
         (model.adapter_cfg.placement == Placement::AfterAttention ||
          model.adapter_cfg.placement == Placement::Both);
}

std::size_t post_adapter_index(const Model& model) {
  return model.adapter_cfg.placement == Placement::Both ? 1 : 0;
}

// [B, T, N, D] -> mean over frames of token 0, [B, D]
Tensor cls_mean_of(const Tensor& x) {
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), d = x.dim(3);
  Tensor out({b, d});
  const double inv_t = 1.0 / static_cast<double>(t);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      const double* row = x.data() + ((i * t + j) * n) * d;
      double* acc = out.data() + i * d;
      for (std::size_t k = 0; k < d; ++k) acc[k] += row[k];
    }
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= inv_t;
  return out;
}

void check_batch_shape(const Tensor& x) {
  if (x.rank() != 4)
    throw DimensionError("embedding batch must be [B, T, N, D], got " +
                         shape_to_string(x.shape()));
}

void accumulate_grads(ParamSet& dst, const std::string& name,
                      const Tensor& g) {
  Tensor& grad = dst.grad(name);
  for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] += g[i];
}

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

Tensor gather_clips(const Tensor& x, const std::vector<std::size_t>& order,
                    std::size_t first, std::size_t count) {
  const std::size_t stride = x.dim(1) * x.dim(2) * x.dim(3);
  Tensor out({count, x.dim(1), x.dim(2), x.dim(3)});
  for (std::size_t i = 0; i < count; ++i)
    std::memcpy(out.data() + i * stride,
                x.data() + order[first + i] * stride,
                stride * sizeof(double));
  return out;
}

void write_scalar(std::vector<NamedTensor>& out, const std::string& name,
                  double value) {
  out.push_back({name, Tensor::scalar(value)});
}

class EntryMap {
 public:
  EntryMap(std::vector<NamedTensor> entries, std::string origin)
      : origin_(std::move(origin)) {
    for (auto& e : entries) map_.emplace(e.name, std::move(e.value));
  }

  const Tensor& at(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end())
      throw IoError(origin_ + ": missing checkpoint entry '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const { return map_.count(name) != 0; }

  double scalar(const std::string& name) const {
    const Tensor& t = at(name);
    if (t.numel() != 1)
      throw IoError(origin_ + ": entry '" + name + "' is not a scalar");
    return t[0];
  }

  std::vector<double> series(const std::string& name) const {
    if (!has(name)) return {};
    const Tensor& t = at(name);
    return std::vector<double>(t.data(), t.data() + t.numel());
  }

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, Tensor> map_;
  std::string origin_;
};

ParamSet load_param_group(const EntryMap& entries, const std::string& prefix,
                          const ParamSet& proto) {
  ParamSet out;
  for (const auto& e : proto.entries()) {
    const Tensor& stored = entries.at(prefix + e.name);
    if (stored.shape() != e.value.shape())
      throw IoError(entries.origin() + ": entry '" + prefix + e.name +
                    "' has shape " + shape_to_string(stored.shape()) +
                    ", expected " + shape_to_string(e.value.shape()));
    out.add(e.name, stored);
  }
  return out;
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.classes < 2)
    throw ConfigError("classes must be at least 2, got " +
                      std::to_string(cfg.classes));
  if (cfg.class_bins.size() != cfg.classes)
    throw ConfigError("class_bins must list one bin per class (" +
                      std::to_string(cfg.classes) + "), got " +
                      std::to_string(cfg.class_bins.size()));
  if (cfg.t < 4)
    throw ConfigError("t must be at least 4, got " + std::to_string(cfg.t));
  for (std::size_t bin : cfg.class_bins)
    if (bin < 1 || bin > cfg.t / 2 - 1)
      throw ConfigError("class_bins entries must lie in [1, " +
                        std::to_string(cfg.t / 2 - 1) + "], got " +
                        std::to_string(bin));
  for (std::size_t i = 0; i < cfg.class_bins.size(); ++i)
    for (std::size_t j = i + 1; j < cfg.class_bins.size(); ++j)
      if (cfg.class_bins[i] == cfg.class_bins[j])
        throw ConfigError("class_bins entries must be distinct, bin " +
                          std::to_string(cfg.class_bins[i]) + " repeats");
  if (cfg.n == 0 || cfg.d == 0)
    throw ConfigError("n and d must be positive");
  if (cfg.clips_per_class == 0)
    throw ConfigError("clips_per_class must be positive");
  if (!std::isfinite(cfg.amplitude))
    throw ConfigError("amplitude must be finite");
  if (!(cfg.noise_std >= 0.0))
    throw ConfigError("noise_std must be nonnegative");
}

namespace {

// One unit direction per dataset: classes differ only in temporal frequency,
// never in which embedding directions carry the signal.  With phases uniform
// the per-frame marginal is then identical across classes, so nothing short
// of temporal structure can separate them.
std::vector<double> synth_direction(const SynthConfig& cfg,
                                    std::uint64_t base) {
  Rng rng(mix_seed(base, 0xd12));
  std::vector<double> direction(cfg.n * cfg.d);
  double norm_sq = 0.0;
  for (double& u : direction) {
    u = rng.normal();
    norm_sq += u * u;
  }
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  for (double& u : direction) u *= inv_norm;
  return direction;
}

Dataset synth_split(const SynthConfig& cfg,
                    const std::vector<double>& direction,
                    std::uint64_t stream) {
  const std::size_t clips = cfg.classes * cfg.clips_per_class;
  Dataset out;
  out.x = Tensor({clips, cfg.t, cfg.n, cfg.d});
  out.labels.resize(clips);
  const std::size_t nd = cfg.n * cfg.d;

#pragma omp parallel for num_threads(par::threads()) schedule(static)
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(clips); ++bi) {
    const std::size_t b = static_cast<std::size_t>(bi);
    const std::size_t cls = b / cfg.clips_per_class;
    const double freq = static_cast<double>(cfg.class_bins[cls]);
    Rng rng(mix_seed(stream, b));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    double* clip = out.x.data() + b * cfg.t * nd;
    for (std::size_t t = 0; t < cfg.t; ++t) {
      const double wave =
          cfg.amplitude *
          std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) /
                       static_cast<double>(cfg.t) +
                   phase);
      for (std::size_t j = 0; j < nd; ++j) {
        double v = wave * direction[j];
        if (cfg.noise_std != 0.0) v += cfg.noise_std * rng.normal();
        clip[t * nd + j] = v;
      }
    }
    out.labels[b] = cls;
  }
  return out;
}

}  // namespace

DataBundle synth_generate(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  const std::uint64_t base = mix_seed(cfg.seed, kSynthTag);
  const std::vector<double> direction = synth_direction(cfg, base);
  DataBundle out;
  out.train = synth_split(cfg, direction, mix_seed(base, 0));
  out.val = synth_split(cfg, direction, mix_seed(base, 1));
  out.test = synth_split(cfg, direction, mix_seed(base, 2));
  out.classes = cfg.classes;
  return out;
}

void save_dataset(const std::string& dir, const DataBundle& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory (" + ec.message() + ")");
  const std::pair<const char*, const Dataset*> splits[] = {
      {"train", &data.train}, {"val", &data.val}, {"test", &data.test}};
  for (const auto& [name, split] : splits) {
    write_f2ft_file(dir + "/" + name + ".f2ft", split->x);
    write_labels_csv_file(dir + "/labels_" + std::string(name) + ".csv",
                          split->labels);
  }
}

DataBundle load_dataset(const std::string& dir) {
  DataBundle out;
  Dataset* splits[] = {&out.train, &out.val, &out.test};
  const char* names[] = {"train", "val", "test"};
  std::size_t max_label = 0;
  for (int i = 0; i < 3; ++i) {
    const std::string tensor_path = dir + "/" + names[i] + ".f2ft";
    splits[i]->x = read_f2ft_real(tensor_path);
    if (splits[i]->x.rank() != 4)
      throw DimensionError(tensor_path + ": expected a rank-4 tensor, got " +
                           shape_to_string(splits[i]->x.shape()));
    splits[i]->labels = read_labels_csv_file(dir + "/labels_" +
                                             std::string(names[i]) + ".csv");
    if (splits[i]->labels.size() != splits[i]->x.dim(0))
      throw DimensionError(tensor_path + ": " +
                           std::to_string(splits[i]->x.dim(0)) +
                           " clips but " +
                           std::to_string(splits[i]->labels.size()) +
                           " labels");
    for (std::size_t label : splits[i]->labels)
      max_label = std::max(max_label, label);
    for (std::size_t a = 1; a < 4; ++a)
      if (splits[i]->x.dim(a) != out.train.x.dim(a))
        throw DimensionError(tensor_path + ": split shapes disagree, " +
                             shape_to_string(splits[i]->x.shape()) + " vs " +
                             shape_to_string(out.train.x.shape()));
  }
  out.classes = max_label + 1;
  return out;
}

Backbone build_backbone(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Backbone bb;
  bb.w = Tensor({d, d});
  bb.b = Tensor({d});
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < bb.w.numel(); ++i) bb.w[i] = scale * rng.normal();
  for (std::size_t i = 0; i < d; ++i) bb.b[i] = 0.1 * rng.normal();
  return bb;
}

AdapterConfig resolve_adapter_config(AdapterConfig cfg, std::size_t t,
                                     std::size_t d) {
  if (cfg.d == 0) cfg.d = d;
  if (cfg.variant == AdapterVariant::St) {
    if (cfg.n_fft == 0) cfg.n_fft = std::min<std::size_t>(32, t / 2);
    if (cfg.hop == 0) cfg.hop = std::max<std::size_t>(1, cfg.n_fft / 4);
  }
  if (cfg.variant == AdapterVariant::Ms && cfg.window_scales.empty())
    cfg.window_scales = {t, t / 2, t / 4};
  return cfg;
}

double lr_schedule(double epoch, const TrainConfig& cfg) {
  const double warmup = cfg.warmup_epochs;
  if (warmup > 0.0 && epoch < warmup)
    return cfg.base_lr * (epoch / warmup);
  const double span =
      static_cast<double>(cfg.epochs) - 1.0 - warmup;  // last epoch hits 0
  if (span <= 0.0) return cfg.base_lr;
  double progress = (epoch - warmup) / span;
  progress = std::clamp(progress, 0.0, 1.0);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState adam_init(const ParamSet& params) {
  AdamState state;
  for (const auto& e : params.entries()) {
    state.m.add(e.name, Tensor(e.value.shape()));
    state.v.add(e.name, Tensor(e.value.shape()));
  }
  return state;
}

void adamw_step(ParamSet& params, AdamState& state, std::uint64_t step,
                double lr, double beta1, double beta2, double eps,
                double weight_decay) {
  if (step == 0) throw ConfigError("adamw step numbering is 1-based");
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (auto& e : params.entries()) {
    for (std::size_t i = 0; i < e.grad.numel(); ++i)
      if (!std::isfinite(e.grad[i]))
        throw DivergenceError("adamw: non-finite gradient in " + e.name);
    Tensor& m = state.m.value(e.name);
    Tensor& v = state.v.value(e.name);
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      e.value[i] *= decay;
      const double g = e.grad[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      e.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

CrossEntropyResult cross_entropy(const Tensor& logits,
                                 const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2)
    throw DimensionError("logits must be [B, classes], got " +
                         shape_to_string(logits.shape()));
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b)
    throw DimensionError("label count " + std::to_string(labels.size()) +
                         " does not match batch size " + std::to_string(b));
  CrossEntropyResult out;
  out.dlogits = Tensor({b, c});
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c)
      throw ConfigError("label " + std::to_string(labels[i]) +
                        " out of range for " + std::to_string(c) + " classes");
    const double* row = logits.data() + i * c;
    double m = row[0];
    for (std::size_t k = 1; k < c; ++k) m = std::max(m, row[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - m);
    const double log_z = std::log(z);
    out.loss += (log_z - (row[labels[i]] - m)) * inv_b;
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(row[k] - m) / z;
      out.dlogits[i * c + k] =
          (p - (k == labels[i] ? 1.0 : 0.0)) * inv_b;
    }
  }
  return out;
}

Tensor classify(const Tensor& x, const ParamSet& head) {
  check_batch_shape(x);
  const Tensor& w = head.value("w");
  if (w.rank() != 2 || w.dim(0) != x.dim(3))
    throw DimensionError("head weight is " + shape_to_string(w.shape()) +
                         " but embeddings have width " +
                         std::to_string(x.dim(3)));
  return linear_apply(cls_mean_of(x), w, head.value("b"));
}

Model build_model(const AdapterConfig& cfg, bool pooled_baseline,
                  std::size_t classes, std::uint64_t seed) {
  if (classes < 2)
    throw ConfigError("model needs at least 2 classes, got " +
                      std::to_string(classes));
  Model model;
  model.adapter_cfg = cfg;
  model.pooled_baseline = pooled_baseline;
  model.classes = classes;
  model.backbone = build_backbone(cfg.d, mix_seed(seed, kBackboneTag));
  if (!pooled_baseline) {
    validate_config(cfg);
    const std::size_t count = cfg.placement == Placement::Both ? 2 : 1;
    for (std::size_t i = 0; i < count; ++i)
      model.adapters.push_back(init_adapter(cfg, mix_seed(seed, kAdapterTag + i)));
  }
  Rng rng(mix_seed(seed, kHeadTag));
  const double bound = std::sqrt(1.0 / static_cast<double>(cfg.d));
  Tensor w({cfg.d, classes});
  for (std::size_t i = 0; i < w.numel(); ++i)
    w[i] = rng.uniform(-bound, bound);
  model.head.add("w", std::move(w));
  model.head.add("b", Tensor({classes}));
  return model;
}

std::size_t trained_param_count(const Model& model) {
  std::size_t total = param_count(model.head);
  for (const auto& a : model.adapters) total += param_count(a);
  return total;
}

Tensor model_logits(const Model& model, const Tensor& x, ModelTrace* trace) {
  check_batch_shape(x);
  if (x.dim(3) != model.adapter_cfg.d)
    throw DimensionError("embedding width " + std::to_string(x.dim(3)) +
                         " does not match the model width " +
                         std::to_string(model.adapter_cfg.d));

  Tensor y0 = x;
  if (has_pre_adapter(model))
    y0 = adapter_forward(model.adapter_cfg, model.adapters[0], x,
                         trace ? &trace->pre_trace : nullptr);
  Tensor bb_pre = linear_apply(y0, model.backbone.w, model.backbone.b);
  Tensor h = gelu_apply(bb_pre);
  Tensor y1 = h;
  if (has_post_adapter(model))
    y1 = adapter_forward(model.adapter_cfg,
                         model.adapters[post_adapter_index(model)], h,
                         trace ? &trace->post_trace : nullptr);
  Tensor cls_mean = cls_mean_of(y1);
  Tensor logits = linear_apply(cls_mean, model.head.value("w"),
                               model.head.value("b"));
  if (trace) {
    trace->x = x;
    trace->y0 = std::move(y0);
    trace->bb_pre = std::move(bb_pre);
    trace->h = std::move(h);
    trace->y1 = std::move(y1);
    trace->cls_mean = std::move(cls_mean);
    trace->has_pre = has_pre_adapter(model);
    trace->has_post = has_post_adapter(model);
  }
  return logits;
}

Tensor model_backward(Model& model, const ModelTrace& trace,
                      const Tensor& dlogits, bool need_input_grad) {
  const std::size_t b = trace.y1.dim(0), t = trace.y1.dim(1),
                    n = trace.y1.dim(2), d = trace.y1.dim(3);
  LinearGrads head_grads =
      linear_backward(trace.cls_mean, model.head.value("w"), dlogits);
  accumulate_grads(model.head, "w", head_grads.dw);
  accumulate_grads(model.head, "b", head_grads.db);

  Tensor dy1({b, t, n, d});
  const double inv_t = 1.0 / static_cast<double>(t);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      double* row = dy1.data() + ((i * t + j) * n) * d;
      const double* src = head_grads.dx.data() + i * d;
      for (std::size_t k = 0; k < d; ++k) row[k] = src[k] * inv_t;
    }

  Tensor dh = trace.has_post
                  ? adapter_backward(model.adapter_cfg,
                                     model.adapters[post_adapter_index(model)],
                                     trace.post_trace, dy1)
                  : std::move(dy1);
  // nothing below the backbone trains, so its backward only matters when the
  // caller wants dL/dx or a pre-placement adapter sits underneath
  if (!trace.has_pre && !need_input_grad) return Tensor();
  Tensor dpre = gelu_backward(trace.bb_pre, dh);
  // dw/db of the frozen backbone are discarded by contract
  Tensor dy0 = linear_backward(trace.y0, model.backbone.w, dpre).dx;
  if (trace.has_pre)
    return adapter_backward(model.adapter_cfg, model.adapters[0],
                            trace.pre_trace, dy0);
  return dy0;
}

Tensor model_embeddings(const Model& model, const Tensor& x, TapPoint tap) {
  check_batch_shape(x);
  Tensor y0 = x;
  if (has_pre_adapter(model))
    y0 = adapter_forward(model.adapter_cfg, model.adapters[0], x);
  if (has_pre_adapter(model) && !has_post_adapter(model) &&
      tap == TapPoint::PreAdapter)
    return x;
  if (has_pre_adapter(model) && !has_post_adapter(model) &&
      tap == TapPoint::PostAdapter)
    return y0;
  Tensor h = gelu_apply(linear_apply(y0, model.backbone.w, model.backbone.b));
  if (!has_post_adapter(model) || tap == TapPoint::PreAdapter) return h;
  return adapter_forward(model.adapter_cfg,
                         model.adapters[post_adapter_index(model)], h);
}

EvalResult evaluate(const Model& model, const Dataset& data,
                    std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const std::size_t total = data.labels.size();
  if (total == 0) throw ConfigError("evaluation split is empty");
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;

  EvalResult out;
  out.per_class.assign(model.classes, 0.0);
  std::vector<std::size_t> class_counts(model.classes, 0);
  std::size_t correct = 0;
  for (std::size_t first = 0; first < total; first += batch_size) {
    const std::size_t count = std::min(batch_size, total - first);
    Tensor xb = gather_clips(data.x, order, first, count);
    Tensor logits = model_logits(model, xb);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = data.labels[first + i];
      if (label >= model.classes)
        throw ConfigError("label " + std::to_string(label) +
                          " out of range for " +
                          std::to_string(model.classes) + " classes");
      ++class_counts[label];
      if (argmax_row(logits.data() + i * model.classes, model.classes) ==
          label) {
        ++correct;
        out.per_class[label] += 1.0;
      }
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  for (std::size_t c = 0; c < model.classes; ++c)
    if (class_counts[c] > 0)
      out.per_class[c] /= static_cast<double>(class_counts[c]);
  return out;
}

TrainResult train(const TrainConfig& cfg, const DataBundle& data) {
  const auto start = std::chrono::steady_clock::now();
  if (data.train.labels.empty() || data.val.labels.empty() ||
      data.test.labels.empty())
    throw ConfigError("every data split must be non-empty");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!cfg.pooled_baseline && cfg.adapter.d != data.train.x.dim(3))
    throw ConfigError("adapter width " + std::to_string(cfg.adapter.d) +
                      " does not match embedding width " +
                      std::to_string(data.train.x.dim(3)));

  AdapterConfig acfg = cfg.adapter;
  if (cfg.pooled_baseline) acfg.d = data.train.x.dim(3);  // backbone width
  Model model = build_model(acfg, cfg.pooled_baseline, data.classes, cfg.seed);

  std::vector<AdamState> adapter_states;
  for (const auto& a : model.adapters) adapter_states.push_back(adam_init(a));
  AdamState head_state = adam_init(model.head);
  std::uint64_t step = 0;

  const std::size_t n_train = data.train.labels.size();
  const std::size_t batches = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  TrainReport report;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(mix_seed(cfg.seed, kShuffleTag), epoch));
    for (std::size_t i = n_train; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;
    for (std::size_t k = 0; k < batches; ++k) {
      const std::size_t first = k * cfg.batch_size;
      const std::size_t count = std::min(cfg.batch_size, n_train - first);
      Tensor xb = gather_clips(data.train.x, order, first, count);
      std::vector<std::size_t> yb(count);
      for (std::size_t i = 0; i < count; ++i)
        yb[i] = data.train.labels[order[first + i]];

      ModelTrace trace;
      Tensor logits = model_logits(model, xb, &trace);
      CrossEntropyResult ce = cross_entropy(logits, yb);
      if (!std::isfinite(ce.loss))
        throw DivergenceError("epoch " + std::to_string(epoch) +
                              ": training loss is not finite");
      epoch_loss += ce.loss * static_cast<double>(count);
      for (std::size_t i = 0; i < count; ++i)
        if (argmax_row(logits.data() + i * model.classes, model.classes) ==
            yb[i])
          ++epoch_correct;

      for (auto& a : model.adapters) a.zero_grads();
      model.head.zero_grads();
      model_backward(model, trace, ce.dlogits, false);

      ++step;
      const double lr = lr_schedule(
          static_cast<double>(epoch) +
              static_cast<double>(k) / static_cast<double>(batches),
          cfg);
      for (std::size_t a = 0; a < model.adapters.size(); ++a)
        adamw_step(model.adapters[a], adapter_states[a], step, lr, 0.9, 0.999,
                   1e-8, cfg.weight_decay);
      adamw_step(model.head, head_state, step, lr, 0.9, 0.999, 1e-8,
                 cfg.weight_decay);
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    report.train_acc.push_back(static_cast<double>(epoch_correct) /
                               static_cast<double>(n_train));
    report.val_acc.push_back(
        evaluate(model, data.val, cfg.batch_size).accuracy);
  }

  report.final_test_accuracy =
      evaluate(model, data.test, cfg.batch_size).accuracy;
  report.trained_param_count = trained_param_count(model);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  TrainResult out;
  out.report = report;
  out.checkpoint.cfg = cfg;
  out.checkpoint.cfg.adapter = acfg;
  out.checkpoint.classes = data.classes;
  out.checkpoint.d = data.train.x.dim(3);
  out.checkpoint.adapters = model.adapters;
  out.checkpoint.head = model.head;
  out.checkpoint.adapter_states = adapter_states;
  out.checkpoint.head_state = head_state;
  out.checkpoint.step = step;
  out.checkpoint.report = report;
  return out;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model;
  model.adapter_cfg = ckpt.cfg.adapter;
  model.pooled_baseline = ckpt.cfg.pooled_baseline;
  model.classes = ckpt.classes;
  model.backbone =
      build_backbone(ckpt.d, mix_seed(ckpt.cfg.seed, kBackboneTag));
  model.adapters = ckpt.adapters;
  model.head = ckpt.head;
  return model;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::vector<NamedTensor> entries;
  write_scalar(entries, "meta.schema", 1.0);
  write_scalar(entries, "meta.classes", static_cast<double>(ckpt.classes));
  write_scalar(entries, "meta.d", static_cast<double>(ckpt.d));
  write_scalar(entries, "meta.step", static_cast<double>(ckpt.step));
  write_scalar(entries, "meta.pooled_baseline",
               ckpt.cfg.pooled_baseline ? 1.0 : 0.0);
  write_scalar(entries, "meta.epochs", static_cast<double>(ckpt.cfg.epochs));
  write_scalar(entries, "meta.batch_size",
               static_cast<double>(ckpt.cfg.batch_size));
  write_scalar(entries, "meta.base_lr", ckpt.cfg.base_lr);
  write_scalar(entries, "meta.weight_decay", ckpt.cfg.weight_decay);
  write_scalar(entries, "meta.warmup_epochs", ckpt.cfg.warmup_epochs);
  write_scalar(entries, "meta.seed_lo",
               static_cast<double>(ckpt.cfg.seed & 0xffffffffULL));
  write_scalar(entries, "meta.seed_hi",
               static_cast<double>(ckpt.cfg.seed >> 32));
  write_scalar(entries, "meta.tap",
               ckpt.cfg.tap_point == TapPoint::PreAdapter ? 0.0 : 1.0);

  const AdapterConfig& a = ckpt.cfg.adapter;
  write_scalar(entries, "meta.adapter.variant",
               static_cast<double>(static_cast<int>(a.variant)));
  write_scalar(entries, "meta.adapter.d", static_cast<double>(a.d));
  write_scalar(entries, "meta.adapter.c_a", static_cast<double>(a.c_a));
  write_scalar(entries, "meta.adapter.n_fft", static_cast<double>(a.n_fft));
  write_scalar(entries, "meta.adapter.hop", static_cast<double>(a.hop));
  write_scalar(entries, "meta.adapter.activation",
               static_cast<double>(static_cast<int>(a.activation)));
  write_scalar(entries, "meta.adapter.placement",
               static_cast<double>(static_cast<int>(a.placement)));
  write_scalar(entries, "meta.adapter.fusion",
               static_cast<double>(static_cast<int>(a.fusion)));
  if (!a.window_scales.empty()) {
    Tensor scales({a.window_scales.size()});
    for (std::size_t i = 0; i < a.window_scales.size(); ++i)
      scales[i] = static_cast<double>(a.window_scales[i]);
    entries.push_back({"meta.adapter.scales", std::move(scales)});
  }

  for (std::size_t i = 0; i < ckpt.adapters.size(); ++i) {
    const std::string prefix = "adapter" + std::to_string(i) + ".";
    for (const auto& e : ckpt.adapters[i].entries())
      entries.push_back({prefix + e.name, e.value});
  }
  for (const auto& e : ckpt.head.entries())
    entries.push_back({"head." + e.name, e.value});

  for (std::size_t i = 0; i < ckpt.adapter_states.size(); ++i) {
    const std::string prefix = "opt.adapter" + std::to_string(i) + ".";
    for (const auto& e : ckpt.adapter_states[i].m.entries())
      entries.push_back({prefix + "m." + e.name, e.value});
    for (const auto& e : ckpt.adapter_states[i].v.entries())
      entries.push_back({prefix + "v." + e.name, e.value});
  }
  for (const auto& e : ckpt.head_state.m.entries())
    entries.push_back({"opt.head.m." + e.name, e.value});
  for (const auto& e : ckpt.head_state.v.entries())
    entries.push_back({"opt.head.v." + e.name, e.value});

  auto push_series = [&entries](const char* name,
                                const std::vector<double>& values) {
    if (values.empty()) return;
    entries.push_back(
        {name, Tensor({values.size()}, std::vector<double>(values))});
  };
  push_series("history.train_loss", ckpt.report.train_loss);
  push_series("history.train_acc", ckpt.report.train_acc);
  push_series("history.val_acc", ckpt.report.val_acc);
  write_scalar(entries, "meta.final_test_accuracy",
               ckpt.report.final_test_accuracy);
  write_scalar(entries, "meta.trained_param_count",
               static_cast<double>(ckpt.report.trained_param_count));

  write_f2fc_file(path, entries);
}

Checkpoint load_checkpoint(const std::string& path) {
  EntryMap entries(read_f2fc_file(path), path);
  if (entries.scalar("meta.schema") != 1.0)
    throw IoError(path + ": unsupported checkpoint schema");

  Checkpoint ckpt;
  ckpt.classes = static_cast<std::size_t>(entries.scalar("meta.classes"));
  ckpt.d = static_cast<std::size_t>(entries.scalar("meta.d"));
  ckpt.step = static_cast<std::uint64_t>(entries.scalar("meta.step"));

  TrainConfig& cfg = ckpt.cfg;
  cfg.pooled_baseline = entries.scalar("meta.pooled_baseline") != 0.0;
  cfg.epochs = static_cast<std::size_t>(entries.scalar("meta.epochs"));
  cfg.batch_size = static_cast<std::size_t>(entries.scalar("meta.batch_size"));
  cfg.base_lr = entries.scalar("meta.base_lr");
  cfg.weight_decay = entries.scalar("meta.weight_decay");
  cfg.warmup_epochs = entries.scalar("meta.warmup_epochs");
  cfg.seed = (static_cast<std::uint64_t>(entries.scalar("meta.seed_hi"))
              << 32) |
             static_cast<std::uint64_t>(entries.scalar("meta.seed_lo"));
  cfg.tap_point = entries.scalar("meta.tap") == 0.0 ? TapPoint::PreAdapter
                                                    : TapPoint::PostAdapter;

  AdapterConfig& a = cfg.adapter;
  a.variant =
      static_cast<AdapterVariant>(static_cast<int>(entries.scalar("meta.adapter.variant")));
  a.d = static_cast<std::size_t>(entries.scalar("meta.adapter.d"));
  a.c_a = static_cast<std::size_t>(entries.scalar("meta.adapter.c_a"));
  a.n_fft = static_cast<std::size_t>(entries.scalar("meta.adapter.n_fft"));
  a.hop = static_cast<std::size_t>(entries.scalar("meta.adapter.hop"));
  a.activation = static_cast<Activation>(
      static_cast<int>(entries.scalar("meta.adapter.activation")));
  a.placement = static_cast<Placement>(
      static_cast<int>(entries.scalar("meta.adapter.placement")));
  a.fusion = static_cast<Fusion>(
      static_cast<int>(entries.scalar("meta.adapter.fusion")));
  if (entries.has("meta.adapter.scales")) {
    const Tensor& scales = entries.at("meta.adapter.scales");
    for (std::size_t i = 0; i < scales.numel(); ++i)
      a.window_scales.push_back(static_cast<std::size_t>(scales[i]));
  }

  if (!cfg.pooled_baseline) {
    const std::size_t count = a.placement == Placement::Both ? 2 : 1;
    ParamSet proto = init_adapter(a, 0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::string prefix = "adapter" + std::to_string(i) + ".";
      ckpt.adapters.push_back(load_param_group(entries, prefix, proto));
      AdamState state;
      state.m = load_param_group(entries, "opt." + prefix.substr(0, prefix.size() - 1) + ".m.", proto);
      state.v = load_param_group(entries, "opt." + prefix.substr(0, prefix.size() - 1) + ".v.", proto);
      ckpt.adapter_states.push_back(std::move(state));
    }
  }

  ParamSet head_proto;
  head_proto.add("w", Tensor({ckpt.d, ckpt.classes}));
  head_proto.add("b", Tensor({ckpt.classes}));
  ckpt.head = load_param_group(entries, "head.", head_proto);
  ckpt.head_state.m = load_param_group(entries, "opt.head.m.", head_proto);
  ckpt.head_state.v = load_param_group(entries, "opt.head.v.", head_proto);

  ckpt.report.train_loss = entries.series("history.train_loss");
  ckpt.report.train_acc = entries.series("history.train_acc");
  ckpt.report.val_acc = entries.series("history.val_acc");
  ckpt.report.final_test_accuracy =
      entries.scalar("meta.final_test_accuracy");
  ckpt.report.trained_param_count = static_cast<std::size_t>(
      entries.scalar("meta.trained_param_count"));
  return ckpt;
}

std::string report_to_json(const TrainReport& report) {
  nlohmann::json j;
  j["epochs"] = report.train_loss.size();
  j["train_loss"] = report.train_loss;
  j["train_accuracy"] = report.train_acc;
  j["val_accuracy"] = report.val_acc;
  j["final_test_accuracy"] = report.final_test_accuracy;
  j["trained_param_count"] = report.trained_param_count;
  return j.dump(2);
}

}  // namespace f2f
