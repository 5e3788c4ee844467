#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "f2f/adapters.hpp"
#include "f2f/param_set.hpp"
#include "f2f/tensor.hpp"

namespace f2f {

// Frequency-coded synthetic clips: class c is a sinusoid at class_bins[c]
// cycles per clip, broadcast over a random unit direction in token-embedding
// space, with a uniform random phase per clip. The phase draw makes every
// per-frame marginal class-independent, so temporally blind classifiers sit
// at chance by construction.
struct SynthConfig {
  std::size_t classes = 4;
  std::vector<std::size_t> class_bins = {2, 3, 4, 5};
  std::size_t t = 16;
  std::size_t n = 9;
  std::size_t d = 64;
  double amplitude = 24.0;  // ~unit per-component amplitude at N*D = 576
  double noise_std = 0.3;
  std::size_t clips_per_class = 100;
  std::uint64_t seed = 0;
};

void validate_synth_config(const SynthConfig& cfg);

struct Dataset {
  Tensor x;  // [B, T, N, D]
  std::vector<std::size_t> labels;
};

struct DataBundle {
  Dataset train;
  Dataset val;
  Dataset test;
  std::size_t classes = 0;
};

// Splits draw from disjoint seed streams; the same config is bit-identical
// across calls.
DataBundle synth_generate(const SynthConfig& cfg);

// Directory layout: {train,val,test}.f2ft rank-4 tensors plus
// labels_{train,val,test}.csv.
void save_dataset(const std::string& dir, const DataBundle& data);
DataBundle load_dataset(const std::string& dir);

// Seeded random per-token linear map plus GELU; weights never join the
// optimizer.
struct Backbone {
  Tensor w;  // [D, D]
  Tensor b;  // [D]
};

Backbone build_backbone(std::size_t d, std::uint64_t seed);

enum class TapPoint { PreAdapter, PostAdapter };

struct TrainConfig {
  AdapterConfig adapter;
  bool pooled_baseline = false;  // skip the adapter entirely
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double base_lr = 1e-3;
  double weight_decay = 0.05;
  double warmup_epochs = 2.0;
  std::uint64_t seed = 0;
  TapPoint tap_point = TapPoint::PostAdapter;
};

// Fills zero-valued adapter dimensions from the data: d from the embedding
// width, n_fft = min(32, t/2) with hop n_fft/4, scales {t, t/2, t/4}.
AdapterConfig resolve_adapter_config(AdapterConfig cfg, std::size_t t,
                                     std::size_t d);

// Linear warmup from 0 over warmup_epochs, then cosine decay to 0 at the
// last scheduled epoch; epoch may be fractional (per-step interpolation).
double lr_schedule(double epoch, const TrainConfig& cfg);

struct AdamState {
  ParamSet m;
  ParamSet v;
};

AdamState adam_init(const ParamSet& params);

// Decoupled weight decay applied before the bias-corrected adaptive step;
// step is 1-based. Non-finite gradients abort naming the parameter.
void adamw_step(ParamSet& params, AdamState& state, std::uint64_t step,
                double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8, double weight_decay = 0.0);

struct CrossEntropyResult {
  double loss = 0.0;
  Tensor dlogits;
};

// Mean over the batch of -log softmax at the true class, max-subtracted.
CrossEntropyResult cross_entropy(const Tensor& logits,
                                 const std::vector<std::size_t>& labels);

// CLS token (index 0) per frame, averaged over frames, one linear layer.
// head holds "w" [D, classes] and "b" [classes].
Tensor classify(const Tensor& x, const ParamSet& head);

// The single-block model: optional adapter before and/or after the frozen
// backbone per the adapter config's placement. Placement Both carries two
// independent adapter parameter sets.
struct Model {
  AdapterConfig adapter_cfg;
  bool pooled_baseline = false;
  std::size_t classes = 0;
  Backbone backbone;
  std::vector<ParamSet> adapters;
  ParamSet head;
};

Model build_model(const AdapterConfig& cfg, bool pooled_baseline,
                  std::size_t classes, std::uint64_t seed);

std::size_t trained_param_count(const Model& model);

struct ModelTrace {
  Tensor x;
  Tensor y0;       // backbone input (after the pre-placement adapter, if any)
  Tensor bb_pre;   // backbone linear output before the activation
  Tensor h;        // backbone output
  Tensor y1;       // head input (after the post-placement adapter, if any)
  Tensor cls_mean; // [B, D]
  AdapterTrace pre_trace;
  AdapterTrace post_trace;
  bool has_pre = false;
  bool has_post = false;
};

Tensor model_logits(const Model& model, const Tensor& x,
                    ModelTrace* trace = nullptr);

// Accumulates gradients into the adapters and head (the backbone receives
// none) and returns dL/dx; with need_input_grad false the input gradient is
// skipped when no trainable parameter depends on it and an empty tensor
// comes back.
Tensor model_backward(Model& model, const ModelTrace& trace,
                      const Tensor& dlogits, bool need_input_grad = true);

// Embeddings at the analysis tap: the input or output of the adapter under
// study (the post-placement one when both exist); the backbone output for
// the pooled baseline.
Tensor model_embeddings(const Model& model, const Tensor& x, TapPoint tap);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class;
};

// Argmax accuracy; ties resolve to the lowest class index.
EvalResult evaluate(const Model& model, const Dataset& data,
                    std::size_t batch_size = 64);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> train_acc;
  std::vector<double> val_acc;
  double final_test_accuracy = 0.0;
  std::size_t trained_param_count = 0;
  double wall_seconds = 0.0;  // stderr-only; never serialized
};

struct Checkpoint {
  TrainConfig cfg;
  std::size_t classes = 0;
  std::size_t d = 0;
  std::vector<ParamSet> adapters;
  ParamSet head;
  std::vector<AdamState> adapter_states;
  AdamState head_state;
  std::uint64_t step = 0;
  TrainReport report;
};

struct TrainResult {
  TrainReport report;
  Checkpoint checkpoint;
};

// Frozen backbone -> adapter(s) -> CLS head, AdamW on adapter + head only,
// per-epoch seeded shuffles; deterministic given (config, seed).
TrainResult train(const TrainConfig& cfg, const DataBundle& data);

Model model_from_checkpoint(const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string report_to_json(const TrainReport& report);

}  // namespace f2f
