#include "f2f/config_json.hpp"

#include <cstdint>
#include <fstream>
#include <limits>

#include "f2f/errors.hpp"

namespace f2f {
namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

[[noreturn]] void bad_enum(const std::string& origin, const std::string& got,
                           const std::string& allowed) {
  fail(origin, "unknown value \"" + got + "\" (expected one of " + allowed +
                   ")");
}

std::uint64_t get_u64(const nlohmann::json& v, const std::string& origin) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail(origin, "must be a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    fail(origin, "must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::size_t get_size(const nlohmann::json& v, const std::string& origin) {
  return static_cast<std::size_t>(get_u64(v, origin));
}

double get_double(const nlohmann::json& v, const std::string& origin) {
  if (!v.is_number()) fail(origin, "must be a number");
  return v.get<double>();
}

bool get_bool(const nlohmann::json& v, const std::string& origin) {
  if (!v.is_boolean()) fail(origin, "must be true or false");
  return v.get<bool>();
}

std::string get_string(const nlohmann::json& v, const std::string& origin) {
  if (!v.is_string()) fail(origin, "must be a string");
  return v.get<std::string>();
}

std::vector<std::size_t> get_size_array(const nlohmann::json& v,
                                        const std::string& origin) {
  if (!v.is_array()) fail(origin, "must be an array of integers");
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (const auto& item : v) out.push_back(get_size(item, origin));
  return out;
}

void parse_adapter(const nlohmann::json& sec, AdapterConfig& cfg,
                   const std::string& origin) {
  for (const auto& [key, value] : sec.items()) {
    const std::string at = origin + ": adapter." + key;
    if (key == "variant")
      cfg.variant = variant_from_string(get_string(value, at), at);
    else if (key == "d")
      cfg.d = get_size(value, at);
    else if (key == "c_a")
      cfg.c_a = get_size(value, at);
    else if (key == "n_fft")
      cfg.n_fft = get_size(value, at);
    else if (key == "hop")
      cfg.hop = get_size(value, at);
    else if (key == "window_scales")
      cfg.window_scales = get_size_array(value, at);
    else if (key == "activation")
      cfg.activation = activation_from_string(get_string(value, at), at);
    else if (key == "placement")
      cfg.placement = placement_from_string(get_string(value, at), at);
    else if (key == "fusion")
      cfg.fusion = fusion_from_string(get_string(value, at), at);
    else
      fail(origin, "unknown key \"adapter." + key + "\"");
  }
}

void parse_train(const nlohmann::json& sec, TrainConfig& cfg,
                 const std::string& origin) {
  for (const auto& [key, value] : sec.items()) {
    const std::string at = origin + ": train." + key;
    if (key == "pooled_baseline")
      cfg.pooled_baseline = get_bool(value, at);
    else if (key == "epochs")
      cfg.epochs = get_size(value, at);
    else if (key == "batch_size")
      cfg.batch_size = get_size(value, at);
    else if (key == "base_lr")
      cfg.base_lr = get_double(value, at);
    else if (key == "weight_decay")
      cfg.weight_decay = get_double(value, at);
    else if (key == "warmup_epochs")
      cfg.warmup_epochs = get_double(value, at);
    else if (key == "seed")
      cfg.seed = get_u64(value, at);
    else if (key == "tap_point")
      cfg.tap_point = tap_from_string(get_string(value, at), at);
    else
      fail(origin, "unknown key \"train." + key + "\"");
  }
}

void parse_synth(const nlohmann::json& sec, SynthConfig& cfg,
                 const std::string& origin) {
  for (const auto& [key, value] : sec.items()) {
    const std::string at = origin + ": synth." + key;
    if (key == "classes")
      cfg.classes = get_size(value, at);
    else if (key == "class_bins")
      cfg.class_bins = get_size_array(value, at);
    else if (key == "t")
      cfg.t = get_size(value, at);
    else if (key == "n")
      cfg.n = get_size(value, at);
    else if (key == "d")
      cfg.d = get_size(value, at);
    else if (key == "amplitude")
      cfg.amplitude = get_double(value, at);
    else if (key == "noise_std")
      cfg.noise_std = get_double(value, at);
    else if (key == "clips_per_class")
      cfg.clips_per_class = get_size(value, at);
    else if (key == "seed")
      cfg.seed = get_u64(value, at);
    else
      fail(origin, "unknown key \"synth." + key + "\"");
  }
}

void parse_analysis(const nlohmann::json& sec, AnalysisConfig& cfg,
                    const std::string& origin) {
  for (const auto& [key, value] : sec.items()) {
    const std::string at = origin + ": analysis." + key;
    if (key == "pool")
      cfg.pool = pool_from_string(get_string(value, at), at);
    else if (key == "fps") {
      cfg.fps = get_double(value, at);
      if (cfg.fps < 0.0) fail(at, "must be non-negative");
    } else
      fail(origin, "unknown key \"analysis." + key + "\"");
  }
}

}  // namespace

std::string to_string(AdapterVariant v) {
  switch (v) {
    case AdapterVariant::St:
      return "st";
    case AdapterVariant::Ms:
      return "ms";
    case AdapterVariant::BaselineTemporal:
      return "baseline_temporal";
  }
  return "ms";
}

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "gelu";
}

std::string to_string(Placement p) {
  switch (p) {
    case Placement::BeforeAttention:
      return "before_attention";
    case Placement::AfterAttention:
      return "after_attention";
    case Placement::Both:
      return "both";
  }
  return "after_attention";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::MeanConcat:
      return "mean_concat";
    case Fusion::Gated:
      return "gated";
    case Fusion::Learnable:
      return "learnable";
  }
  return "mean_concat";
}

std::string to_string(TokenPool p) {
  return p == TokenPool::Cls ? "cls" : "mean";
}

std::string to_string(TapPoint t) {
  return t == TapPoint::PreAdapter ? "pre_adapter" : "post_adapter";
}

AdapterVariant variant_from_string(const std::string& s,
                                   const std::string& origin) {
  if (s == "st") return AdapterVariant::St;
  if (s == "ms") return AdapterVariant::Ms;
  if (s == "baseline_temporal") return AdapterVariant::BaselineTemporal;
  bad_enum(origin, s, "st, ms, baseline_temporal");
}

Activation activation_from_string(const std::string& s,
                                  const std::string& origin) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  bad_enum(origin, s, "gelu, relu");
}

Placement placement_from_string(const std::string& s,
                                const std::string& origin) {
  if (s == "before_attention") return Placement::BeforeAttention;
  if (s == "after_attention") return Placement::AfterAttention;
  if (s == "both") return Placement::Both;
  bad_enum(origin, s, "before_attention, after_attention, both");
}

Fusion fusion_from_string(const std::string& s, const std::string& origin) {
  if (s == "mean_concat") return Fusion::MeanConcat;
  if (s == "gated") return Fusion::Gated;
  if (s == "learnable") return Fusion::Learnable;
  bad_enum(origin, s, "mean_concat, gated, learnable");
}

TokenPool pool_from_string(const std::string& s, const std::string& origin) {
  if (s == "mean") return TokenPool::Mean;
  if (s == "cls") return TokenPool::Cls;
  bad_enum(origin, s, "mean, cls");
}

TapPoint tap_from_string(const std::string& s, const std::string& origin) {
  if (s == "pre_adapter") return TapPoint::PreAdapter;
  if (s == "post_adapter") return TapPoint::PostAdapter;
  bad_enum(origin, s, "pre_adapter, post_adapter");
}

RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::string& origin) {
  if (!doc.is_object()) fail(origin, "top level must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_object())
      fail(origin, "section \"" + key + "\" must be an object");
    if (key == "adapter")
      parse_adapter(value, cfg.adapter, origin);
    else if (key == "train")
      parse_train(value, cfg.train, origin);
    else if (key == "synth")
      parse_synth(value, cfg.synth, origin);
    else if (key == "analysis")
      parse_analysis(value, cfg.analysis, origin);
    else
      fail(origin, "unknown key \"" + key + "\"");
  }
  cfg.train.adapter = cfg.adapter;
  return cfg;
}

RunConfig load_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_run_config(doc, path);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["adapter"] = {
      {"variant", to_string(cfg.adapter.variant)},
      {"d", cfg.adapter.d},
      {"c_a", cfg.adapter.c_a},
      {"n_fft", cfg.adapter.n_fft},
      {"hop", cfg.adapter.hop},
      {"window_scales", cfg.adapter.window_scales},
      {"activation", to_string(cfg.adapter.activation)},
      {"placement", to_string(cfg.adapter.placement)},
      {"fusion", to_string(cfg.adapter.fusion)},
  };
  j["train"] = {
      {"pooled_baseline", cfg.train.pooled_baseline},
      {"epochs", cfg.train.epochs},
      {"batch_size", cfg.train.batch_size},
      {"base_lr", cfg.train.base_lr},
      {"weight_decay", cfg.train.weight_decay},
      {"warmup_epochs", cfg.train.warmup_epochs},
      {"seed", cfg.train.seed},
      {"tap_point", to_string(cfg.train.tap_point)},
  };
  j["synth"] = {
      {"classes", cfg.synth.classes},
      {"class_bins", cfg.synth.class_bins},
      {"t", cfg.synth.t},
      {"n", cfg.synth.n},
      {"d", cfg.synth.d},
      {"amplitude", cfg.synth.amplitude},
      {"noise_std", cfg.synth.noise_std},
      {"clips_per_class", cfg.synth.clips_per_class},
      {"seed", cfg.synth.seed},
  };
  j["analysis"] = {
      {"pool", to_string(cfg.analysis.pool)},
      {"fps", cfg.analysis.fps},
  };
  return j;
}

}  // namespace f2f
