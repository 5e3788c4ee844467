#pragma once

#include <string>

#include <json.hpp>

#include "f2f/adapters.hpp"
#include "f2f/analysis.hpp"
#include "f2f/harness.hpp"

namespace f2f {

// Settings consumed by the analysis commands rather than by training.
struct AnalysisConfig {
  TokenPool pool = TokenPool::Mean;
  double fps = 0.0;  // 0 keeps bin indices instead of hertz
};

// One JSON document drives every command. Top-level sections mirror the
// config structs they fill; anything absent keeps the struct default, and
// any key the schema does not know is an error naming "section.key".
struct RunConfig {
  AdapterConfig adapter;
  TrainConfig train;  // train.adapter is overwritten by the adapter section
  SynthConfig synth;
  AnalysisConfig analysis;
};

// Enum spellings used in config files and JSON output.
std::string to_string(AdapterVariant v);
std::string to_string(Activation a);
std::string to_string(Placement p);
std::string to_string(Fusion f);
std::string to_string(TokenPool p);
std::string to_string(TapPoint t);

AdapterVariant variant_from_string(const std::string& s,
                                   const std::string& origin);
Activation activation_from_string(const std::string& s,
                                  const std::string& origin);
Placement placement_from_string(const std::string& s,
                                const std::string& origin);
Fusion fusion_from_string(const std::string& s, const std::string& origin);
TokenPool pool_from_string(const std::string& s, const std::string& origin);
TapPoint tap_from_string(const std::string& s, const std::string& origin);

// Parses and schema-checks a document; origin prefixes every error message.
// Values are range-checked here only where no later validator would see
// them; adapter and synth settings are re-validated by their own modules
// before any computation runs.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::string& origin);

RunConfig load_run_config_file(const std::string& path);

nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace f2f
