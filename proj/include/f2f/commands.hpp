#pragma once

#include <string>

#include <json.hpp>

namespace f2f {

// Command bodies behind the CLI. Each returns the JSON document the CLI
// prints to stdout on success and reports failure through the typed errors
// in errors.hpp; the CLI maps those to exit codes. Commands are pure
// functions of their arguments plus the named files, so rerunning one with
// identical inputs rewrites identical bytes.

struct SynthArgs {
  std::string config_path;  // empty: built-in defaults
  std::string out_dir;
};

// Generates the synthetic dataset and writes {train,val,test}.f2ft,
// labels_*.csv, and manifest.json under out_dir.
nlohmann::json run_cmd_synth(const SynthArgs& args);

struct TrainArgs {
  std::string config_path;
  std::string data_dir;
  std::string checkpoint_path;
  std::string report_path;
  long long epochs_override = -1;  // <0: keep the config value
};

// Trains on a saved dataset and writes the checkpoint and report files.
nlohmann::json run_cmd_train(const TrainArgs& args);

struct DiscriminabilityArgs {
  std::string embeddings_path;  // rank-3 [clips, T, D] or rank-4 tokens
  std::string labels_path;
  std::string out_csv;
  std::string pool = "mean";
  double fps = 0.0;
};

// Per-bin discriminability curve of saved embeddings; CSV plus a summary.
nlohmann::json run_cmd_discriminability(const DiscriminabilityArgs& args);

struct VideoSpectrumArgs {
  std::string volume_path;  // rank-3 [H, W, T]
  std::string out_path;     // .pgm for an image, anything else for F2FT
  bool whiten = false;
  bool remove_dc = false;
};

// Central temporal slice of the shifted 3D spectrum, log-compressed.
nlohmann::json run_cmd_video_spectrum(const VideoSpectrumArgs& args);

}  // namespace f2f
