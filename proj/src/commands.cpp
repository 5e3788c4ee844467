#include "f2f/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "f2f/analysis.hpp"
#include "f2f/config_json.hpp"
#include "f2f/errors.hpp"
#include "f2f/harness.hpp"
#include "f2f/spectral.hpp"

namespace f2f {
namespace {

RunConfig load_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config_file(path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

nlohmann::json split_summary(const Dataset& split) {
  return {{"clips", split.labels.size()},
          {"shape", split.x.shape()}};
}

}  // namespace

nlohmann::json run_cmd_synth(const SynthArgs& args) {
  const RunConfig cfg = load_or_default(args.config_path);
  validate_synth_config(cfg.synth);
  const DataBundle data = synth_generate(cfg.synth);
  save_dataset(args.out_dir, data);

  nlohmann::json manifest;
  manifest["classes"] = cfg.synth.classes;
  manifest["class_bins"] = cfg.synth.class_bins;
  manifest["t"] = cfg.synth.t;
  manifest["n"] = cfg.synth.n;
  manifest["d"] = cfg.synth.d;
  manifest["amplitude"] = cfg.synth.amplitude;
  manifest["noise_std"] = cfg.synth.noise_std;
  manifest["clips_per_class"] = cfg.synth.clips_per_class;
  manifest["seed"] = cfg.synth.seed;
  manifest["splits"] = {{"train", split_summary(data.train)},
                        {"val", split_summary(data.val)},
                        {"test", split_summary(data.test)}};
  write_text_file(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

nlohmann::json run_cmd_train(const TrainArgs& args) {
  RunConfig cfg = load_or_default(args.config_path);
  if (args.epochs_override >= 0)
    cfg.train.epochs = static_cast<std::size_t>(args.epochs_override);

  const DataBundle data = load_dataset(args.data_dir);
  cfg.train.adapter = resolve_adapter_config(
      cfg.adapter, data.train.x.dim(1), data.train.x.dim(3));

  const TrainResult result = train(cfg.train, data);
  save_checkpoint(args.checkpoint_path, result.checkpoint);
  const std::string report = report_to_json(result.report);
  write_text_file(args.report_path, report + "\n");

  nlohmann::json out;
  out["checkpoint"] = args.checkpoint_path;
  out["report"] = args.report_path;
  out["epochs"] = cfg.train.epochs;
  out["final_test_accuracy"] = result.report.final_test_accuracy;
  out["trained_param_count"] = result.report.trained_param_count;
  out["pooled_baseline"] = cfg.train.pooled_baseline;
  return out;
}

nlohmann::json run_cmd_discriminability(const DiscriminabilityArgs& args) {
  const Tensor x = read_f2ft_real(args.embeddings_path);
  if (x.rank() != 3 && x.rank() != 4)
    throw DimensionError(args.embeddings_path +
                         ": embeddings must be rank 3 [clips, T, D] or rank "
                         "4 [clips, T, N, D], got rank " +
                         std::to_string(x.rank()));

  const std::vector<std::size_t> labels =
      read_labels_csv_file(args.labels_path);
  if (labels.size() != x.dim(0))
    throw DimensionError(args.labels_path + ": " +
                         std::to_string(labels.size()) + " labels for " +
                         std::to_string(x.dim(0)) + " clips");
  const std::set<std::size_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2)
    throw ConfigError(args.labels_path +
                      ": discriminability needs at least two classes, got " +
                      std::to_string(distinct.size()));

  const TokenPool pool = pool_from_string(args.pool, "--pool");
  if (args.fps < 0.0) throw ConfigError("--fps must be non-negative");

  const PowerSpectrumSet spectra = spectral_power(x, labels, pool, args.fps);
  const DiscriminabilityCurve curve = discriminability(spectra);
  write_curve_csv_file(args.out_csv, curve, spectra.frames, args.fps);

  const auto argmax =
      std::max_element(curve.d_normalized.begin(), curve.d_normalized.end());
  const std::size_t argmax_bin = static_cast<std::size_t>(
      argmax - curve.d_normalized.begin());

  nlohmann::json out;
  out["clips"] = spectra.clips();
  out["frames"] = spectra.frames;
  out["bins"] = curve.bins();
  out["classes"] = distinct.size();
  out["band_mass_mid"] = band_mass(curve, kMidBandFirst, kMidBandLast);
  out["argmax_bin"] = argmax_bin;
  if (args.fps > 0.0)
    out["argmax_hz"] = bin_to_hz(argmax_bin, spectra.frames, args.fps);
  out["degenerate_uniform"] = curve.degenerate_uniform;
  out["csv"] = args.out_csv;
  return out;
}

nlohmann::json run_cmd_video_spectrum(const VideoSpectrumArgs& args) {
  const Tensor volume = read_f2ft_real(args.volume_path);
  if (volume.rank() != 3)
    throw DimensionError(args.volume_path +
                         ": volume must be rank 3 [H, W, T], got rank " +
                         std::to_string(volume.rank()));

  SpectrumOptions opts;
  opts.whiten = args.whiten;
  opts.remove_dc = args.remove_dc;
  const SpectrumMap map = spectrum_map(volume, opts);

  const bool pgm = args.out_path.size() >= 4 &&
                   args.out_path.compare(args.out_path.size() - 4, 4,
                                         ".pgm") == 0;
  if (pgm)
    write_pgm(args.out_path, map);
  else
    write_f2ft_file(args.out_path, map.values);

  nlohmann::json out;
  out["height"] = map.height;
  out["width"] = map.width;
  out["frames"] = volume.dim(2);
  out["whitened"] = map.whitened;
  out["dc_removed"] = map.dc_removed;
  out["format"] = pgm ? "pgm" : "f2ft";
  out["out"] = args.out_path;
  return out;
}

}  // namespace f2f
