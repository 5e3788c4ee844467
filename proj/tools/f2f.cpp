#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "f2f/commands.hpp"
#include "f2f/errors.hpp"
#include "f2f/verify.hpp"

namespace {

void emit(const nlohmann::json& doc) { std::cout << doc.dump(2) << "\n"; }

int code(f2f::ExitStatus s) { return static_cast<int>(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frequency-aware temporal adapter toolkit"};
  app.require_subcommand(1);

  f2f::SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate the synthetic frequency-coded dataset");
  synth->add_option("--config", synth_args.config_path,
                    "run config JSON (defaults apply when omitted)");
  synth->add_option("--out", synth_args.out_dir, "output dataset directory")
      ->required();

  f2f::TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "train adapter and head on a saved dataset");
  train->add_option("--config", train_args.config_path, "run config JSON");
  train->add_option("--data", train_args.data_dir, "dataset directory")
      ->required();
  train->add_option("--out", train_args.checkpoint_path,
                    "checkpoint output path (.f2fc)")
      ->required();
  train->add_option("--report", train_args.report_path,
                    "training report output path (.json)")
      ->required();
  train->add_option("--epochs", train_args.epochs_override,
                    "override the configured epoch count");

  f2f::DiscriminabilityArgs disc_args;
  CLI::App* disc = app.add_subcommand(
      "discriminability",
      "per-bin class separability of saved embeddings");
  disc->add_option("--embeddings", disc_args.embeddings_path,
                   "F2FT tensor, rank 3 [clips, T, D] or rank 4 with tokens")
      ->required();
  disc->add_option("--labels", disc_args.labels_path, "labels CSV")
      ->required();
  disc->add_option("--out", disc_args.out_csv, "curve CSV output path")
      ->required();
  disc->add_option("--pool", disc_args.pool, "token pooling: mean or cls");
  disc->add_option("--fps", disc_args.fps,
                   "frame rate for the hertz column (0 keeps bins)");

  f2f::VideoSpectrumArgs vol_args;
  CLI::App* vol = app.add_subcommand(
      "video-spectrum", "central temporal slice of a 3D volume spectrum");
  vol->add_option("--volume", vol_args.volume_path,
                  "F2FT tensor, rank 3 [H, W, T]")
      ->required();
  vol->add_option("--out", vol_args.out_path,
                  "output path (.pgm image, otherwise F2FT)")
      ->required();
  vol->add_flag("--whiten", vol_args.whiten,
                "divide magnitudes by radial frequency distance");
  vol->add_flag("--remove-dc", vol_args.remove_dc,
                "zero the DC bin before compression");

  std::string suite = "all";
  bool inject_fault = false;
  CLI::App* verify = app.add_subcommand(
      "verify", "run the property and experiment checks");
  verify->add_option("--suite", suite,
                     "one of: all, fft, stft, grad, anova, e2e");
  verify->add_flag("--inject-grad-fault", inject_fault,
                   "poison one analytic gradient; the grad suite must fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int cli_code = app.exit(e);
    return cli_code == 0 ? 0 : code(f2f::ExitStatus::ConfigError);
  }

  try {
    if (synth->parsed()) {
      emit(f2f::run_cmd_synth(synth_args));
    } else if (train->parsed()) {
      const nlohmann::json out = f2f::run_cmd_train(train_args);
      std::cerr << "final test accuracy "
                << out["final_test_accuracy"].get<double>() << "\n";
      emit(out);
    } else if (disc->parsed()) {
      emit(f2f::run_cmd_discriminability(disc_args));
    } else if (vol->parsed()) {
      emit(f2f::run_cmd_video_spectrum(vol_args));
    } else if (verify->parsed()) {
      f2f::VerifyOptions opts;
      opts.log = &std::cerr;
      if (inject_fault) opts.grad_fault = 1e-2;
      const auto results = f2f::run_suite(suite, opts);
      emit(f2f::results_to_json(suite, results));
      if (!f2f::all_passed(results))
        return code(f2f::ExitStatus::VerifyFailed);
    }
  } catch (const f2f::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(f2f::ExitStatus::ConfigError);
  } catch (const f2f::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(f2f::ExitStatus::ConfigError);
  } catch (const f2f::IoError& e) {  // FormatError included
    std::cerr << "error: " << e.what() << "\n";
    return code(f2f::ExitStatus::IoError);
  } catch (const f2f::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(f2f::ExitStatus::Divergence);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(f2f::ExitStatus::ConfigError);
  }
  return code(f2f::ExitStatus::Ok);
}
