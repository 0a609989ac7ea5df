#include "cli_args.hpp"

#include <CLI11.hpp>

#include <filesystem>

namespace gfe::cli {

namespace fs = std::filesystem;

std::string command_name(Command c) {
  switch (c) {
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::reconstruct: return "reconstruct";
    case Command::latents: return "latents";
    case Command::fixture_check: return "fixture-check";
  }
  return "?";
}

namespace {

struct Flags {
  std::string method, loss, optimizer;
  std::string seed, images, batch_size, threads;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* sub, RunSpec& spec, Flags& f, bool training) {
  sub->add_option("--config", spec.config_path, "key=value config file");
  sub->add_option("--data-dir", spec.data_dir, "directory with the IDX files (default: $GFE_DATA_DIR)");
  sub->add_option("--out", spec.out_dir, "output directory")->required();
  sub->add_option("--method", f.method, "training method")
      ->check(CLI::IsMember({"ae", "gfe_rk4_adjoint", "gfe_rk4_approx", "gfe_nesterov", "gfe_amd"}));
  sub->add_option("--seed", f.seed, "initialisation seed");
  sub->add_option("--images", f.images, "training image budget");
  sub->add_option("--batch-size", f.batch_size, "batch size");
  sub->add_option("--threads", f.threads, "worker threads");
  sub->add_option("--loss", f.loss, "reconstruction loss")->check(CLI::IsMember({"bce", "l2"}));
  sub->add_option("--optimizer", f.optimizer, "parameter optimizer")
      ->check(CLI::IsMember({"adam", "rmsprop"}));
  sub->add_option("--set", f.sets, "extra key=value assignment (repeatable)");
  if (!training) {
    sub->add_option("--checkpoint", spec.checkpoint, "trained model")->required();
    sub->add_option("--encoding", spec.encoding, "how samples are mapped to latents")
        ->check(CLI::IsMember({"default", "amd", "encoder"}));
    sub->add_option("--limit", spec.limit, "number of samples (0 = command default)");
  }
}

}  // namespace

RunSpec parse_args(int argc, const char* const* argv, const char* env_data_dir) {
  RunSpec spec;
  Flags f;
  CLI::App app{"Gradient-flow encoding: training, evaluation and artifact dumps"};
  app.require_subcommand(1);
  auto* train = app.add_subcommand("train", "train a model and write metrics and a checkpoint");
  auto* eval = app.add_subcommand("eval", "mean test loss of a checkpoint");
  auto* recon = app.add_subcommand("reconstruct", "write PGM reconstructions of test samples");
  auto* lat = app.add_subcommand("latents", "write the latent table of test samples");
  auto* check = app.add_subcommand("fixture-check", "run the built-in numerical checks");
  add_run_flags(train, spec, f, true);
  add_run_flags(eval, spec, f, false);
  add_run_flags(recon, spec, f, false);
  add_run_flags(lat, spec, f, false);
  check->add_option("--seed", spec.check_seed, "seed for the random fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) throw UsageError(app.help(), 0);
    throw UsageError(std::string(e.what()) + "\n" + app.help());
  }

  if (*train) spec.command = Command::train;
  else if (*eval) spec.command = Command::eval;
  else if (*recon) spec.command = Command::reconstruct;
  else if (*lat) spec.command = Command::latents;
  else spec.command = Command::fixture_check;

  if (spec.command == Command::fixture_check) return spec;

  if (spec.data_dir.empty() && env_data_dir && *env_data_dir) spec.data_dir = env_data_dir;
  if (spec.data_dir.empty()) throw UsageError("no dataset path: pass --data-dir or set GFE_DATA_DIR");

  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) spec.overrides.emplace_back(key, v);
  };
  put("method", f.method);
  put("seed", f.seed);
  put("images", f.images);
  put("batch_size", f.batch_size);
  put("threads", f.threads);
  put("loss", f.loss);
  put("optimizer", f.optimizer);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    spec.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return spec;
}

void validate_paths(const RunSpec& spec) {
  if (spec.command == Command::fixture_check) return;
  if (!fs::is_directory(spec.data_dir))
    throw UsageError("data directory '" + spec.data_dir + "' does not exist");
  if (!spec.config_path.empty() && !fs::is_regular_file(spec.config_path))
    throw UsageError("config file '" + spec.config_path + "' does not exist");
  if (!spec.checkpoint.empty() && !fs::is_regular_file(spec.checkpoint))
    throw UsageError("checkpoint '" + spec.checkpoint + "' does not exist");
  if (fs::exists(spec.out_dir) && !fs::is_directory(spec.out_dir))
    throw UsageError("output path '" + spec.out_dir + "' exists and is not a directory");
}

}  // namespace gfe::cli
