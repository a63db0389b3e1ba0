// memdiff: train, deploy, sample, sweep and evaluate the analog diffusion models.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memdiff/config.hpp"
#include "memdiff/data.hpp"
#include "memdiff/device.hpp"
#include "memdiff/experiments.hpp"
#include "memdiff/solver.hpp"
#include "memdiff/training.hpp"

namespace fs = std::filesystem;
using namespace memdiff;

namespace {

enum ExitCode { kOk = 0, kUserError = 1, kNumericalFailure = 2 };

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string experiment;
  std::string out;
  std::string models;
  bool synthetic = false;
  std::string mode;
};

void add_common(CLI::App* cmd, Common& c, bool with_models) {
  cmd->add_option("--config", c.config, "RunConfig JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override a config entry, e.g. --set training.steps=2000")->take_all();
  cmd->add_option("--experiment", c.experiment, "ring or letters")->check(CLI::IsMember({"ring", "letters"}));
  cmd->add_option("--out", c.out, "Artifact directory");
  cmd->add_flag("--synthetic", c.synthetic, "Use generated glyphs instead of EMNIST");
  cmd->add_option("--mode", c.mode, "Sampler mode (ode or sde)")->check(CLI::IsMember({"ode", "sde"}));
  if (with_models) cmd->add_option("--models", c.models, "Directory written by train (default: output_dir)");
}

RunConfig resolve(const Common& c) {
  std::vector<std::string> sets;
  if (!c.experiment.empty()) sets.push_back("experiment=\"" + c.experiment + "\"");
  if (c.synthetic) sets.push_back("letters.source=\"synthetic\"");
  if (!c.mode.empty()) sets.push_back("solver.mode=\"" + c.mode + "\"");
  sets.insert(sets.end(), c.sets.begin(), c.sets.end());
  std::optional<fs::path> file;
  if (!c.config.empty()) file = c.config;
  return load_config(file, sets);
}

fs::path model_dir(const Common& c, const RunConfig& cfg) { return c.models.empty() ? fs::path(cfg.output_dir) : fs::path(c.models); }

fs::path out_dir(const Common& c, const RunConfig& cfg, const char* sub) {
  return c.out.empty() ? fs::path(cfg.output_dir) / sub : fs::path(c.out);
}

int parse_label(const std::string& s) {
  if (s == "H" || s == "h" || s == "0") return 0;
  if (s == "K" || s == "k" || s == "1") return 1;
  if (s == "U" || s == "u" || s == "2") return 2;
  throw ConfigError("unknown label '" + s + "' (expected H, K or U)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analog diffusion on simulated resistive-memory crossbars"};
  app.require_subcommand(1);

  Common train_opts, sample_opts, sweep_opts, eval_opts, export_opts;
  auto* train = app.add_subcommand("train", "Train the score network (and the VAE for letters)");
  add_common(train, train_opts, false);

  auto* sample = app.add_subcommand("sample", "Deploy and generate samples");
  add_common(sample, sample_opts, true);
  bool digital = false;
  std::size_t count = 0;
  std::string label;
  std::vector<double> init;
  sample->add_flag("--digital", digital, "Use the floating-point network instead of the crossbars");
  sample->add_option("--count", count, "Samples (per class for letters)");
  sample->add_option("--label", label, "Letters: sample one class (H, K or U)");
  sample->add_option("--init", init, "Shared initial point in software units, e.g. --init -0.25 -0.5")->expected(2);

  auto* sweep = app.add_subcommand("sweep", "Write/read noise sweep of the ring model");
  add_common(sweep, sweep_opts, true);

  auto* eval = app.add_subcommand("eval", "Metrics for a samples CSV");
  add_common(eval, eval_opts, true);
  std::string samples_csv;
  eval->add_option("--samples", samples_csv, "CSV written by sample")->required()->check(CLI::ExistingFile);

  auto* exporter = app.add_subcommand("deploy-export", "Program the crossbars and export conductances");
  add_common(exporter, export_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUserError;
  }

  std::optional<fs::path> data_dir;
  if (const char* d = std::getenv("MEMDIFF_DATA_DIR"); d && *d) data_dir = fs::path(d);

  try {
    if (train->parsed()) {
      const RunConfig cfg = resolve(train_opts);
      const fs::path out = train_opts.out.empty() ? fs::path(cfg.output_dir) : fs::path(train_opts.out);
      cmd_train(cfg, out, data_dir);
      std::cout << "models written to " << out.string() << '\n';
    } else if (sample->parsed()) {
      const RunConfig cfg = resolve(sample_opts);
      SampleOptions opts;
      opts.digital = digital;
      opts.count = count;
      if (!label.empty()) opts.label = parse_label(label);
      if (!init.empty()) opts.x_init = init;
      const fs::path out = out_dir(sample_opts, cfg, digital ? "sample_digital" : "sample");
      const auto metrics = cmd_sample(cfg, model_dir(sample_opts, cfg), out, opts);
      std::cout << metrics.dump(2) << '\n';
    } else if (sweep->parsed()) {
      const RunConfig cfg = resolve(sweep_opts);
      const fs::path out = out_dir(sweep_opts, cfg, "sweep");
      const auto grid = cmd_sweep(cfg, model_dir(sweep_opts, cfg), out);
      std::cout << "sweep written to " << out.string() << '\n';
      if (!grid.failures.empty()) std::cerr << grid.failures.size() << " sweep cells failed (see failures.json)\n";
    } else if (eval->parsed()) {
      const RunConfig cfg = resolve(eval_opts);
      std::optional<fs::path> models;
      if (cfg.experiment == Experiment::kLetters) models = model_dir(eval_opts, cfg);
      const auto metrics = cmd_eval(cfg, samples_csv, models, out_dir(eval_opts, cfg, "eval"));
      std::cout << metrics.dump(2) << '\n';
    } else if (exporter->parsed()) {
      const RunConfig cfg = resolve(export_opts);
      const fs::path out = out_dir(export_opts, cfg, "deployed");
      cmd_deploy_export(cfg, model_dir(export_opts, cfg), out);
      std::cout << "deployment written to " << out.string() << '\n';
    }
  } catch (const DivergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const BatchFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    for (const auto& [i, msg] : e.failures()) std::cerr << "  sample " << i << ": " << msg << '\n';
    return kNumericalFailure;
  } catch (const TrainingDivergence& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const ProgrammingFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  }
  return kOk;
}
