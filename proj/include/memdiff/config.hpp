#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memdiff/analog_net.hpp"
#include "memdiff/data.hpp"
#include "memdiff/device.hpp"
#include "memdiff/eval.hpp"
#include "memdiff/sde.hpp"
#include "memdiff/solver.hpp"
#include "memdiff/training.hpp"

namespace memdiff {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { kRing, kLetters };
enum class DataSource { kEmnist, kSynthetic };

// Every random choice draws from one of these. Unset entries in a config file
// are derived from master when the config is resolved; the saved config
// always lists all of them.
struct Seeds {
  std::uint64_t master = 20240501;
  std::uint64_t embedding = 0;
  std::uint64_t dataset = 0;
  std::uint64_t training = 0;
  std::uint64_t vae = 0;
  std::uint64_t ground_truth = 0;
  std::uint64_t deploy = 0;
  std::uint64_t sampling = 0;
  std::uint64_t sweep = 0;
};

struct SweepConfig {
  std::vector<double> write_sigmas = {0.0, 0.005, 0.01, 0.02, 0.04};
  std::vector<double> read_sigmas = {0.0, 0.01, 0.02, 0.05, 0.1};
  std::vector<SolverMode> modes = {SolverMode::kOde, SolverMode::kSde};
  std::size_t repeats = 5;
  std::size_t samples = 1000;
};

struct LettersConfig {
  DataSource source = DataSource::kEmnist;
  std::size_t per_class = 2000;  // cap for EMNIST, count for synthetic glyphs
  double gamma = 0.5;
  double center_radius = 1.0;
  TrainConfig vae_training;
  std::size_t images_per_class = 8;  // decoded images written by sample
  // The score net sees each latent code this many times, perturbed by N(0, code_jitter^2).
  std::size_t code_copies = 10;
  double code_jitter = 0.1;
};

struct RunConfig {
  Experiment experiment = Experiment::kRing;
  DeviceConfig device;
  VPSchedule schedule;
  SolverConfig solver;
  TrainConfig training;
  GuidanceConfig guidance;
  KlConfig kl;
  DeployOptions deploy;
  Seeds seeds;
  std::string output_dir = "runs/ring";

  RingSpec ring;
  std::size_t ground_truth_samples = 100000;
  std::size_t sample_count = 1000;
  std::vector<double> snapshot_times = {0.0, 0.25, 0.5, 0.75, 1.0};  // lab time, s
  std::size_t trajectories = 8;  // per-sample trajectory CSVs written by sample
  LettersConfig letters;
  SweepConfig sweep;

  void validate() const;
};

const char* to_string(Experiment e);
const char* to_string(DataSource s);
Experiment parse_experiment(const std::string& s);
DataSource parse_data_source(const std::string& s);

// Defaults for an experiment with every seed resolved from the master seed.
RunConfig default_config(Experiment e);
// Fills seeds that are still zero from seeds.master.
void resolve_seeds(Seeds& s);

nlohmann::json to_json(const RunConfig& c);
// Strict: unknown keys are a ConfigError. Missing keys keep the experiment
// defaults; missing seeds are derived from master.
RunConfig run_config_from_json(const nlohmann::json& j);

// Applies "a.b.c=value" to a JSON tree. The value is parsed as JSON when it
// parses, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Loads an optional config file and applies overrides in order.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

// nlohmann adapters for the component configs (also used by model files).
void to_json(nlohmann::json& j, const DeviceConfig& c);
void from_json(const nlohmann::json& j, DeviceConfig& c);
void to_json(nlohmann::json& j, const VPSchedule& c);
void from_json(const nlohmann::json& j, VPSchedule& c);
void to_json(nlohmann::json& j, const ClampConfig& c);
void from_json(const nlohmann::json& j, ClampConfig& c);

}  // namespace memdiff
