#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memdiff/analog_net.hpp"
#include "memdiff/config.hpp"
#include "memdiff/data.hpp"
#include "memdiff/digital_mlp.hpp"
#include "memdiff/eval.hpp"
#include "memdiff/latent.hpp"
#include "memdiff/solver.hpp"

namespace memdiff {

inline constexpr std::size_t kLetterClasses = 3;
inline constexpr const char* kLetterNames[] = {"H", "K", "U"};

// Trained networks of one experiment. The VAE parts are empty for the ring.
struct ModelBundle {
  Experiment experiment = Experiment::kRing;
  DigitalMLP score;
  std::optional<VaeEncoder> encoder;
  std::optional<VaeDecoder> decoder;
  LatentSpec latent;
  std::vector<Vec> class_means;  // 12x12 images, letters only
  std::vector<Vec> codes;        // encoder means of the training images, letters only
  std::vector<int> code_labels;
  std::vector<double> score_loss;
  std::vector<double> vae_loss;
};

// ---- data ----

std::vector<Vec> ring_training_data(const RunConfig& cfg);
std::vector<Vec> ring_ground_truth(const RunConfig& cfg);
// EMNIST from data_dir, or synthetic glyphs, as chosen by cfg.letters.source.
ImageDataset letters_dataset(const RunConfig& cfg, const std::optional<std::filesystem::path>& data_dir);

// ---- training ----

ModelBundle train_ring(const RunConfig& cfg);
ModelBundle train_letters(const RunConfig& cfg, const ImageDataset& data);

void save_models(const std::filesystem::path& dir, const ModelBundle& models);
ModelBundle load_models(const std::filesystem::path& dir);

// ---- sampling ----

struct SampleOptions {
  bool digital = false;
  std::size_t count = 0;  // per class for letters; 0 means cfg.sample_count
  std::optional<int> label;  // letters: sample only this class
  std::optional<Vec> x_init;  // shared initial point, software units
};

struct SampleOutput {
  std::vector<Vec> points;  // endpoints (latent points for letters)
  std::vector<int> labels;  // -1 when unconditional
  std::vector<Trajectory> trajectories;  // first cfg.trajectories samples of each batch
  std::vector<std::vector<Vec>> snapshots;  // [snapshot][sample]
  std::vector<double> snapshot_times;  // recorded lab times nearest to cfg.snapshot_times
  std::vector<Vec> images;  // decoded images, letters only
  std::vector<int> image_class;  // nearest class-mean prediction per image
  std::uint64_t saturations = 0;  // analog clamp engagements
};

// Deploys (unless digital), samples and decodes. Deployment uses
// cfg.seeds.deploy, sample i of class c uses stream (seeds.sampling, c, i).
SampleOutput run_sample(const RunConfig& cfg, const ModelBundle& models, const SampleOptions& opts);

AnalogMLP deploy_score(const RunConfig& cfg, const ModelBundle& models);
AnalogDecoder deploy_vae_decoder(const RunConfig& cfg, const ModelBundle& models);

// ---- metrics ----

// KL of the generated ring against a fresh ground-truth draw, and the
// reference KL of the initial Gaussian.
nlohmann::json ring_metrics(const RunConfig& cfg, std::span<const Vec> points);
// Latent nearest-center accuracy, decoded-image accuracy, per-class figures
// and per-class latent KL against the encoded training set.
nlohmann::json letters_metrics(const RunConfig& cfg, const ModelBundle& models, const SampleOutput& out);

// ---- sweep ----

NoiseSweepGrid run_sweep(const RunConfig& cfg, const ModelBundle& models);

// ---- commands (write artifacts plus config.json into out_dir) ----

void cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir,
               const std::optional<std::filesystem::path>& data_dir);
nlohmann::json cmd_sample(const RunConfig& cfg, const std::filesystem::path& model_dir,
                          const std::filesystem::path& out_dir, const SampleOptions& opts);
NoiseSweepGrid cmd_sweep(const RunConfig& cfg, const std::filesystem::path& model_dir,
                         const std::filesystem::path& out_dir);
// Metrics for a samples CSV; model_dir is needed for letters.
nlohmann::json cmd_eval(const RunConfig& cfg, const std::filesystem::path& samples_csv,
                        const std::optional<std::filesystem::path>& model_dir, const std::filesystem::path& out_dir);
void cmd_deploy_export(const RunConfig& cfg, const std::filesystem::path& model_dir,
                       const std::filesystem::path& out_dir);

}  // namespace memdiff
