#include "memdiff/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>

#include "memdiff/io.hpp"
#include "memdiff/rng.hpp"
#include "memdiff/training.hpp"

namespace memdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Extra stream ids below the per-config named seeds.
constexpr std::uint64_t kDecoderDeploy = 0xdec0;
constexpr std::uint64_t kDecoderRead = 0xdec1;

ClampRange software_clamp(const RunConfig& cfg) { return cfg.deploy.clamp.in_units(cfg.deploy.unit_volt); }

DigitalMLP fresh_score_net(const RunConfig& cfg, std::optional<std::size_t> classes) {
  DigitalMLP net =
      make_score_net(cfg.seeds.embedding, classes, software_clamp(cfg), OutputScaling::kInvSigma, cfg.schedule);
  Rng init = make_rng(cfg.seeds.training, {stream::kTrainInit});
  net.init_random(init);
  return net;
}

void write_config(const fs::path& dir, const RunConfig& cfg) { write_json_file(dir / "config.json", to_json(cfg)); }

std::vector<double> index_axis(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  return x;
}

void write_loss(const fs::path& dir, const std::string& stem, const std::vector<double>& loss) {
  write_series_csv(dir / (stem + ".csv"), "loss", loss);
  const std::size_t window = std::min<std::size_t>(100, std::max<std::size_t>(1, loss.size()));
  const auto sm = smooth(loss, window);
  std::vector<SvgSeries> series{{"loss", index_axis(loss.size()), loss}, {"moving average", index_axis(sm.size()), sm}};
  write_line_svg(dir / (stem + ".svg"), stem, "step", "loss", series);
}

std::string snapshot_name(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_t%.3f", t);
  return buf;
}

}  // namespace

// ---- data ----

std::vector<Vec> ring_training_data(const RunConfig& cfg) {
  Rng rng = make_rng(cfg.seeds.dataset, {stream::kDataset});
  return ring_sampler(cfg.ring, rng);
}

std::vector<Vec> ring_ground_truth(const RunConfig& cfg) {
  RingSpec spec = cfg.ring;
  spec.n = cfg.ground_truth_samples;
  Rng rng = make_rng(cfg.seeds.ground_truth, {stream::kGroundTruth});
  return ring_sampler(spec, rng);
}

ImageDataset letters_dataset(const RunConfig& cfg, const std::optional<fs::path>& data_dir) {
  if (cfg.letters.source == DataSource::kSynthetic) {
    Rng rng = make_rng(cfg.seeds.dataset, {stream::kDataset});
    return synthetic_glyphs(kLetterClasses, cfg.letters.per_class, rng);
  }
  if (!data_dir)
    throw ConfigError(
        "the letters experiment needs EMNIST letters: set MEMDIFF_DATA_DIR to the directory holding "
        "emnist-letters-train-images-idx3-ubyte[.gz] and emnist-letters-train-labels-idx1-ubyte[.gz], "
        "or pass --synthetic to use generated glyphs");
  return select_letters(load_emnist(*data_dir), cfg.letters.per_class);
}

// ---- training ----

ModelBundle train_ring(const RunConfig& cfg) {
  cfg.validate();
  const auto data = ring_training_data(cfg);
  TrainConfig tc = cfg.training;
  tc.seed = cfg.seeds.training;
  auto res = train_score(fresh_score_net(cfg, std::nullopt), data, {}, cfg.schedule, tc);
  ModelBundle m;
  m.experiment = Experiment::kRing;
  m.score = std::move(res.net);
  m.score_loss = std::move(res.loss_curve);
  return m;
}

ModelBundle train_letters(const RunConfig& cfg, const ImageDataset& data) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("letters dataset is empty");
  ModelBundle m;
  m.experiment = Experiment::kLetters;
  m.latent = default_latent_spec(cfg.letters.center_radius);

  TrainConfig vt = cfg.letters.vae_training;
  vt.seed = cfg.seeds.vae;
  auto vae = train_vae(data.images, data.labels, cfg.letters.gamma, m.latent, vt, VaeShape{}, software_clamp(cfg));
  m.encoder = std::move(vae.encoder);
  m.decoder = std::move(vae.decoder);
  m.vae_loss = std::move(vae.loss_curve);

  m.codes.reserve(data.size());
  for (const Vec& img : data.images) m.codes.push_back(m.encoder->encode(img).mu);
  m.code_labels = data.labels;
  m.class_means = data.class_means(kLetterClasses);

  // Jittered copies of the codes smooth the tiny clusters the VAE produces.
  std::vector<Vec> train_codes;
  std::vector<int> train_labels;
  Rng jitter = make_rng(cfg.seeds.training, {stream::kCodeJitter});
  for (std::size_t r = 0; r < cfg.letters.code_copies; ++r)
    for (std::size_t i = 0; i < m.codes.size(); ++i) {
      Vec v = m.codes[i];
      for (double& x : v) x += cfg.letters.code_jitter * jitter.normal();
      train_codes.push_back(std::move(v));
      train_labels.push_back(m.code_labels[i]);
    }

  TrainConfig tc = cfg.training;
  tc.seed = cfg.seeds.training;
  auto res = train_score(fresh_score_net(cfg, kLetterClasses), train_codes, train_labels, cfg.schedule, tc);
  m.score = std::move(res.net);
  m.score_loss = std::move(res.loss_curve);
  return m;
}

void save_models(const fs::path& dir, const ModelBundle& m) {
  fs::create_directories(dir);
  json manifest{{"format_version", kModelFormatVersion},
                {"experiment", to_string(m.experiment)},
                {"score_net", "score_net.json"}};
  write_json_file(dir / "score_net.json", to_json(m.score));
  if (m.experiment == Experiment::kLetters) {
    if (!m.encoder || !m.decoder) throw std::invalid_argument("save_models: letters bundle without VAE");
    write_json_file(dir / "vae_encoder.json", to_json(*m.encoder));
    write_json_file(dir / "vae_decoder.json", to_json(*m.decoder));
    Matrix means(m.class_means.size(), kImagePixels);
    for (std::size_t c = 0; c < m.class_means.size(); ++c)
      std::copy(m.class_means[c].begin(), m.class_means[c].end(), means.row(c).begin());
    write_matrix_csv(dir / "class_means.csv", means);
    write_points_csv(dir / "latent_codes.csv", m.codes, m.code_labels);
    manifest["vae_encoder"] = "vae_encoder.json";
    manifest["vae_decoder"] = "vae_decoder.json";
    manifest["class_means"] = "class_means.csv";
    manifest["latent_codes"] = "latent_codes.csv";
    manifest["latent_centers"] = m.latent.centers;
  }
  write_json_file(dir / "models.json", manifest);
}

ModelBundle load_models(const fs::path& dir) {
  if (!fs::exists(dir / "models.json"))
    throw ConfigError("no trained models in " + dir.string() + " (run the train command first)");
  const json manifest = read_json_file(dir / "models.json");
  if (manifest.value("format_version", 0) != kModelFormatVersion)
    throw FormatError(dir.string() + "/models.json: unsupported format version");
  ModelBundle m;
  m.experiment = parse_experiment(manifest.at("experiment").get<std::string>());
  m.score = digital_mlp_from_json(read_json_file(dir / manifest.at("score_net").get<std::string>()));
  if (m.experiment == Experiment::kLetters) {
    m.encoder = vae_encoder_from_json(read_json_file(dir / manifest.at("vae_encoder").get<std::string>()));
    m.decoder = vae_decoder_from_json(read_json_file(dir / manifest.at("vae_decoder").get<std::string>()));
    const Matrix means = read_matrix_csv(dir / manifest.at("class_means").get<std::string>());
    for (std::size_t c = 0; c < means.rows(); ++c) m.class_means.emplace_back(means.row(c).begin(), means.row(c).end());
    auto codes = read_points_csv(dir / manifest.at("latent_codes").get<std::string>());
    m.codes = std::move(codes.points);
    m.code_labels = std::move(codes.labels);
    m.latent.dim = 2;
    m.latent.centers = manifest.at("latent_centers").get<std::vector<Vec>>();
    m.latent.validate();
  }
  return m;
}

// ---- sampling ----

AnalogMLP deploy_score(const RunConfig& cfg, const ModelBundle& models) {
  Rng rng = make_rng(cfg.seeds.deploy, {stream::kDeploy});
  return deploy(models.score, cfg.device, rng, cfg.deploy);
}

AnalogDecoder deploy_vae_decoder(const RunConfig& cfg, const ModelBundle& models) {
  if (!models.decoder) throw std::invalid_argument("deploy_vae_decoder: no decoder");
  Rng rng = make_rng(cfg.seeds.deploy, {kDecoderDeploy});
  return deploy_decoder(*models.decoder, cfg.device, rng, cfg.deploy);
}

SampleOutput run_sample(const RunConfig& cfg, const ModelBundle& models, const SampleOptions& opts) {
  cfg.validate();
  const bool letters = models.experiment == Experiment::kLetters;
  if (opts.label && !letters) throw ConfigError("labels apply to the letters experiment only");
  if (opts.label && (*opts.label < 0 || *opts.label >= static_cast<int>(kLetterClasses)))
    throw ConfigError("label must be one of H, K, U (0, 1, 2)");
  if (opts.x_init && opts.x_init->size() != models.score.in_dim())
    throw ConfigError("initial point must have " + std::to_string(models.score.in_dim()) + " coordinates");

  AnalogMLP analog;
  ScoreFn fn;
  auto saturations = std::make_shared<std::atomic<std::uint64_t>>(0);
  if (opts.digital) {
    fn = digital_score_fn(models.score);
  } else {
    analog = deploy_score(cfg, models);
    fn = analog_score_fn(analog, saturations);
  }

  std::vector<Label> batches;
  if (!letters) {
    batches.push_back(std::nullopt);
  } else if (opts.label) {
    batches.push_back(*opts.label);
  } else {
    for (std::size_t c = 0; c < kLetterClasses; ++c) batches.push_back(static_cast<int>(c));
  }

  SampleOutput out;
  out.snapshots.resize(cfg.snapshot_times.size());
  const std::size_t count = opts.count ? opts.count : cfg.sample_count;
  for (const Label& label : batches) {
    SolverConfig sc = cfg.solver;
    sc.seed = label ? derive_seed(cfg.seeds.sampling, {static_cast<std::uint64_t>(*label)}) : cfg.seeds.sampling;
    BatchRequest req;
    req.count = count;
    req.dim = models.score.in_dim();
    req.label = label;
    req.guidance = cfg.guidance;
    req.x_init = opts.x_init;
    auto trajs = batch_trajectories(fn, cfg.schedule, sc, req);

    if (out.snapshot_times.empty() && !trajs.empty()) {
      const auto& times = trajs.front().times;
      for (double want : cfg.snapshot_times) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < times.size(); ++k)
          if (std::abs(times[k] - want) < std::abs(times[best] - want)) best = k;
        out.snapshot_times.push_back(times[best]);
      }
    }
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      const auto& times = trajs[i].times;
      for (std::size_t s = 0; s < out.snapshot_times.size(); ++s) {
        const auto it = std::find(times.begin(), times.end(), out.snapshot_times[s]);
        out.snapshots[s].push_back(trajs[i].states[static_cast<std::size_t>(it - times.begin())]);
      }
      out.points.push_back(trajs[i].final);
      out.labels.push_back(label ? *label : -1);
    }
    trajs.resize(std::min(trajs.size(), cfg.trajectories));
    for (auto& t : trajs) out.trajectories.push_back(std::move(t));
  }
  out.saturations = saturations->load();

  if (letters) {
    if (!models.decoder) throw std::invalid_argument("run_sample: letters bundle without decoder");
    std::optional<AnalogDecoder> adec;
    if (!opts.digital) adec = deploy_vae_decoder(cfg, models);
    out.images.reserve(out.points.size());
    for (std::size_t i = 0; i < out.points.size(); ++i) {
      Vec img;
      if (adec) {
        Rng rng = make_rng(cfg.seeds.sampling, {kDecoderRead, static_cast<std::uint64_t>(out.labels[i]), i});
        img = decode_analog(*adec, out.points[i], rng);
      } else {
        img = models.decoder->decode(out.points[i]);
      }
      out.image_class.push_back(static_cast<int>(nearest_index(img, models.class_means)));
      out.images.push_back(std::move(img));
    }
  }
  return out;
}

// ---- metrics ----

json ring_metrics(const RunConfig& cfg, std::span<const Vec> points) {
  if (points.empty()) throw ConfigError("no samples to evaluate");
  const auto gt = ring_ground_truth(cfg);
  // The reverse process starts from exactly these N(0, I) draws.
  std::vector<Vec> initial;
  for (std::size_t i = 0; i < points.size(); ++i) {
    SolverConfig sc = cfg.solver;
    sc.seed = cfg.seeds.sampling;
    Rng rng = sample_stream(sc, i);
    initial.push_back(sample_initial(points.front().size(), rng));
  }
  const double kl = histogram_kl(gt, points, cfg.kl);
  const double kl0 = histogram_kl(gt, initial, cfg.kl);
  double radius = 0.0;
  for (const Vec& p : points) radius += std::hypot(p[0], p[1]);
  return json{{"experiment", "ring"},
              {"samples", points.size()},
              {"kl", kl},
              {"kl_initial_gaussian", kl0},
              {"kl_ratio_to_initial", kl / kl0},
              {"mean_radius", radius / static_cast<double>(points.size())}};
}

json letters_metrics(const RunConfig& cfg, const ModelBundle& models, const SampleOutput& out) {
  if (out.points.empty()) throw ConfigError("no samples to evaluate");
  json j{{"experiment", "letters"}, {"samples", out.points.size()}};
  j["latent_accuracy"] = nearest_center_accuracy(out.points, out.labels, models.latent.centers);
  std::size_t img_hits = 0;
  for (std::size_t i = 0; i < out.image_class.size(); ++i) img_hits += out.image_class[i] == out.labels[i];
  if (!out.image_class.empty()) j["image_accuracy"] = static_cast<double>(img_hits) / out.image_class.size();

  json per = json::object();
  for (std::size_t c = 0; c < kLetterClasses; ++c) {
    std::vector<Vec> pts, ref;
    std::vector<int> lab;
    std::size_t hits = 0, n = 0;
    for (std::size_t i = 0; i < out.points.size(); ++i)
      if (out.labels[i] == static_cast<int>(c)) {
        pts.push_back(out.points[i]);
        lab.push_back(out.labels[i]);
        if (!out.image_class.empty()) hits += out.image_class[i] == out.labels[i];
        ++n;
      }
    for (std::size_t i = 0; i < models.codes.size(); ++i)
      if (models.code_labels[i] == static_cast<int>(c)) ref.push_back(models.codes[i]);
    if (pts.empty()) continue;
    json e{{"samples", n}, {"latent_accuracy", nearest_center_accuracy(pts, lab, models.latent.centers)}};
    if (!out.image_class.empty()) e["image_accuracy"] = static_cast<double>(hits) / n;
    if (!ref.empty()) e["latent_kl"] = histogram_kl(ref, pts, cfg.kl);
    per[kLetterNames[c]] = e;
  }
  j["per_class"] = per;
  return j;
}

// ---- sweep ----

NoiseSweepGrid run_sweep(const RunConfig& cfg, const ModelBundle& models) {
  cfg.validate();
  if (models.experiment != Experiment::kRing) throw ConfigError("the noise sweep is defined for the ring experiment");
  NoiseSweepTask task;
  task.net = &models.score;
  task.ground_truth = ring_ground_truth(cfg);
  task.schedule = cfg.schedule;
  task.solver = cfg.solver;
  task.samples = cfg.sweep.samples;
  task.kl = cfg.kl;
  task.device = cfg.device;
  task.deploy = cfg.deploy;
  task.seed = cfg.seeds.sweep;
  return noise_sweep(task, cfg.sweep.write_sigmas, cfg.sweep.read_sigmas, cfg.sweep.modes, cfg.sweep.repeats);
}

// ---- commands ----

void cmd_train(const RunConfig& cfg, const fs::path& out_dir, const std::optional<fs::path>& data_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  write_config(out_dir, cfg);
  ModelBundle m;
  if (cfg.experiment == Experiment::kRing) {
    m = train_ring(cfg);
  } else {
    const ImageDataset data = letters_dataset(cfg, data_dir);
    std::vector<Vec> rows = data.images;
    write_points_csv(out_dir / "dataset.csv", rows, data.labels);
    m = train_letters(cfg, data);
    write_loss(out_dir, "vae_loss", m.vae_loss);
    write_scatter_svg(out_dir / "latent_codes.svg", "encoded training set", m.codes, m.code_labels);
  }
  write_loss(out_dir, "score_loss", m.score_loss);
  save_models(out_dir, m);
}

json cmd_sample(const RunConfig& cfg, const fs::path& model_dir, const fs::path& out_dir, const SampleOptions& opts) {
  const ModelBundle models = load_models(model_dir);
  if (models.experiment != cfg.experiment)
    throw ConfigError(std::string("models in ") + model_dir.string() + " are for the " + to_string(models.experiment) +
                      " experiment");
  const SampleOutput out = run_sample(cfg, models, opts);
  fs::create_directories(out_dir);
  write_config(out_dir, cfg);
  json run{{"digital", opts.digital}, {"count", opts.count ? opts.count : cfg.sample_count}};
  if (opts.label) run["label"] = *opts.label;
  if (opts.x_init) run["x_init"] = *opts.x_init;
  write_json_file(out_dir / "sample_options.json", run);

  write_points_csv(out_dir / "samples.csv", out.points, out.labels);
  write_scatter_svg(out_dir / "samples.svg", "generated samples", out.points, out.labels);
  for (std::size_t i = 0; i < out.trajectories.size(); ++i)
    write_trajectory_csv(out_dir / ("trajectory_" + std::to_string(i) + ".csv"), out.trajectories[i]);
  for (std::size_t s = 0; s < out.snapshot_times.size(); ++s) {
    const std::string name = snapshot_name(out.snapshot_times[s]);
    write_points_csv(out_dir / (name + ".csv"), out.snapshots[s], out.labels);
    write_scatter_svg(out_dir / (name + ".svg"), name, out.snapshots[s], out.labels);
  }

  json metrics;
  if (models.experiment == Experiment::kRing) {
    metrics = ring_metrics(cfg, out.points);
  } else {
    metrics = letters_metrics(cfg, models, out);
    std::vector<std::size_t> written(kLetterClasses, 0);
    for (std::size_t i = 0; i < out.images.size(); ++i) {
      const int c = out.labels[i];
      if (written[c] >= cfg.letters.images_per_class) continue;
      const std::string stem = std::string("images/") + kLetterNames[c] + "_" + std::to_string(written[c]++);
      write_pgm(out_dir / (stem + ".pgm"), out.images[i], kImageSide);
      write_image_csv(out_dir / (stem + ".csv"), out.images[i], kImageSide);
    }
  }
  metrics["mode"] = to_string(cfg.solver.mode);
  metrics["digital"] = opts.digital;
  metrics["clamp_engagements"] = out.saturations;
  write_json_file(out_dir / "metrics.json", metrics);
  return metrics;
}

NoiseSweepGrid cmd_sweep(const RunConfig& cfg, const fs::path& model_dir, const fs::path& out_dir) {
  const ModelBundle models = load_models(model_dir);
  const NoiseSweepGrid grid = run_sweep(cfg, models);
  fs::create_directories(out_dir);
  write_config(out_dir, cfg);

  {
    auto csv = out_dir / "sweep.csv";
    std::FILE* f = std::fopen(csv.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + csv.string());
    std::fprintf(f, "write_sigma,read_sigma,mode,repeat,kl\n");
    for (std::size_t m = 0; m < grid.modes.size(); ++m)
      for (std::size_t w = 0; w < grid.write_sigmas.size(); ++w)
        for (std::size_t r = 0; r < grid.read_sigmas.size(); ++r)
          for (std::size_t k = 0; k < grid.repeats; ++k)
            std::fprintf(f, "%.17g,%.17g,%s,%zu,%.17g\n", grid.write_sigmas[w], grid.read_sigmas[r],
                         to_string(grid.modes[m]), k, grid.kl[m][w][r][k]);
    std::fclose(f);
  }

  for (std::size_t m = 0; m < grid.modes.size(); ++m) {
    const std::string mode = to_string(grid.modes[m]);
    Matrix mean(grid.write_sigmas.size(), grid.read_sigmas.size());
    for (std::size_t w = 0; w < grid.write_sigmas.size(); ++w)
      for (std::size_t r = 0; r < grid.read_sigmas.size(); ++r) mean(w, r) = grid.mean_kl(m, w, r);
    write_matrix_csv(out_dir / ("mean_kl_" + mode + ".csv"), mean);
    write_heatmap_svg(out_dir / ("heatmap_" + mode + ".svg"), "mean KL (" + mode + ")", mean, grid.write_sigmas,
                      grid.read_sigmas, "write sigma", "read sigma");
  }
  std::vector<SvgSeries> read_lines, write_lines;
  for (std::size_t m = 0; m < grid.modes.size(); ++m) {
    SvgSeries rs{std::string(to_string(grid.modes[m])), grid.read_sigmas, {}};
    for (std::size_t r = 0; r < grid.read_sigmas.size(); ++r) rs.y.push_back(grid.mean_kl(m, 0, r));
    read_lines.push_back(std::move(rs));
    SvgSeries ws{std::string(to_string(grid.modes[m])), grid.write_sigmas, {}};
    for (std::size_t w = 0; w < grid.write_sigmas.size(); ++w) ws.y.push_back(grid.mean_kl(m, w, 0));
    write_lines.push_back(std::move(ws));
  }
  write_line_svg(out_dir / "kl_vs_read.svg", "KL vs read noise", "read sigma / g_fixed", "KL", read_lines);
  write_line_svg(out_dir / "kl_vs_write.svg", "KL vs write noise", "write sigma / (g_max - g_min)", "KL", write_lines);

  if (!grid.failures.empty()) {
    json f = grid.failures;
    write_json_file(out_dir / "failures.json", f);
    for (const auto& msg : grid.failures) std::cerr << "warning: sweep cell failed: " << msg << '\n';
  }
  return grid;
}

json cmd_eval(const RunConfig& cfg, const fs::path& samples_csv, const std::optional<fs::path>& model_dir,
              const fs::path& out_dir) {
  const PointTable table = read_points_csv(samples_csv);
  if (table.points.empty()) throw FormatError(samples_csv.string() + ": no samples");
  json metrics;
  if (cfg.experiment == Experiment::kRing) {
    metrics = ring_metrics(cfg, table.points);
  } else {
    if (!model_dir) throw ConfigError("letters evaluation needs the trained model directory");
    const ModelBundle models = load_models(*model_dir);
    SampleOutput out;
    out.points = table.points;
    out.labels = table.labels;
    for (int l : out.labels)
      if (l < 0 || l >= static_cast<int>(kLetterClasses))
        throw FormatError(samples_csv.string() + ": letters samples need labels 0, 1 or 2");
    for (const Vec& z : out.points) {
      if (z.size() != models.latent.dim) throw FormatError(samples_csv.string() + ": expected 2-D latent points");
      out.image_class.push_back(static_cast<int>(nearest_index(models.decoder->decode(z), models.class_means)));
    }
    metrics = letters_metrics(cfg, models, out);
  }
  metrics["source"] = samples_csv.string();
  fs::create_directories(out_dir);
  write_config(out_dir, cfg);
  write_json_file(out_dir / "metrics.json", metrics);
  return metrics;
}

void cmd_deploy_export(const RunConfig& cfg, const fs::path& model_dir, const fs::path& out_dir) {
  const ModelBundle models = load_models(model_dir);
  fs::create_directories(out_dir);
  write_config(out_dir, cfg);
  const AnalogMLP analog = deploy_score(cfg, models);
  export_analog(out_dir / "score_net_analog.json", analog);

  auto layer_report = [](const AnalogLayer& l) {
    double mean = 0.0;
    int worst = 0;
    for (int c : l.xbar.program_cycles) {
      mean += c;
      worst = std::max(worst, c);
    }
    if (!l.xbar.program_cycles.empty()) mean /= static_cast<double>(l.xbar.program_cycles.size());
    return json{{"rows", l.xbar.rows},        {"cols", l.xbar.cols},
                {"scale_mS_per_unit", l.scale}, {"gain_V_per_mA", l.gain},
                {"mean_program_cycles", mean},  {"max_program_cycles", worst}};
  };
  json report{{"score_net", json::array()}};
  for (const auto& l : analog.layers) report["score_net"].push_back(layer_report(l));

  if (models.experiment == Experiment::kLetters) {
    const AnalogDecoder dec = deploy_vae_decoder(cfg, models);
    report["decoder"] = json::array();
    for (std::size_t s = 0; s < dec.stages.size(); ++s) {
      const std::string csv = "decoder_stage" + std::to_string(s) + ".csv";
      write_matrix_csv(out_dir / csv, dec.stages[s].xbar.g_programmed);
      json r = layer_report(dec.stages[s]);
      r["conductance_csv"] = csv;
      r["activation"] = dec.stages[s].activation == Activation::kRelu ? "relu" : "identity";
      report["decoder"].push_back(r);
    }
  }
  write_json_file(out_dir / "deploy_report.json", report);
}

}  // namespace memdiff
