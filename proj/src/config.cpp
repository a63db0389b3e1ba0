#include "memdiff/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "memdiff/rng.hpp"

namespace memdiff {

using nlohmann::json;

namespace {

// Reads keys out of one JSON object and rejects anything it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class F>
  void with(const char* key, F&& f) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      f(j_.at(key), where_ + "." + key);
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json train_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate}, {"momentum", t.momentum}, {"cosine_decay", t.cosine_decay},
              {"batch_size", t.batch_size},       {"steps", t.steps},       {"p_uncond", t.p_uncond},
              {"t_min", t.t_min}};
}

void read_train(const json& j, const std::string& where, TrainConfig& t) {
  ObjectReader r(j, where);
  r.get("learning_rate", t.learning_rate);
  r.get("momentum", t.momentum);
  r.get("cosine_decay", t.cosine_decay);
  r.get("batch_size", t.batch_size);
  r.get("steps", t.steps);
  r.get("p_uncond", t.p_uncond);
  r.get("t_min", t.t_min);
}

std::vector<std::string> mode_names(const std::vector<SolverMode>& modes) {
  std::vector<std::string> out;
  for (auto m : modes) out.emplace_back(to_string(m));
  return out;
}

}  // namespace

void to_json(json& j, const DeviceConfig& c) {
  j = json{{"g_min", c.g_min},
           {"g_max", c.g_max},
           {"g_fixed", c.g_fixed},
           {"write_tol", c.write_tol},
           {"write_step_mean", c.write_step_mean},
           {"write_step_sigma", c.write_step_sigma},
           {"max_program_cycles", c.max_program_cycles},
           {"read_noise_a", c.read_noise_a},
           {"read_noise_b", c.read_noise_b},
           {"quant_levels", c.quant_levels ? json(*c.quant_levels) : json(nullptr)},
           {"exact_write", c.exact_write}};
}

void from_json(const json& j, DeviceConfig& c) {
  ObjectReader r(j, "device");
  r.get("g_min", c.g_min);
  r.get("g_max", c.g_max);
  r.get("g_fixed", c.g_fixed);
  r.get("write_tol", c.write_tol);
  r.get("write_step_mean", c.write_step_mean);
  r.get("write_step_sigma", c.write_step_sigma);
  r.get("max_program_cycles", c.max_program_cycles);
  r.get("read_noise_a", c.read_noise_a);
  r.get("read_noise_b", c.read_noise_b);
  r.with("quant_levels", [&](const json& v, const std::string&) { c.quant_levels = v.get<int>(); });
  r.get("exact_write", c.exact_write);
}

void to_json(json& j, const VPSchedule& c) { j = json{{"beta0", c.beta0}, {"beta1", c.beta1}, {"T", c.T}}; }

void from_json(const json& j, VPSchedule& c) {
  ObjectReader r(j, "schedule");
  r.get("beta0", c.beta0);
  r.get("beta1", c.beta1);
  r.get("T", c.T);
}

void to_json(json& j, const ClampConfig& c) { j = json{{"v_lo", c.v_lo}, {"v_hi", c.v_hi}}; }

void from_json(const json& j, ClampConfig& c) {
  ObjectReader r(j, "clamp");
  r.get("v_lo", c.v_lo);
  r.get("v_hi", c.v_hi);
}

const char* to_string(Experiment e) { return e == Experiment::kRing ? "ring" : "letters"; }
const char* to_string(DataSource s) { return s == DataSource::kEmnist ? "emnist" : "synthetic"; }

Experiment parse_experiment(const std::string& s) {
  if (s == "ring") return Experiment::kRing;
  if (s == "letters") return Experiment::kLetters;
  throw ConfigError("unknown experiment '" + s + "' (expected ring or letters)");
}

DataSource parse_data_source(const std::string& s) {
  if (s == "emnist") return DataSource::kEmnist;
  if (s == "synthetic") return DataSource::kSynthetic;
  throw ConfigError("unknown data source '" + s + "' (expected emnist or synthetic)");
}

void resolve_seeds(Seeds& s) {
  auto fill = [&](std::uint64_t& seed, std::uint64_t id) {
    if (seed == 0) seed = derive_seed(s.master, {id});
  };
  fill(s.embedding, stream::kTimeEmbedding);
  fill(s.dataset, stream::kDataset);
  fill(s.training, stream::kTrainBatches);
  fill(s.vae, stream::kVaeBatches);
  fill(s.ground_truth, stream::kGroundTruth);
  fill(s.deploy, stream::kDeploy);
  fill(s.sampling, stream::kSample);
  fill(s.sweep, stream::kSweep);
}

RunConfig default_config(Experiment e) {
  RunConfig c;
  c.experiment = e;
  c.training.steps = 100000;
  c.ring.n = 20000;
  c.solver.record_stride = 50;
  if (e == Experiment::kLetters) {
    c.output_dir = "runs/letters";
    c.sample_count = 500;
    c.training.steps = 80000;
    c.training.batch_size = 1024;
    c.solver.mode = SolverMode::kSde;
    c.solver.method = SolverMethod::kEulerMaruyama;
    c.letters.vae_training.learning_rate = 1e-2;
    c.letters.vae_training.batch_size = 64;
    c.letters.vae_training.steps = 20000;
    c.letters.vae_training.p_uncond = 0.0;
  }
  resolve_seeds(c.seeds);
  return c;
}

void RunConfig::validate() const {
  try {
    device.validate();
    schedule.validate();
    solver.validate();
    training.validate();
    kl.validate();
    deploy.clamp.validate();
    if (experiment == Experiment::kLetters) letters.vae_training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(deploy.unit_volt > 0)) throw ConfigError("deploy.unit_volt must be positive");
  if (sample_count == 0) throw ConfigError("sample_count must be at least 1");
  if (ground_truth_samples == 0) throw ConfigError("ground_truth_samples must be at least 1");
  if (!(ring.radius > 0) || !(ring.radial_sigma >= 0)) throw ConfigError("ring needs radius > 0 and radial_sigma >= 0");
  for (double t : snapshot_times)
    if (t < 0 || t > solver.lab_duration) throw ConfigError("snapshot_times must lie in [0, solver.lab_duration]");
  if (!(letters.gamma >= 0)) throw ConfigError("letters.gamma must be non-negative");
  if (letters.per_class == 0) throw ConfigError("letters.per_class must be at least 1");
  if (letters.code_copies == 0) throw ConfigError("letters.code_copies must be at least 1");
  if (!(letters.code_jitter >= 0)) throw ConfigError("letters.code_jitter must be non-negative");
  if (sweep.write_sigmas.empty() || sweep.read_sigmas.empty() || sweep.modes.empty() || sweep.repeats == 0 ||
      sweep.samples == 0)
    throw ConfigError("sweep axes, modes, repeats and samples must be non-empty");
  for (double v : sweep.write_sigmas)
    if (!(v >= 0)) throw ConfigError("sweep.write_sigmas must be non-negative");
  for (double v : sweep.read_sigmas)
    if (!(v >= 0)) throw ConfigError("sweep.read_sigmas must be non-negative");
}

json to_json(const RunConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["output_dir"] = c.output_dir;
  j["device"] = c.device;
  j["schedule"] = c.schedule;
  j["solver"] = {{"mode", to_string(c.solver.mode)},
                 {"method", to_string(c.solver.method)},
                 {"dt_lab", c.solver.dt_lab},
                 {"lab_duration", c.solver.lab_duration},
                 {"record_stride", c.solver.record_stride},
                 {"t_min", c.solver.t_min}};
  j["training"] = train_json(c.training);
  j["guidance"] = {{"lambda", c.guidance.lambda}};
  j["kl"] = {{"bins_per_axis", c.kl.bins_per_axis}, {"lo", c.kl.lo}, {"hi", c.kl.hi}, {"pseudocount", c.kl.pseudocount}};
  j["deploy"] = {{"clamp", c.deploy.clamp}, {"unit_volt", c.deploy.unit_volt}};
  j["seeds"] = {{"master", c.seeds.master},     {"embedding", c.seeds.embedding},
                {"dataset", c.seeds.dataset},   {"training", c.seeds.training},
                {"vae", c.seeds.vae},           {"ground_truth", c.seeds.ground_truth},
                {"deploy", c.seeds.deploy},     {"sampling", c.seeds.sampling},
                {"sweep", c.seeds.sweep}};
  j["ring"] = {{"radius", c.ring.radius}, {"radial_sigma", c.ring.radial_sigma}, {"n", c.ring.n}};
  j["ground_truth_samples"] = c.ground_truth_samples;
  j["sample_count"] = c.sample_count;
  j["snapshot_times"] = c.snapshot_times;
  j["trajectories"] = c.trajectories;
  j["letters"] = {{"source", to_string(c.letters.source)},
                  {"per_class", c.letters.per_class},
                  {"gamma", c.letters.gamma},
                  {"center_radius", c.letters.center_radius},
                  {"vae_training", train_json(c.letters.vae_training)},
                  {"images_per_class", c.letters.images_per_class},
                  {"code_copies", c.letters.code_copies},
                  {"code_jitter", c.letters.code_jitter}};
  j["sweep"] = {{"write_sigmas", c.sweep.write_sigmas},
                {"read_sigmas", c.sweep.read_sigmas},
                {"modes", mode_names(c.sweep.modes)},
                {"repeats", c.sweep.repeats},
                {"samples", c.sweep.samples}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  Experiment e = Experiment::kRing;
  if (j.is_object() && j.contains("experiment")) {
    if (!j.at("experiment").is_string()) throw ConfigError("experiment must be a string");
    e = parse_experiment(j.at("experiment").get<std::string>());
  }
  RunConfig c = default_config(e);
  // Seeds in the file replace the resolved defaults; zero means "derive".
  c.seeds = Seeds{};
  {
    ObjectReader r(j, "config");
    r.with("experiment", [](const json&, const std::string&) {});
    r.get("output_dir", c.output_dir);
    r.get("device", c.device);
    r.get("schedule", c.schedule);
    r.with("solver", [&](const json& v, const std::string& w) {
      ObjectReader s(v, w);
      bool method_given = false;
      s.with("mode", [&](const json& m, const std::string&) { c.solver.mode = parse_solver_mode(m.get<std::string>()); });
      s.with("method", [&](const json& m, const std::string&) {
        c.solver.method = parse_solver_method(m.get<std::string>());
        method_given = true;
      });
      // Each mode has one natural default integrator.
      if (!method_given)
        c.solver.method = c.solver.mode == SolverMode::kSde ? SolverMethod::kEulerMaruyama : SolverMethod::kEuler;
      s.get("dt_lab", c.solver.dt_lab);
      s.get("lab_duration", c.solver.lab_duration);
      s.get("record_stride", c.solver.record_stride);
      s.get("t_min", c.solver.t_min);
    });
    r.with("training", [&](const json& v, const std::string& w) { read_train(v, w, c.training); });
    r.with("guidance", [&](const json& v, const std::string& w) {
      ObjectReader g(v, w);
      g.get("lambda", c.guidance.lambda);
    });
    r.with("kl", [&](const json& v, const std::string& w) {
      ObjectReader k(v, w);
      k.get("bins_per_axis", c.kl.bins_per_axis);
      k.get("lo", c.kl.lo);
      k.get("hi", c.kl.hi);
      k.get("pseudocount", c.kl.pseudocount);
    });
    r.with("deploy", [&](const json& v, const std::string& w) {
      ObjectReader d(v, w);
      d.get("clamp", c.deploy.clamp);
      d.get("unit_volt", c.deploy.unit_volt);
    });
    r.with("seeds", [&](const json& v, const std::string& w) {
      ObjectReader s(v, w);
      s.get("master", c.seeds.master);
      s.get("embedding", c.seeds.embedding);
      s.get("dataset", c.seeds.dataset);
      s.get("training", c.seeds.training);
      s.get("vae", c.seeds.vae);
      s.get("ground_truth", c.seeds.ground_truth);
      s.get("deploy", c.seeds.deploy);
      s.get("sampling", c.seeds.sampling);
      s.get("sweep", c.seeds.sweep);
    });
    r.with("ring", [&](const json& v, const std::string& w) {
      ObjectReader s(v, w);
      s.get("radius", c.ring.radius);
      s.get("radial_sigma", c.ring.radial_sigma);
      s.get("n", c.ring.n);
    });
    r.get("ground_truth_samples", c.ground_truth_samples);
    r.get("sample_count", c.sample_count);
    r.get("snapshot_times", c.snapshot_times);
    r.get("trajectories", c.trajectories);
    r.with("letters", [&](const json& v, const std::string& w) {
      ObjectReader l(v, w);
      l.with("source", [&](const json& s, const std::string&) { c.letters.source = parse_data_source(s.get<std::string>()); });
      l.get("per_class", c.letters.per_class);
      l.get("gamma", c.letters.gamma);
      l.get("center_radius", c.letters.center_radius);
      l.with("vae_training", [&](const json& t, const std::string& tw) { read_train(t, tw, c.letters.vae_training); });
      l.get("images_per_class", c.letters.images_per_class);
      l.get("code_copies", c.letters.code_copies);
      l.get("code_jitter", c.letters.code_jitter);
    });
    r.with("sweep", [&](const json& v, const std::string& w) {
      ObjectReader s(v, w);
      s.get("write_sigmas", c.sweep.write_sigmas);
      s.get("read_sigmas", c.sweep.read_sigmas);
      s.with("modes", [&](const json& m, const std::string&) {
        c.sweep.modes.clear();
        for (const auto& name : m) c.sweep.modes.push_back(parse_solver_mode(name.get<std::string>()));
      });
      s.get("repeats", c.sweep.repeats);
      s.get("samples", c.sweep.samples);
    });
  }
  if (c.seeds.master == 0) c.seeds.master = Seeds{}.master;
  resolve_seeds(c.seeds);
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("override key '" + key + "': '" + parts[i] + "' is not an object");
    node = &next;
  }
  (*node)[parts.back()] = std::move(value);
}

RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + file->string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

}  // namespace memdiff
