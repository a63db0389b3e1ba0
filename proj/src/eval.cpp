#include "memdiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "memdiff/analog_net.hpp"

namespace memdiff {

void KlConfig::validate() const {
  if (bins_per_axis < 10) throw std::invalid_argument("kl: bins_per_axis must be >= 10");
  if (!(pseudocount > 0.0)) throw std::invalid_argument("kl: pseudocount must be > 0");
  if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("kl: domain lo/hi dimension mismatch");
  for (std::size_t d = 0; d < lo.size(); ++d)
    if (!(lo[d] < hi[d])) throw std::invalid_argument("kl: empty domain");
  if (lo.size() > 3) throw std::invalid_argument("kl: histogram domain limited to 3 dimensions");
}

Vec histogram(std::span<const Vec> samples, const KlConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("histogram_kl: empty sample set");
  const std::size_t dim = cfg.lo.size();
  const std::size_t nb = cfg.bins_per_axis;
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) total *= nb;
  Vec h(total, 0.0);
  for (const Vec& s : samples) {
    require_dim(s.size(), dim, "histogram sample");
    std::size_t idx = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double f = (s[d] - cfg.lo[d]) / (cfg.hi[d] - cfg.lo[d]) * static_cast<double>(nb);
      const double c = std::clamp(std::floor(f), 0.0, static_cast<double>(nb - 1));
      idx = idx * nb + static_cast<std::size_t>(std::isnan(f) ? 0.0 : c);
    }
    h[idx] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  const double norm = 1.0 + static_cast<double>(total) * cfg.pseudocount;
  for (double& v : h) v = (v / n + cfg.pseudocount) / norm;
  return h;
}

double histogram_kl(std::span<const Vec> p_samples, std::span<const Vec> q_samples, const KlConfig& cfg) {
  const Vec p = histogram(p_samples, cfg);
  const Vec q = histogram(q_samples, cfg);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, kl);
}

std::size_t nearest_index(std::span<const double> x, std::span<const Vec> candidates) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    require_dim(candidates[c].size(), x.size(), "nearest_index");
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - candidates[c][i]) * (x[i] - candidates[c][i]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double nearest_center_accuracy(std::span<const Vec> samples, std::span<const int> labels,
                               std::span<const Vec> centers) {
  require_dim(labels.size(), samples.size(), "nearest_center_accuracy");
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (static_cast<int>(nearest_index(samples[i], centers)) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

namespace {

Vec ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vec r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // ties share the mean rank
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  require_dim(b.size(), a.size(), "spearman_rho");
  const Vec ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

double NoiseSweepGrid::mean_kl(std::size_t mode, std::size_t w, std::size_t r) const {
  const auto& reps = kl.at(mode).at(w).at(r);
  double s = 0.0;
  std::size_t n = 0;
  for (double v : reps)
    if (std::isfinite(v)) {
      s += v;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

DeviceConfig sweep_device(const DeviceConfig& base, double write_sigma, double read_sigma) {
  DeviceConfig d = base;
  if (write_sigma <= 0.0) {
    d.exact_write = true;
  } else {
    d.exact_write = false;
    d.write_tol = write_sigma * (base.g_max - base.g_min);
    d.write_step_mean = 1.5 * d.write_tol;
    d.write_step_sigma = 0.5 * d.write_tol;
    d.max_program_cycles = std::max(base.max_program_cycles, static_cast<int>(std::ceil(4.0 / write_sigma)));
  }
  d.read_noise_a = read_sigma * base.g_fixed;
  d.read_noise_b = 0.0;
  return d;
}

NoiseSweepGrid noise_sweep(const NoiseSweepTask& task, std::span<const double> write_sigmas,
                           std::span<const double> read_sigmas, std::span<const SolverMode> modes,
                           std::size_t repeats) {
  if (!task.net) throw std::invalid_argument("noise_sweep: no trained network");
  if (task.ground_truth.empty()) throw std::invalid_argument("noise_sweep: empty ground truth");
  if (write_sigmas.empty() || read_sigmas.empty() || modes.empty() || repeats == 0)
    throw std::invalid_argument("noise_sweep: empty grid axis");

  NoiseSweepGrid grid;
  grid.write_sigmas.assign(write_sigmas.begin(), write_sigmas.end());
  grid.read_sigmas.assign(read_sigmas.begin(), read_sigmas.end());
  grid.modes.assign(modes.begin(), modes.end());
  grid.repeats = repeats;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  grid.kl.assign(modes.size(),
                 std::vector<std::vector<std::vector<double>>>(
                     write_sigmas.size(), std::vector<std::vector<double>>(read_sigmas.size(), Vec(repeats, nan))));

  for (std::size_t rep = 0; rep < repeats; ++rep) {
    for (std::size_t w = 0; w < write_sigmas.size(); ++w) {
      // One write-noise realization per (repeat, write level), shared by all
      // read levels and modes.
      std::optional<AnalogMLP> deployed;
      try {
        Rng deploy_rng = make_rng(task.seed, {stream::kSweep, 1, rep, w});
        deployed = deploy(*task.net, sweep_device(task.device, write_sigmas[w], 0.0), deploy_rng, task.deploy);
      } catch (const std::exception& e) {
        grid.failures.push_back("write=" + std::to_string(write_sigmas[w]) + " repeat=" + std::to_string(rep) +
                                ": " + e.what());
        continue;
      }
      for (std::size_t r = 0; r < read_sigmas.size(); ++r) {
        const DeviceConfig rd = sweep_device(task.device, write_sigmas[w], read_sigmas[r]);
        const AnalogMLP net = with_read_noise(*deployed, rd.read_noise_a, rd.read_noise_b);
        const ScoreFn fn = analog_score_fn(net);
        for (std::size_t m = 0; m < modes.size(); ++m) {
          SolverConfig sc = task.solver;
          sc.mode = modes[m];
          if (sc.mode == SolverMode::kSde) sc.method = SolverMethod::kEulerMaruyama;
          else if (sc.method == SolverMethod::kEulerMaruyama) sc.method = SolverMethod::kEuler;
          sc.seed = derive_seed(task.seed, {stream::kSweep, 2, rep});
          sc.record_stride = sc.steps();
          try {
            BatchRequest req;
            req.count = task.samples;
            req.dim = net.in_dim();
            const auto finals = batch_sample(fn, task.schedule, sc, req);
            grid.kl[m][w][r][rep] = histogram_kl(task.ground_truth, finals, task.kl);
          } catch (const std::exception& e) {
            grid.failures.push_back(std::string("mode=") + to_string(modes[m]) + " write=" +
                                    std::to_string(write_sigmas[w]) + " read=" + std::to_string(read_sigmas[r]) +
                                    " repeat=" + std::to_string(rep) + ": " + e.what());
          }
        }
      }
    }
  }
  return grid;
}

}  // namespace memdiff
