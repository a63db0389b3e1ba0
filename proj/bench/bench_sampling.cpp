// Serial reference vs OpenMP batch sampling of the deployed ring network.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef MEMDIFF_HAVE_OPENMP
#include <omp.h>
#endif

#include "memdiff/analog_net.hpp"
#include "memdiff/digital_mlp.hpp"
#include "memdiff/solver.hpp"

using namespace memdiff;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t count = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 256;
  VPSchedule sched;
  DigitalMLP net = make_score_net(11, std::nullopt, {}, OutputScaling::kInvSigma, sched);
  Rng init(12);
  net.init_random(init);
  Rng dep(13);
  const AnalogMLP analog = deploy(net, DeviceConfig{}, dep);

  SolverConfig cfg;
  cfg.seed = 14;
  BatchRequest req;
  req.count = count;

  int threads = 1;
#ifdef MEMDIFF_HAVE_OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("samples %zu, steps %zu, threads %d\n", count, cfg.steps(), threads);

  struct Case {
    const char* name;
    ScoreFn fn;
  } cases[] = {{"digital", digital_score_fn(net)}, {"analog", analog_score_fn(analog)}};
  for (const auto& c : cases) {
    std::vector<Vec> serial, parallel;
    const double ts = seconds([&] { serial = batch_sample_serial(c.fn, sched, cfg, req); });
    const double tp = seconds([&] { parallel = batch_sample(c.fn, sched, cfg, req); });
    std::printf("%-8s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  identical %s\n", c.name, ts, tp, ts / tp,
                serial == parallel ? "yes" : "NO");
  }
}
