#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "memdiff/io.hpp"

using namespace memdiff;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "memdiff_test_cli";

int run(const std::string& args) {
  const std::string cmd = "env -u MEMDIFF_DATA_DIR " + std::string(MEMDIFF_CLI_PATH) + " " + args + " > " +
                          (kRoot / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string log_text() {
  std::ifstream f(kRoot / "last.log");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::string kSmallRing =
    "--experiment ring --set training.steps=300 ring.n=2000 ground_truth_samples=5000 sample_count=50 trajectories=2";

// Trains one small ring model shared by the tests below.
const fs::path& ring_models() {
  static const fs::path dir = [] {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    const fs::path d = kRoot / "ring";
    REQUIRE(run("train " + kSmallRing + " --out " + d.string()) == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with 1, help with 0") {
  fs::create_directories(kRoot);
  CHECK(run("") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("train --no-such-flag") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train --set training.nope=3 --out " + (kRoot / "x").string()) == 1);
  CHECK(log_text().find("nope") != std::string::npos);
  CHECK(run("train --set training.steps=-5 --out " + (kRoot / "x").string()) == 1);
  CHECK(run("train --config " + (kRoot / "missing.json").string()) == 1);
  std::ofstream(kRoot / "bad.json") << "{\"solver\": {\"dt_lab\": 0.003}}";
  CHECK(run("train --config " + (kRoot / "bad.json").string()) == 1);
  CHECK(run("eval --experiment ring") == 1);
}

TEST_CASE("letters without EMNIST is a user error naming the data directory") {
  fs::create_directories(kRoot);
  CHECK(run("train --experiment letters --out " + (kRoot / "letters").string()) == 1);
  CHECK(log_text().find("MEMDIFF_DATA_DIR") != std::string::npos);
}

TEST_CASE("training divergence exits with 2") {
  fs::create_directories(kRoot);
  CHECK(run("train --experiment ring --set training.steps=200 training.learning_rate=1e6 "
            "training.cosine_decay=false ring.n=500 --out " +
            (kRoot / "diverge").string()) == 2);
}

TEST_CASE("train writes models and the resolved config") {
  const fs::path& d = ring_models();
  for (const char* f : {"config.json", "models.json", "score_net.json", "score_loss.csv", "score_loss.svg"})
    CHECK(fs::exists(d / f));
  const Json cfg = read_json_file(d / "config.json");
  CHECK(cfg["training"]["steps"] == 300);
  CHECK(cfg["seeds"]["training"].get<std::uint64_t>() != 0);
}

TEST_CASE("ODE sampling is bit-identical across runs and from the saved config") {
  const fs::path& d = ring_models();
  const fs::path a = kRoot / "sa", b = kRoot / "sb", c = kRoot / "sc";
  REQUIRE(run("sample " + kSmallRing + " --models " + d.string() + " --out " + a.string()) == 0);
  REQUIRE(run("sample " + kSmallRing + " --models " + d.string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "samples.csv") == slurp(b / "samples.csv"));
  CHECK(slurp(a / "trajectory_0.csv") == slurp(b / "trajectory_0.csv"));
  for (const char* f : {"samples.svg", "metrics.json", "config.json", "snapshot_t0.500.csv"}) CHECK(fs::exists(a / f));

  REQUIRE(run("sample --config " + (a / "config.json").string() + " --models " + d.string() + " --out " + c.string()) ==
          0);
  CHECK(slurp(a / "samples.csv") == slurp(c / "samples.csv"));
}

TEST_CASE("noiseless analog sampling matches digital sampling") {
  const fs::path& d = ring_models();
  const fs::path dig = kRoot / "digital", ana = kRoot / "noiseless";
  REQUIRE(run("sample " + kSmallRing + " --digital --models " + d.string() + " --out " + dig.string()) == 0);
  REQUIRE(run("sample " + kSmallRing +
              " device.read_noise_a=0 device.read_noise_b=0 device.exact_write=true --models " + d.string() +
              " --out " + ana.string()) == 0);
  const PointTable p = read_points_csv(dig / "samples.csv");
  const PointTable q = read_points_csv(ana / "samples.csv");
  REQUIRE(p.points.size() == q.points.size());
  double worst = 0;
  for (std::size_t i = 0; i < p.points.size(); ++i)
    for (std::size_t k = 0; k < 2; ++k) worst = std::max(worst, std::abs(p.points[i][k] - q.points[i][k]));
  CHECK(worst <= 1e-6);
}

TEST_CASE("SDE sampling is reproducible under the master seed") {
  const fs::path& d = ring_models();
  const fs::path a = kRoot / "sde_a", b = kRoot / "sde_b";
  REQUIRE(run("sample " + kSmallRing + " --mode sde --models " + d.string() + " --out " + a.string()) == 0);
  REQUIRE(run("sample " + kSmallRing + " --mode sde --models " + d.string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "samples.csv") == slurp(b / "samples.csv"));
}

TEST_CASE("eval, deploy-export and a tiny sweep") {
  const fs::path& d = ring_models();
  const fs::path s = kRoot / "for_eval";
  REQUIRE(run("sample " + kSmallRing + " --models " + d.string() + " --out " + s.string()) == 0);
  REQUIRE(run("eval " + kSmallRing + " --models " + d.string() + " --samples " + (s / "samples.csv").string() +
              " --out " + (kRoot / "eval").string()) == 0);
  const Json m = read_json_file(kRoot / "eval" / "metrics.json");
  CHECK(m["kl"].get<double>() >= 0.0);

  REQUIRE(run("deploy-export " + kSmallRing + " --models " + d.string() + " --out " + (kRoot / "deployed").string()) ==
          0);
  CHECK(fs::exists(kRoot / "deployed" / "score_net_analog.json"));
  CHECK(fs::exists(kRoot / "deployed" / "score_net_analog_layer0.csv"));

  REQUIRE(run("sweep " + kSmallRing +
              " sweep.write_sigmas=[0,0.01] sweep.read_sigmas=[0,0.05] sweep.repeats=1 sweep.samples=30"
              " solver.dt_lab=0.01 --models " +
              d.string() + " --out " + (kRoot / "sweep").string()) == 0);
  const std::string csv = slurp(kRoot / "sweep" / "sweep.csv");
  CHECK(csv.rfind("write_sigma,read_sigma,mode,repeat,kl", 0) == 0);
  // 2 write x 2 read x 2 modes x 1 repeat plus the header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(fs::exists(kRoot / "sweep" / "heatmap_ode.svg"));
}
