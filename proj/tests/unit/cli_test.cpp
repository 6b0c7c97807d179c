#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "nsarm/atomic_file.hpp"

using namespace nsarm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result nsarm_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nsarm_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kMicroConfig = R"(
[model]
schedule = 1x1,2x2,4x4;k_t=2;d=4;factor=4
tokenizer_channels = 4
tokenizer_latent_channels = 8
tnet_channels = 4
ar_dim = 16
ar_layers = 1
ar_heads = 2
ar_mlp_ratio = 2

[data]
count = 6
side = 16
holdout = 2

[degradation]
preset = mild
scale_factor = 2

[tokenizer]
epochs = 1
batch_size = 2

[ar_pretrain]
iterations = 2
batch_size = 2

[stage1]
iterations = 2
batch_size = 2

[stage2]
iterations = 2
batch_size = 2
)";

// Writes the micro config into `dir` and returns the common flag prefix.
std::vector<std::string> micro_flags(const fs::path& dir) {
  write_file_atomic(dir / "run.cfg", std::string(kMicroConfig) + "\n[paths]\ndata = " + (dir / "data").string() +
                                         "\ncheckpoints = " + (dir / "ckpt").string() +
                                         "\noutput = " + (dir / "out").string() + "\n");
  return {"--config", (dir / "run.cfg").string(), "--seed", "3"};
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "run.cfg") {
      const auto bytes = read_file(e.path());
      files[fs::relative(e.path(), dir).string()] = std::string(bytes.begin(), bytes.end());
    }
  }
  return files;
}

}  // namespace

TEST_CASE("config text parses sections, comments and overrides") {
  auto kv = cli::KeyValues::parse("[stage2]\niterations = 12  # short\n\n[run]\nseed=4\n");
  kv.set_assignment("stage2.batch_size=3");
  const cli::RunConfig c = cli::build_config(kv);
  CHECK(c.stage2.iterations == 12);
  CHECK(c.stage2.batch_size == 3);
  CHECK(c.seed == 4);
  CHECK(c.stage1.seed == 4);
  CHECK(c.degradation.second_order);

  const cli::RunConfig again = cli::build_config(cli::KeyValues::parse(cli::describe(c)));
  CHECK(cli::describe(again) == cli::describe(c));
}

TEST_CASE("config errors") {
  using cli::ConfigError;
  CHECK_THROWS_AS(cli::KeyValues::parse("key = 1\n"), ConfigError);
  CHECK_THROWS_AS(cli::KeyValues::parse("[run\n"), ConfigError);
  CHECK_THROWS_AS(cli::KeyValues::parse("[run]\nseed\n"), ConfigError);
  CHECK_THROWS_AS(cli::build_config(cli::KeyValues::parse("[run]\ncolour = red\n")), ConfigError);
  CHECK_THROWS_AS(cli::build_config(cli::KeyValues::parse("[stage1]\niterations = -3\n")), ConfigError);
  CHECK_THROWS_AS(cli::build_config(cli::KeyValues::parse("[stage1]\nlearning_rate = 0\n")), ConfigError);
  CHECK_THROWS_AS(cli::build_config(cli::KeyValues::parse("[degradation]\npreset = awful\n")), ConfigError);
  CHECK_THROWS_AS(cli::build_config(cli::KeyValues::parse("[data]\nside = 32\n")), ConfigError);
  CHECK_THROWS_AS(cli::build_config(cli::KeyValues::parse("[sampling]\nmode = beam\n")), ConfigError);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(nsarm_cli({}).code == cli::kExitUsage);
  CHECK(nsarm_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(nsarm_cli({"make-data", "--bogus"}).code == cli::kExitUsage);
  CHECK(nsarm_cli({"make-data", "--set", "run.colour=red"}).code == cli::kExitUsage);
  const Result r = nsarm_cli({"pathway", "--ref", "/nonexistent/ref.ppm"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("reference image") != std::string::npos);
  CHECK(nsarm_cli({"--help"}).code == cli::kExitOk);
}

TEST_CASE("runtime failures exit with code 1") {
  const fs::path dir = fresh_dir("runtime");
  const auto flags = micro_flags(dir);
  fs::create_directories(dir / "ckpt");
  write_file_atomic(dir / "ckpt" / "tokenizer.nsrm", std::string("not a checkpoint"));
  write_file_atomic(dir / "img.ppm", std::string("P6\n16 16\n255\n") + std::string(16 * 16 * 3, '\x40'));
  const Result r = nsarm_cli(with(flags, {"decompose", "--image", (dir / "img.ppm").string()}));
  CHECK(r.code == cli::kExitRuntime);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("dry run writes nothing") {
  const fs::path dir = fresh_dir("dry");
  const auto flags = micro_flags(dir);
  const Result r = nsarm_cli(with(flags, {"--dry-run", "make-data"}));
  CHECK(r.code == 0);
  CHECK_FALSE(fs::exists(dir / "data"));
  CHECK(nsarm_cli(with(flags, {"--dry-run", "train-tokenizer"})).code == cli::kExitUsage);
}

TEST_CASE("full micro pipeline runs and is byte-reproducible") {
  auto run_all = [](const fs::path& dir) {
    const auto flags = micro_flags(dir);
    const std::string ref = (dir / "data" / "gt" / "img0005.ppm").string();
    const std::vector<std::vector<std::string>> commands = {
        {"make-data"},
        {"train-tokenizer"},
        {"train-stage1"},
        {"train-stage2"},
        {"infer"},
        {"pathway", "--ref", ref, "--k", "0..K"},
        {"decompose", "--image", ref},
        {"eval-images", "--dataset", "micro"},
        {"eval-scores", "--scores", (dir / "out" / "scores.csv").string(), "--metrics", "psnr,ssim"},
        {"report-robustness", "--scores", (dir / "out" / "scores.csv").string(), "--metrics", "ssim",
         "--metrics", "psnr,ssim"},
    };
    for (const auto& cmd : commands) {
      const Result r = nsarm_cli(with(flags, cmd));
      INFO(cmd.front() << ": " << r.err);
      REQUIRE(r.code == 0);
    }
    return snapshot(dir);
  };
  const auto a = run_all(fresh_dir("det_a"));
  const auto b = run_all(fresh_dir("det_b"));

  CHECK(a.count("ckpt/stage2.nsrm") == 1);
  CHECK(a.count("out/infer/img0004.ppm") == 1);
  CHECK(a.count("out/pathway/k3.ppm") == 1);
  CHECK(a.count("out/curve_micro_psnr+ssim.svg") == 1);
  CHECK(a.at("out/pathway/distances.csv").rfind("k_replace,latent_distance\n0,", 0) == 0);
  CHECK(a.at("out/robustness.csv").find("micro,psnr+ssim,") != std::string::npos);
  REQUIRE(a.size() == b.size());
  for (const auto& [name, bytes] : a) {
    if (name.rfind("data/config.txt", 0) == 0) continue;
    INFO(name);
    CHECK(b.at(name) == bytes);
  }
  for (const auto& [name, bytes] : a) CHECK(name.find(".tmp") == std::string::npos);
}
