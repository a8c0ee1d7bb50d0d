#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "quantlab/cli.hpp"
#include "quantlab/rng.hpp"
#include "quantlab/tensor.hpp"

using namespace quantlab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "quantlab_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

fs::path write_dump(const fs::path& dir, const std::string& name, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(32 * 16);
  for (double& v : values) v = rng.gaussian();
  const fs::path path = dir / name;
  save_dump(ActivationTensor(32, 16, std::move(values)), path.string());
  return path;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path path = dir / "config.json";
  std::ofstream f(path);
  f << body;
  return path;
}

// Small stack so CLI-level tests stay quick.
const char* kSmallStack = R"({
  "seed": 1000,
  "percentile_grid": [99.0],
  "k_grid": [2, 4],
  "stack": {"depth": 4, "width": 64, "samples": 512, "dominant_count": 2,
            "dominance_gain": 2.5}
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("stats writes one row per dump in the given order") {
  const fs::path dir = fresh_dir("stats_ok");
  const fs::path a = write_dump(dir, "embeddings.qlt", 1);
  const fs::path b = write_dump(dir, "layer01.qlt", 2);
  const fs::path c = write_dump(dir, "pooler.qlt", 3);
  const fs::path out = dir / "results";

  const int rc = cli::run({"stats", "--dumps", a.string(), b.string(), c.string(),
                           "--out", out.string()});
  CHECK(rc == cli::kExitOk);

  const std::string csv = read_bytes(out / "outlier_stats.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "layer,mean_variance,kurtosis,top1_energy");
  std::getline(in, line);
  CHECK(line.rfind("embeddings,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("layer01,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("pooler,", 0) == 0);
}

TEST_CASE("missing dump exits 2 with no partial output") {
  const fs::path dir = fresh_dir("stats_missing");
  const fs::path a = write_dump(dir, "layer00.qlt", 1);
  const fs::path out = dir / "results";

  const int rc = cli::run({"stats", "--dumps", a.string(),
                           (dir / "nope.qlt").string(), "--out", out.string()});
  CHECK(rc == cli::kExitIo);
  CHECK_FALSE(fs::exists(out / "outlier_stats.csv"));
}

TEST_CASE("malformed dump exits 3") {
  const fs::path dir = fresh_dir("stats_malformed");
  const fs::path bad = dir / "bad.qlt";
  std::ofstream(bad) << "this is not a dump";
  const int rc = cli::run({"stats", "--dumps", bad.string(),
                           "--out", (dir / "results").string()});
  CHECK(rc == cli::kExitMalformedDump);
}

TEST_CASE("stats without dumps is a usage error") {
  const fs::path dir = fresh_dir("stats_nodumps");
  CHECK(cli::run({"stats", "--out", (dir / "results").string()}) == cli::kExitUsage);
}

TEST_CASE("unknown flags and missing subcommands are usage errors") {
  CHECK(cli::run({"stats", "--frobnicate"}) == cli::kExitUsage);
  CHECK(cli::run({}) == cli::kExitUsage);
}

TEST_CASE("simulate runs the small stack and emits one row per layer") {
  const fs::path dir = fresh_dir("simulate");
  const fs::path config = write_config(dir, kSmallStack);
  const fs::path out = dir / "results";

  const int rc = cli::run({"simulate", "--config", config.string(), "--out", out.string()});
  CHECK(rc == cli::kExitOk);

  const std::string csv = read_bytes(out / "propagation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 layers
}

TEST_CASE("policy length mismatch is a usage error") {
  const fs::path dir = fresh_dir("simulate_policy");
  const fs::path config = write_config(dir, R"({
    "stack": {"depth": 3, "width": 16, "samples": 64, "dominant_count": 1},
    "policy": ["retain", "minmax"]
  })");
  const int rc = cli::run({"simulate", "--config", config.string(),
                           "--out", (dir / "results").string()});
  CHECK(rc == cli::kExitUsage);
}

TEST_CASE("experiment emits method metrics with the fp32 reference first") {
  const fs::path dir = fresh_dir("experiment");
  const fs::path config = write_config(dir, kSmallStack);
  const fs::path out = dir / "results";

  const int rc = cli::run({"experiment", "--config", config.string(), "--out", out.string()});
  CHECK(rc == cli::kExitOk);

  const std::string csv = read_bytes(out / "method_metrics.csv");
  CHECK(csv.rfind("method,accuracy,delta_vs_ref\nfp32,", 0) == 0);
  CHECK(csv.find("\nretain,") != std::string::npos);
  CHECK(csv.find("\npeg_k4,") != std::string::npos);
}

TEST_CASE("run-all produces every csv and is byte-deterministic") {
  const fs::path dir = fresh_dir("run_all");
  const fs::path config = write_config(dir, kSmallStack);
  const fs::path out1 = dir / "r1";
  const fs::path out2 = dir / "r2";

  CHECK(cli::run({"run-all", "--config", config.string(), "--out", out1.string()}) ==
        cli::kExitOk);
  CHECK(cli::run({"run-all", "--config", config.string(), "--out", out2.string()}) ==
        cli::kExitOk);

  for (const char* name : {"outlier_stats.csv", "method_metrics.csv", "microbench.csv"}) {
    CHECK(fs::exists(out1 / name));
  }
  // Timings vary; the analytic outputs must not.
  CHECK(read_bytes(out1 / "outlier_stats.csv") == read_bytes(out2 / "outlier_stats.csv"));
  CHECK(read_bytes(out1 / "method_metrics.csv") == read_bytes(out2 / "method_metrics.csv"));
}

TEST_CASE("seed flag overrides the config file") {
  const fs::path dir = fresh_dir("seed_override");
  const fs::path config = write_config(dir, kSmallStack);
  const fs::path out1 = dir / "r1";
  const fs::path out2 = dir / "r2";

  CHECK(cli::run({"experiment", "--config", config.string(), "--out", out1.string()}) ==
        cli::kExitOk);
  CHECK(cli::run({"experiment", "--config", config.string(), "--seed", "2024",
                  "--out", out2.string()}) == cli::kExitOk);
  CHECK(read_bytes(out1 / "method_metrics.csv") != read_bytes(out2 / "method_metrics.csv"));
}

TEST_CASE("unwritable output directory exits 2 before any work") {
  CHECK(cli::run({"run-all", "--out", "/proc/quantlab_forbidden"}) == cli::kExitIo);
}

TEST_CASE("bad config file is a usage error") {
  const fs::path dir = fresh_dir("bad_config");
  const fs::path config = write_config(dir, "{ not json");
  CHECK(cli::run({"experiment", "--config", config.string(),
                  "--out", (dir / "r").string()}) == cli::kExitUsage);

  CHECK(cli::run({"experiment", "--config", (dir / "absent.json").string(),
                  "--out", (dir / "r").string()}) == cli::kExitIo);
}

}  // TEST_SUITE
