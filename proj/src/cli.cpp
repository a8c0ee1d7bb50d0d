#include "quantlab/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "quantlab/quant.hpp"
#include "quantlab/report.hpp"
#include "quantlab/run_config.hpp"
#include "quantlab/simulator.hpp"
#include "quantlab/stats.hpp"
#include "quantlab/tensor.hpp"

namespace quantlab::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kVarianceRatioLo = 0.9;
constexpr double kVarianceRatioHi = 1.1;

// Ensures the output directory exists and is writable before any computation.
void prepare_out_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create output directory: " + out_dir);
  const fs::path probe = fs::path(out_dir) / ".writable";
  {
    std::ofstream f(probe, std::ios::trunc);
    if (!f) throw IoFailure("output directory is not writable: " + out_dir);
  }
  fs::remove(probe, ec);
}

std::string label_for_dump(const std::string& path) {
  return fs::path(path).stem().string();
}

DepthProfile profile_from_dumps(const std::vector<std::string>& dumps) {
  std::vector<std::pair<std::string, ActivationTensor>> layers;
  layers.reserve(dumps.size());
  for (const auto& path : dumps) {
    layers.emplace_back(label_for_dump(path), load_dump(path));
  }
  return depth_profile(layers);
}

DepthProfile synthetic_profile(const RunConfig& run) {
  // Trends reference (Gaussian bulk, gain 1.35); size fields may be overridden.
  ResidualStackConfig cfg = trends_reference_config(run.seed);
  if (run.depth || run.width || run.samples || run.dominant_count) {
    cfg = make_stack_config(run.depth.value_or(cfg.depth), run.width.value_or(cfg.width),
                            run.samples.value_or(cfg.samples),
                            run.dominant_count.value_or(cfg.dominant_channels.size()),
                            cfg.dominance_gain, cfg.tail_index, run.seed);
  }
  std::vector<std::pair<std::string, ActivationTensor>> layers;
  layers.reserve(cfg.depth);
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    char label[16];
    std::snprintf(label, sizeof label, "layer_%02zu", l);
    layers.emplace_back(label, generate_layer(cfg, l));
  }
  return depth_profile(layers);
}

void print_trend(const DepthProfile& profile) {
  // The pooler-style final layer is excluded from the depth trend when there
  // are enough layers to make the distinction meaningful.
  DepthProfile body = profile;
  if (body.layers.size() >= 3) body.layers.pop_back();
  const ProfileTrend trend = profile_trend(body);
  const auto verdict = [](bool ok) { return ok ? "nondecreasing" : "NOT nondecreasing"; };
  std::cout << "trend mean_variance: " << verdict(trend.mean_variance_nondecreasing) << "\n"
            << "trend kurtosis:      " << verdict(trend.kurtosis_nondecreasing) << "\n"
            << "trend top1_energy:   " << verdict(trend.top1_energy_nondecreasing) << "\n";
}

int cmd_stats(const RunConfig& cfg) {
  if (cfg.dumps.empty()) {
    std::cerr << "stats: no dump files given\n";
    return kExitUsage;
  }
  prepare_out_dir(cfg.out_dir);
  const DepthProfile profile = profile_from_dumps(cfg.dumps);
  emit_outlier_stats(profile, (fs::path(cfg.out_dir) / "outlier_stats.csv").string());
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "outlier_stats.csv").string() << " ("
            << profile.layers.size() << " layers)\n";
  print_trend(profile);
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg) {
  prepare_out_dir(cfg.out_dir);
  const ResidualStackConfig stack = cfg.stack_config();
  const PrecisionPolicy policy = cfg.parsed_policy(stack.depth);

  // Independence check first: injected i.i.d. errors must satisfy the
  // variance-sum identity, anything else flags a config or code problem.
  PropagationOptions injected;
  injected.mode = ErrorMode::injected;
  const PropagationResult ideal = propagate_errors(stack, policy, cfg.bits, injected);

  const PropagationResult real = propagate_errors(stack, policy, cfg.bits);
  emit_propagation(real, (fs::path(cfg.out_dir) / "propagation.csv").string());

  std::printf("injected-mode Var[eps_L] / sum Var = %.4f (expect ~1)\n", ideal.variance_ratio);
  std::printf("fake-quant    Var[eps_L] / sum Var = %.4f\n", real.variance_ratio);
  std::printf("final error mean %.6g, variance %.6g over %zu layers\n", real.final_error_mean,
              real.final_error_variance, real.error_mean.size());

  if (ideal.variance_ratio < kVarianceRatioLo || ideal.variance_ratio > kVarianceRatioHi) {
    std::cerr << "simulate: injected-mode variance ratio outside [" << kVarianceRatioLo
              << ", " << kVarianceRatioHi << "]\n";
    return kExitInvariant;
  }
  return kExitOk;
}

int cmd_experiment(const RunConfig& cfg) {
  prepare_out_dir(cfg.out_dir);
  const ResidualStackConfig stack = cfg.stack_config();
  const auto methods = default_collapse_methods(cfg.percentile_grid, cfg.k_grid);
  const CollapseResult result = collapse_experiment(stack, methods, cfg.bits);
  const auto rows = build_method_rows(result);
  emit_method_metrics(rows, (fs::path(cfg.out_dir) / "method_metrics.csv").string());

  std::printf("%-18s %-10s %s\n", "method", "accuracy", "delta_vs_ref");
  for (const auto& row : rows) {
    std::printf("%-18s %-10.4f %+.4f\n", row.method.c_str(), row.accuracy, row.delta_vs_ref);
  }

  const auto find = [&](const std::string& label) {
    for (const auto& [name, acc] : result.accuracies) {
      if (name == label) return acc;
    }
    return -1.0;
  };
  const double peg_hi = find("peg_k" + std::to_string(cfg.k_grid.back()));
  const double peg_lo = find("peg_k" + std::to_string(cfg.k_grid.front()));
  const double minmax = find("minmax");
  if (peg_hi >= 0.0 && peg_lo >= 0.0 && minmax >= 0.0) {
    const bool ordered = result.fp32_accuracy >= peg_hi && peg_hi > peg_lo && minmax < peg_hi;
    std::cout << "method ordering fp32 >= peg(K=" << cfg.k_grid.back() << ") > peg(K="
              << cfg.k_grid.front() << "), minmax below: " << (ordered ? "holds" : "VIOLATED")
              << "\n";
  }
  return kExitOk;
}

int cmd_microbench(const RunConfig& cfg) {
  prepare_out_dir(cfg.out_dir);
  const auto rows = run_microbench({}, 500, 100);
  emit_microbench(rows, (fs::path(cfg.out_dir) / "microbench.csv").string());
  for (const auto& row : rows) {
    std::printf("%-20s p50 %12.0f ns   p95 %12.0f ns\n", row.op_label.c_str(), row.p50_ns,
                row.p95_ns);
  }
  return kExitOk;
}

int cmd_run_all(const RunConfig& cfg) {
  prepare_out_dir(cfg.out_dir);

  if (!cfg.dumps.empty()) {
    const int rc = cmd_stats(cfg);
    if (rc != kExitOk) return rc;
  } else {
    const DepthProfile profile = synthetic_profile(cfg);
    emit_outlier_stats(profile, (fs::path(cfg.out_dir) / "outlier_stats.csv").string());
    std::cout << "synthetic depth profile (" << profile.layers.size() << " layers)\n";
    print_trend(profile);
  }

  const int experiment_rc = cmd_experiment(cfg);
  if (experiment_rc != kExitOk) return experiment_rc;

  return cmd_microbench(cfg);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"quantization calibration and outlier-analysis toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig overrides;
  bool seed_set = false, bits_set = false, out_set = false;
  std::uint64_t seed = 0;
  int bits = 8;
  std::string out_dir;
  std::vector<std::string> dumps;

  app.add_option("--config", config_path, "JSON run configuration file");
  app.add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_set = true; });
  app.add_option("--bits", bits, "quantization bit width")
      ->each([&](const std::string&) { bits_set = true; });
  app.add_option("--out", out_dir, "output directory")
      ->each([&](const std::string&) { out_set = true; });
  app.add_option("--dumps", dumps, "activation dump files");

  auto* stats = app.add_subcommand("stats", "depth-wise outlier statistics from dumps");
  auto* simulate = app.add_subcommand("simulate", "residual error propagation");
  auto* experiment = app.add_subcommand("experiment", "collapse experiment with method sweeps");
  auto* microbench = app.add_subcommand("microbench", "op-level latency percentiles");
  auto* run_all = app.add_subcommand("run-all", "full pipeline");
  for (auto* sub : {stats, simulate, experiment, microbench, run_all}) {
    sub->fallthrough();  // global flags may follow the subcommand
  }

  std::vector<const char*> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("quantlab");
  for (const auto& a : args) argv_storage.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv_storage.size()), argv_storage.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (bits_set) cfg.bits = bits;
    if (out_set) cfg.out_dir = out_dir;
    if (!dumps.empty()) cfg.dumps = dumps;
    cfg.validate();

    if (stats->parsed()) return cmd_stats(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (experiment->parsed()) return cmd_experiment(cfg);
    if (microbench->parsed()) return cmd_microbench(cfg);
    if (run_all->parsed()) return cmd_run_all(cfg);
    return kExitUsage;
  } catch (const MalformedHeader& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformedDump;
  } catch (const ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformedDump;
  } catch (const NonFiniteValue& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformedDump;
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace quantlab::cli
