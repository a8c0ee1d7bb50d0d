#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quantlab/quant.hpp"
#include "quantlab/stats.hpp"
#include "quantlab/tensor.hpp"

namespace quantlab {

// Synthetic residual stack: depth x width, heavy-tailed bulk noise plus a
// small set of dominant channels whose scale grows multiplicatively with
// depth. Everything downstream is a pure function of (config, seed).
struct ResidualStackConfig {
  std::size_t depth = 12;
  std::size_t width = 768;
  std::size_t samples = 4096;
  std::vector<std::size_t> dominant_channels;
  double dominance_gain = 1.35;  // per-layer std growth of dominant channels
  double tail_index = 3.0;       // Pareto tail for bulk noise; inf = Gaussian
  double base_std = 1.0;
  std::uint64_t seed = 1000;

  void validate() const;
};

// Picks `count` distinct dominant channel indices deterministically from the
// seed and returns a config with the remaining fields at their defaults.
ResidualStackConfig make_stack_config(std::size_t depth, std::size_t width,
                                      std::size_t samples, std::size_t dominant_count,
                                      double dominance_gain, double tail_index,
                                      std::uint64_t seed);

// Depth-statistics reference: Gaussian bulk, gain 1.35. The dominant tier
// drives kurtosis and energy concentration upward with depth, starting from
// the near-Gaussian embedding layer.
ResidualStackConfig trends_reference_config(std::uint64_t seed = 1000);

// Collapse-experiment reference: Pareto(3) noise, gain 2 over 12 layers. The
// dominant channels are just over 1% of the width, so every high-percentile
// threshold lands inside the dominant band.
ResidualStackConfig collapse_reference_config(std::uint64_t seed = 1000);

// N x D activations for one layer: bulk channels carry symmetric
// Pareto-tailed noise (tail_index) scaled to base_std, Gaussian when
// tail_index is infinite; dominant channels are additionally scaled by
// gain^layer. Deterministic in (seed, layer).
ActivationTensor generate_layer(const ResidualStackConfig& cfg, std::size_t layer);

// --- residual error propagation ---------------------------------------------

enum class ErrorMode {
  fake_quant,  // quantized branch re-reads the quantized state: errors feed forward
  injected,    // clean branch plus i.i.d. zero-mean noise: the independence idealization
};

struct PropagationOptions {
  ErrorMode mode = ErrorMode::fake_quant;
  double injected_error_std = 0.05;
};

struct PropagationResult {
  // index l holds statistics of eps_{l+1} = h_{l+1} - h_hat_{l+1}
  std::vector<double> error_mean;
  std::vector<double> error_variance;
  std::vector<LayerStats> clean_stats;          // of clean post-layer states
  std::vector<double> branch_error_variance;     // Var of each layer's branch error
  double final_error_mean = 0.0;
  double final_error_variance = 0.0;
  double sum_branch_error_variance = 0.0;
  // Var[eps_L] / sum_l Var[branch error]; ~1 under independent injected
  // errors, typically above 1 for real fake-quant errors (structured bias).
  double variance_ratio = 0.0;
};

// Runs h_{l+1} = h_l + f_l(h_l) clean and fake-quantized per the policy.
// f_l is a fixed random near-orthogonal map (Gaussian / sqrt(D)) with the
// dominance gain applied to the dominant columns of its output.
PropagationResult propagate_errors(const ResidualStackConfig& cfg,
                                   const PrecisionPolicy& policy, int bits,
                                   const PropagationOptions& options = {});

// --- collapse experiment -----------------------------------------------------

struct CollapseMethod {
  std::string label;
  Directive directive;
};

// retain / minmax / percentile grid / peg grid, in that order.
std::vector<CollapseMethod> default_collapse_methods(
    const std::vector<double>& percentile_grid, const std::vector<std::size_t>& k_grid);

struct CollapseResult {
  double fp32_accuracy = 0.0;
  std::vector<std::pair<std::string, double>> accuracies;  // per method, input order
};

// Builds a balanced binary probe task on the final-layer activations: the
// label is a linear function of the dominant channels plus noise carried by
// mid-magnitude bulk channels. A ridge probe (lambda = 1e-6) is fit on the
// clean activations once, then scored against each method's fake-quantized
// activations. Throws SingularProbe on degenerate configurations.
CollapseResult collapse_experiment(const ResidualStackConfig& cfg,
                                   const std::vector<CollapseMethod>& methods, int bits);

}  // namespace quantlab
