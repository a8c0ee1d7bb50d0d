#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quantlab/errors.hpp"
#include "quantlab/tensor.hpp"

namespace quantlab {

// Depth-wise outlier statistics for one layer. A missing field means the
// statistic was degenerate for that layer (zero variance, zero energy, or a
// single row) rather than an error.
struct LayerStats {
  std::optional<double> mean_variance;  // mean over channels of per-channel variance
  std::optional<double> kurtosis;       // Pearson m4/m2^2 over all values
  std::optional<double> top1_energy;    // share of sum(x^2) in the top 1% channels
};

struct DepthProfile {
  std::vector<std::pair<std::string, LayerStats>> layers;
};

// Population variance per column. Requires rows >= 2.
std::vector<double> per_channel_variance(const ActivationTensor& t);

// Pearson (non-excess) kurtosis m4/m2^2 over all flattened values, with
// 64-bit moment accumulation. Gaussian data gives 3; Rademacher gives 1.
// Requires >= 4 values; throws ZeroVariance on constant input.
double kurtosis(const ActivationTensor& t);

struct TopEnergy {
  double value = 0.0;
  bool degenerate = false;
};

// Fraction of total sum(x^2) held by the top ceil(p_fraction * D) channels
// when channels are ranked by their energy. p_fraction must lie in (0, 1).
TopEnergy top_p_energy(const ActivationTensor& t, double p_fraction);

// All three statistics for one layer; degenerate fields come back empty.
LayerStats compute_layer_stats(const ActivationTensor& t);

// Per-layer stats in input order. Layers are evaluated independently (and
// possibly in parallel, capped by QUANTLAB_THREADS); values are bit-identical
// to serial evaluation. Labels must be unique.
DepthProfile depth_profile(const std::vector<std::pair<std::string, ActivationTensor>>& layers);

// Nondecreasing-trend verdict over a profile, the qualitative shape of the
// depth-wise outlier table. Degenerate entries are skipped.
struct ProfileTrend {
  bool mean_variance_nondecreasing = false;
  bool kurtosis_nondecreasing = false;
  bool top1_energy_nondecreasing = false;
};
ProfileTrend profile_trend(const DepthProfile& profile);

}  // namespace quantlab
