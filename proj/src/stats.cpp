#include "quantlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "quantlab/parallel.hpp"

namespace quantlab {

std::vector<double> per_channel_variance(const ActivationTensor& t) {
  if (t.rows() < 2) {
    throw InsufficientRows("per-channel variance needs at least 2 rows");
  }
  // Welford per column, streaming over rows.
  std::vector<double> mean(t.cols(), 0.0);
  std::vector<double> m2(t.cols(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double n = static_cast<double>(r + 1);
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const double x = t(r, c);
      const double delta = x - mean[c];
      mean[c] += delta / n;
      m2[c] += delta * (x - mean[c]);
    }
  }
  std::vector<double> variance(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) {
    variance[c] = m2[c] / static_cast<double>(t.rows());
  }
  return variance;
}

double kurtosis(const ActivationTensor& t) {
  if (t.size() < 4) throw InvalidArgument("kurtosis needs at least 4 values");
  const double n = static_cast<double>(t.size());

  double sum = 0.0;
  for (double v : t.values()) sum += v;
  const double mean = sum / n;

  double m2 = 0.0, m4 = 0.0;
  for (double v : t.values()) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) throw ZeroVariance("kurtosis undefined for constant input");
  return m4 / (m2 * m2);
}

TopEnergy top_p_energy(const ActivationTensor& t, double p_fraction) {
  if (!(p_fraction > 0.0) || !(p_fraction < 1.0)) {
    throw InvalidArgument("p_fraction must lie in (0, 1)");
  }
  std::vector<double> energy(t.cols(), 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const double sq = t(r, c) * t(r, c);
      energy[c] += sq;
    }
  }
  for (double e : energy) total += e;
  if (total == 0.0) return {0.0, true};

  const auto count = static_cast<std::size_t>(
      std::ceil(p_fraction * static_cast<double>(t.cols())));
  std::vector<double> sorted = energy;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(count - 1),
                   sorted.end(), std::greater<double>());
  double top = 0.0;
  for (std::size_t i = 0; i < count; ++i) top += sorted[i];
  return {top / total, false};
}

LayerStats compute_layer_stats(const ActivationTensor& t) {
  LayerStats stats;
  if (t.rows() >= 2) {
    const std::vector<double> variance = per_channel_variance(t);
    double sum = 0.0;
    for (double v : variance) sum += v;
    stats.mean_variance = sum / static_cast<double>(variance.size());
  }
  try {
    if (t.size() >= 4) stats.kurtosis = kurtosis(t);
  } catch (const ZeroVariance&) {
    // left empty
  }
  const TopEnergy top = top_p_energy(t, 0.01);
  if (!top.degenerate) stats.top1_energy = top.value;
  return stats;
}

DepthProfile depth_profile(
    const std::vector<std::pair<std::string, ActivationTensor>>& layers) {
  std::set<std::string> labels;
  for (const auto& [label, tensor] : layers) {
    if (!labels.insert(label).second) {
      throw InvalidArgument("duplicate layer label: " + label);
    }
  }
  DepthProfile profile;
  profile.layers.resize(layers.size());
  parallel_for_index(layers.size(), [&](std::size_t i) {
    profile.layers[i] = {layers[i].first, compute_layer_stats(layers[i].second)};
  });
  return profile;
}

ProfileTrend profile_trend(const DepthProfile& profile) {
  ProfileTrend trend{true, true, true};
  const LayerStats* prev = nullptr;
  for (const auto& [label, stats] : profile.layers) {
    if (prev) {
      if (prev->mean_variance && stats.mean_variance &&
          *stats.mean_variance < *prev->mean_variance) {
        trend.mean_variance_nondecreasing = false;
      }
      if (prev->kurtosis && stats.kurtosis && *stats.kurtosis < *prev->kurtosis) {
        trend.kurtosis_nondecreasing = false;
      }
      if (prev->top1_energy && stats.top1_energy &&
          *stats.top1_energy < *prev->top1_energy) {
        trend.top1_energy_nondecreasing = false;
      }
    }
    prev = &stats;
  }
  return trend;
}

}  // namespace quantlab
