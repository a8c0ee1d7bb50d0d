#include "quantlab/quant.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace quantlab {

namespace {

void check_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw InvalidArgument("bit width must be in [2, 16], got " + std::to_string(bits));
  }
}

double abs_max(const ActivationTensor& t) {
  double amax = 0.0;
  for (double v : t.values()) amax = std::max(amax, std::abs(v));
  return amax;
}

}  // namespace

std::vector<std::size_t> GroupScheme::inverse_permutation() const {
  std::vector<std::size_t> inv(permutation.size());
  for (std::size_t p = 0; p < permutation.size(); ++p) inv[permutation[p]] = p;
  return inv;
}

void validate_scheme(const GroupScheme& scheme, std::size_t channels) {
  if (scheme.permutation.size() != channels) {
    throw InvalidArgument("scheme permutation size mismatch");
  }
  std::vector<bool> seen(channels, false);
  for (std::size_t ch : scheme.permutation) {
    if (ch >= channels || seen[ch]) throw InvalidArgument("scheme permutation is not a bijection");
    seen[ch] = true;
  }
  if (scheme.boundaries.size() < 2 || scheme.boundaries.front() != 0 ||
      scheme.boundaries.back() != channels) {
    throw InvalidArgument("scheme boundaries must cover [0, D)");
  }
  std::size_t min_size = channels, max_size = 0;
  for (std::size_t g = 0; g + 1 < scheme.boundaries.size(); ++g) {
    if (scheme.boundaries[g + 1] <= scheme.boundaries[g]) {
      throw InvalidArgument("scheme boundaries must be strictly increasing");
    }
    const std::size_t size = scheme.boundaries[g + 1] - scheme.boundaries[g];
    min_size = std::min(min_size, size);
    max_size = std::max(max_size, size);
  }
  if (max_size - min_size > 1) {
    throw InvalidArgument("group sizes may differ by at most 1");
  }
}

QuantParams scale_minmax(const ActivationTensor& t, int bits) {
  check_bits(bits);
  QuantParams params;
  params.bits = bits;
  const double amax = abs_max(t);
  if (amax == 0.0) {
    params.scale = kDegenerateScale;
    params.degenerate = true;
  } else {
    params.scale = amax / static_cast<double>(params.qmax());
  }
  return params;
}

QuantParams scale_percentile(const ActivationTensor& t, double percentile, int bits) {
  check_bits(bits);
  if (!(percentile > 0.0) || percentile > 100.0) {
    throw InvalidArgument("percentile must lie in (0, 100]");
  }
  std::vector<double> magnitudes(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) magnitudes[i] = std::abs(t.values()[i]);
  std::sort(magnitudes.begin(), magnitudes.end());

  const std::size_t n = magnitudes.size();
  const double rank = (percentile / 100.0) * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  double threshold = magnitudes[lo];
  if (frac > 0.0 && lo + 1 < n) {
    threshold += frac * (magnitudes[lo + 1] - magnitudes[lo]);
  }
  if (threshold == 0.0) {
    throw DegenerateScale("percentile threshold is zero");
  }
  QuantParams params;
  params.bits = bits;
  params.scale = threshold / static_cast<double>(params.qmax());
  return params;
}

QuantizedTensor quantize_affine(const ActivationTensor& t, const QuantParams& params) {
  check_bits(params.bits);
  if (!(params.scale > 0.0)) throw InvalidArgument("scale must be positive");
  const double qmax = static_cast<double>(params.qmax());

  QuantizedTensor out;
  out.rows = t.rows();
  out.cols = t.cols();
  out.params = params;
  out.q.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    // std::round is round-half-away-from-zero.
    const double level = std::round(t.values()[i] / params.scale);
    out.q[i] = static_cast<std::int32_t>(std::clamp(level, -qmax, qmax));
  }
  return out;
}

ActivationTensor dequantize(const QuantizedTensor& qt) {
  std::vector<double> values(qt.q.size());
  for (std::size_t i = 0; i < qt.q.size(); ++i) {
    values[i] = qt.params.scale * static_cast<double>(qt.q[i] - qt.params.zero_point);
  }
  return ActivationTensor(qt.rows, qt.cols, std::move(values));
}

ActivationTensor fake_quant(const ActivationTensor& t, const QuantParams& params) {
  return dequantize(quantize_affine(t, params));
}

std::vector<double> channel_abs_max(const ActivationTensor& t) {
  std::vector<double> stats(t.cols(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      stats[c] = std::max(stats[c], std::abs(t(r, c)));
    }
  }
  return stats;
}

GroupScheme peg_partition(std::span<const double> channel_stats, std::size_t k) {
  const std::size_t channels = channel_stats.size();
  if (k < 1 || k > channels) {
    throw InvalidK("group count must lie in [1, D], got " + std::to_string(k));
  }

  GroupScheme scheme;
  scheme.permutation.resize(channels);
  std::iota(scheme.permutation.begin(), scheme.permutation.end(), std::size_t{0});
  std::stable_sort(scheme.permutation.begin(), scheme.permutation.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (channel_stats[a] != channel_stats[b]) {
                       return channel_stats[a] > channel_stats[b];
                     }
                     return a < b;
                   });

  // Contiguous ranges over the sorted order: similar-magnitude channels share
  // a group, so the outlier tier cannot poison every group's scale. The first
  // (channels % k) groups take the extra channel.
  scheme.boundaries.resize(k + 1);
  const std::size_t base = channels / k;
  const std::size_t extra = channels % k;
  scheme.boundaries[0] = 0;
  for (std::size_t g = 0; g < k; ++g) {
    scheme.boundaries[g + 1] = scheme.boundaries[g] + base + (g < extra ? 1 : 0);
  }
  return scheme;
}

std::pair<ActivationTensor, GroupScheme> peg_fake_quant(const ActivationTensor& t,
                                                        std::size_t k, int bits) {
  check_bits(bits);
  const std::vector<double> stats = channel_abs_max(t);
  GroupScheme scheme = peg_partition(stats, k);

  scheme.group_params.reserve(scheme.group_count());
  std::vector<double> out = t.values();
  const std::size_t cols = t.cols();

  for (std::size_t g = 0; g < scheme.group_count(); ++g) {
    double amax = 0.0;
    for (std::size_t p = scheme.boundaries[g]; p < scheme.boundaries[g + 1]; ++p) {
      amax = std::max(amax, stats[scheme.permutation[p]]);
    }
    QuantParams params;
    params.bits = bits;
    if (amax == 0.0) {
      params.scale = kDegenerateScale;
      params.degenerate = true;
    } else {
      params.scale = amax / static_cast<double>(params.qmax());
    }
    const double qmax = static_cast<double>(params.qmax());

    // Channels are addressed through the permutation, so writing results back
    // to the original column positions is exactly the inverse permutation.
    for (std::size_t p = scheme.boundaries[g]; p < scheme.boundaries[g + 1]; ++p) {
      const std::size_t ch = scheme.permutation[p];
      for (std::size_t r = 0; r < t.rows(); ++r) {
        const double level =
            std::clamp(std::round(t(r, ch) / params.scale), -qmax, qmax);
        out[r * cols + ch] = params.scale * level;
      }
    }
    scheme.group_params.push_back(params);
  }

  return {ActivationTensor(t.rows(), t.cols(), std::move(out)), std::move(scheme)};
}

ResolutionFactor resolution_factor(const ActivationTensor& t) {
  if (t.size() < 2) throw InvalidArgument("resolution_factor needs at least 2 values");

  std::vector<double> magnitudes(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) magnitudes[i] = std::abs(t.values()[i]);
  std::vector<double> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  const double amax = sorted.back();
  if (amax == 0.0) return {0.0, true};

  const std::size_t n = sorted.size();
  const double rank = 0.99 * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  double cutoff = sorted[lo];
  if (frac > 0.0 && lo + 1 < n) cutoff += frac * (sorted[lo + 1] - sorted[lo]);

  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (magnitudes[i] <= cutoff) {
      sum += t.values()[i];
      sum_sq += t.values()[i] * t.values()[i];
      ++count;
    }
  }
  if (count == 0) return {0.0, true};
  const double mean = sum / static_cast<double>(count);
  const double variance = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
  const double sigma_bulk = std::sqrt(variance);
  if (sigma_bulk == 0.0) return {0.0, true};
  return {sigma_bulk / amax, false};
}

ActivationTensor apply_directive(const ActivationTensor& t, const Directive& d, int bits) {
  switch (d.kind) {
    case Directive::Kind::retain:
      return t;
    case Directive::Kind::minmax:
      return fake_quant(t, scale_minmax(t, bits));
    case Directive::Kind::percentile: {
      QuantParams params;
      try {
        params = scale_percentile(t, d.percentile, bits);
      } catch (const DegenerateScale&) {
        params.bits = bits;
        params.scale = kDegenerateScale;
        params.degenerate = true;
      }
      return fake_quant(t, params);
    }
    case Directive::Kind::peg:
      return peg_fake_quant(t, d.groups, bits).first;
  }
  throw InvalidArgument("unknown directive kind");
}

std::vector<ActivationTensor> apply_policy(const std::vector<ActivationTensor>& layers,
                                           const PrecisionPolicy& policy, int bits) {
  if (layers.size() != policy.size()) {
    throw PolicyLengthMismatch("policy length " + std::to_string(policy.size()) +
                               " != layer count " + std::to_string(layers.size()));
  }
  std::vector<ActivationTensor> out;
  out.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.push_back(apply_directive(layers[i], policy[i], bits));
  }
  return out;
}

}  // namespace quantlab
