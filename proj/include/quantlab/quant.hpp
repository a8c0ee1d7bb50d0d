#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "quantlab/errors.hpp"
#include "quantlab/tensor.hpp"

namespace quantlab {

// Scale used when a tensor is all zero, so calibration stays total. The
// degenerate flag on QuantParams lets callers detect the condition.
inline constexpr double kDegenerateScale = 0x1p-24;

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 16;

// Symmetric affine quantization parameters. zero_point is always 0; the
// representable range is [-(2^(b-1)-1), 2^(b-1)-1], so -128 is unused at b=8.
struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;
  int bits = 8;
  bool degenerate = false;

  std::int32_t qmax() const { return (std::int32_t{1} << (bits - 1)) - 1; }
};

struct QuantizedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> q;  // row-major, same shape as the source
  QuantParams params;
};

// Channel grouping for per-embedding-group quantization. permutation[p] is
// the original channel index holding sorted rank p (descending magnitude
// statistic, ties by ascending original index). boundaries has K+1 offsets
// over sorted ranks; group g covers ranks [boundaries[g], boundaries[g+1]).
// Groups are contiguous rank ranges, so each group spans channels of similar
// magnitude and group sizes differ by at most one.
struct GroupScheme {
  std::vector<std::size_t> permutation;
  std::vector<std::size_t> boundaries;
  std::vector<QuantParams> group_params;

  std::size_t group_count() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  std::vector<std::size_t> inverse_permutation() const;
};

// Throws InvalidArgument if the grouping invariants are broken.
void validate_scheme(const GroupScheme& scheme, std::size_t channels);

// --- calibration ---------------------------------------------------------

// scale = max(|x|) / (2^(b-1) - 1); all-zero tensors get the degenerate scale.
QuantParams scale_minmax(const ActivationTensor& t, int bits);

// scale = percentile_p(|x|) / (2^(b-1) - 1), linear interpolation at rank
// (p/100)(n-1) over the sorted absolute values. p = 100 reduces bit-exactly
// to scale_minmax. Throws DegenerateScale when the threshold is zero.
QuantParams scale_percentile(const ActivationTensor& t, double percentile, int bits);

// --- quantize / dequantize -------------------------------------------------

// q = clamp(round(x/s), -qmax, qmax), rounding half away from zero.
QuantizedTensor quantize_affine(const ActivationTensor& t, const QuantParams& params);

// x_hat = s * (q - z)
ActivationTensor dequantize(const QuantizedTensor& qt);

// dequantize(quantize_affine(t)). For |x| <= s*qmax, |x - x_hat| <= s/2.
ActivationTensor fake_quant(const ActivationTensor& t, const QuantParams& params);

// --- per-embedding-group (PEG) ---------------------------------------------

// Sorts channels by the given magnitude statistic (descending, ties by
// ascending index) and splits the sorted order into K contiguous groups.
// group_params is left empty. Throws InvalidK for K < 1 or K > D.
GroupScheme peg_partition(std::span<const double> channel_stats, std::size_t k);

// Per-channel max|x|; this is the statistic PEG sorts by and what each
// group's min-max scale will see.
std::vector<double> channel_abs_max(const ActivationTensor& t);

// Group-wise min-max fake quantization. Channel order of the output equals
// the input (the permutation is applied and inverted internally). K = 1 is
// bitwise identical to fake_quant under scale_minmax.
std::pair<ActivationTensor, GroupScheme> peg_fake_quant(const ActivationTensor& t,
                                                        std::size_t k, int bits);

// --- diagnostics -----------------------------------------------------------

// rho = sigma_bulk / max|x| where sigma_bulk is the standard deviation of
// values with |x| <= percentile_99(|x|). Near-zero rho means min-max scaling
// leaves almost no resolution for the bulk of the distribution.
struct ResolutionFactor {
  double value = 0.0;
  bool degenerate = false;
};
ResolutionFactor resolution_factor(const ActivationTensor& t);

// --- precision policies ------------------------------------------------------

// One per-layer directive. Retain means no fake quantization is applied,
// which models keeping that layer in higher precision.
struct Directive {
  enum class Kind { retain, minmax, percentile, peg };

  Kind kind = Kind::retain;
  double percentile = 99.9;  // for Kind::percentile
  std::size_t groups = 1;    // for Kind::peg

  static Directive retain() { return {}; }
  static Directive minmax() { return {Kind::minmax, 0.0, 1}; }
  static Directive with_percentile(double p) { return {Kind::percentile, p, 1}; }
  static Directive peg(std::size_t k) { return {Kind::peg, 0.0, k}; }
};

using PrecisionPolicy = std::vector<Directive>;

// Applies one directive to one tensor. A DegenerateScale from percentile
// calibration falls back to the degenerate epsilon scale here.
ActivationTensor apply_directive(const ActivationTensor& t, const Directive& d, int bits);

// Applies policy[i] to layers[i]. Throws PolicyLengthMismatch if the policy
// length differs from the layer count.
std::vector<ActivationTensor> apply_policy(const std::vector<ActivationTensor>& layers,
                                           const PrecisionPolicy& policy, int bits);

}  // namespace quantlab
