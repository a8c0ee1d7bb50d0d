#include "quantlab/simulator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "quantlab/rng.hpp"

namespace quantlab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Share of probe-label variance carried by the dominant channels. Small but
// nonzero: min-max keeps exactly this much, percentile clipping keeps less.
constexpr double kDominantShare = 0.03;

constexpr double kRidgeLambda = 1e-6;

ActivationTensor to_tensor(const RowMatrix& m) {
  std::vector<double> values(m.data(), m.data() + m.size());
  return ActivationTensor(static_cast<std::size_t>(m.rows()),
                          static_cast<std::size_t>(m.cols()), std::move(values));
}

RowMatrix to_matrix(const ActivationTensor& t) {
  return Eigen::Map<const RowMatrix>(t.values().data(),
                                     static_cast<Eigen::Index>(t.rows()),
                                     static_cast<Eigen::Index>(t.cols()));
}

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;
};

MeanVar mean_variance_of(const RowMatrix& m) {
  const double n = static_cast<double>(m.size());
  const double mean = m.sum() / n;
  const double var = (m.array() - mean).square().sum() / n;
  return {mean, var};
}

// Unit-variance noise draw. Pareto magnitudes are normalized by the analytic
// std sqrt(alpha/(alpha-2)) when it exists; at alpha <= 2 the variance
// diverges and the raw draw is used. Non-finite alpha selects the Gaussian
// fallback (the alpha -> inf limit).
double draw_noise(Rng& rng, double alpha) {
  if (!std::isfinite(alpha)) return rng.gaussian();
  if (alpha > 2.0) {
    return rng.pareto_symmetric(alpha) / std::sqrt(alpha / (alpha - 2.0));
  }
  return rng.pareto_symmetric(alpha);
}

}  // namespace

void ResidualStackConfig::validate() const {
  if (depth < 1) throw InvalidArgument("stack depth must be >= 1");
  if (width < 1) throw InvalidArgument("stack width must be >= 1");
  if (samples < 1) throw InvalidArgument("sample count must be >= 1");
  if (!(dominance_gain >= 1.0)) throw InvalidArgument("dominance gain must be >= 1");
  if (!(tail_index > 0.0)) throw InvalidArgument("tail index must be > 0");
  if (!(base_std > 0.0)) throw InvalidArgument("base std must be > 0");
  if (dominant_channels.size() > width) {
    throw InvalidArgument("dominant set larger than width");
  }
  std::vector<bool> seen(width, false);
  for (std::size_t ch : dominant_channels) {
    if (ch >= width || seen[ch]) {
      throw InvalidArgument("dominant channel indices must be distinct and < width");
    }
    seen[ch] = true;
  }
}

ResidualStackConfig make_stack_config(std::size_t depth, std::size_t width,
                                      std::size_t samples, std::size_t dominant_count,
                                      double dominance_gain, double tail_index,
                                      std::uint64_t seed) {
  ResidualStackConfig cfg;
  cfg.depth = depth;
  cfg.width = width;
  cfg.samples = samples;
  cfg.dominance_gain = dominance_gain;
  cfg.tail_index = tail_index;
  cfg.seed = seed;

  // Partial Fisher-Yates over channel indices.
  std::vector<std::size_t> indices(width);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "dominant"));
  dominant_count = std::min(dominant_count, width);
  for (std::size_t i = 0; i < dominant_count; ++i) {
    const std::size_t j = i + rng.below(indices.size() - i);
    std::swap(indices[i], indices[j]);
  }
  cfg.dominant_channels.assign(indices.begin(),
                               indices.begin() + static_cast<std::ptrdiff_t>(dominant_count));
  std::sort(cfg.dominant_channels.begin(), cfg.dominant_channels.end());
  cfg.validate();
  return cfg;
}

ResidualStackConfig trends_reference_config(std::uint64_t seed) {
  return make_stack_config(12, 768, 4096, 8, 1.35,
                           std::numeric_limits<double>::infinity(), seed);
}

ResidualStackConfig collapse_reference_config(std::uint64_t seed) {
  return make_stack_config(12, 768, 4096, 8, 2.5, 3.0, seed);
}

ActivationTensor generate_layer(const ResidualStackConfig& cfg, std::size_t layer) {
  cfg.validate();
  if (layer >= cfg.depth) throw InvalidArgument("layer index out of range");

  std::vector<bool> dominant(cfg.width, false);
  for (std::size_t ch : cfg.dominant_channels) dominant[ch] = true;
  const double gain = std::pow(cfg.dominance_gain, static_cast<double>(layer));

  Rng rng(derive_seed(cfg.seed, "layer", layer));
  std::vector<double> values(cfg.samples * cfg.width);
  std::size_t i = 0;
  for (std::size_t r = 0; r < cfg.samples; ++r) {
    for (std::size_t c = 0; c < cfg.width; ++c, ++i) {
      double v = draw_noise(rng, cfg.tail_index) * cfg.base_std;
      if (dominant[c]) v *= gain;
      values[i] = v;
    }
  }
  return ActivationTensor(cfg.samples, cfg.width, std::move(values));
}

PropagationResult propagate_errors(const ResidualStackConfig& cfg,
                                   const PrecisionPolicy& policy, int bits,
                                   const PropagationOptions& options) {
  cfg.validate();
  if (policy.size() != cfg.depth) {
    throw PolicyLengthMismatch("policy length " + std::to_string(policy.size()) +
                               " != stack depth " + std::to_string(cfg.depth));
  }

  const auto n = static_cast<Eigen::Index>(cfg.samples);
  const auto d = static_cast<Eigen::Index>(cfg.width);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.width));

  RowMatrix h = to_matrix(generate_layer(cfg, 0));
  RowMatrix h_hat = h;

  PropagationResult result;
  result.error_mean.reserve(cfg.depth);
  result.error_variance.reserve(cfg.depth);
  result.branch_error_variance.reserve(cfg.depth);
  result.clean_stats.reserve(cfg.depth);

  for (std::size_t l = 0; l < cfg.depth; ++l) {
    // Fixed random near-orthogonal map; dominance gain on the dominant
    // columns of the branch output.
    RowMatrix w(d, d);
    {
      Rng rng(derive_seed(cfg.seed, "resmap", l));
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) w(r, c) = rng.gaussian() * inv_sqrt_d;
      }
    }

    RowMatrix branch = h * w;
    for (std::size_t ch : cfg.dominant_channels) {
      branch.col(static_cast<Eigen::Index>(ch)) *= cfg.dominance_gain;
    }

    RowMatrix branch_hat;
    if (options.mode == ErrorMode::injected) {
      // Idealized recursion: the quantized path reuses the clean branch and
      // receives independent zero-mean noise, so Var[eps_L] = sum of layer
      // error variances.
      branch_hat = branch;
      Rng rng(derive_seed(cfg.seed, "inject", l));
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
          branch_hat(r, c) += rng.gaussian() * options.injected_error_std;
        }
      }
    } else {
      RowMatrix branch_q_input = h_hat * w;
      for (std::size_t ch : cfg.dominant_channels) {
        branch_q_input.col(static_cast<Eigen::Index>(ch)) *= cfg.dominance_gain;
      }
      branch_hat = to_matrix(apply_directive(to_tensor(branch_q_input), policy[l], bits));
    }

    const MeanVar branch_err = mean_variance_of(RowMatrix(branch_hat - branch));
    result.branch_error_variance.push_back(branch_err.variance);

    h += branch;
    h_hat += branch_hat;

    const MeanVar eps = mean_variance_of(RowMatrix(h - h_hat));
    result.error_mean.push_back(eps.mean);
    result.error_variance.push_back(eps.variance);
    result.clean_stats.push_back(compute_layer_stats(to_tensor(h)));
  }

  result.final_error_mean = result.error_mean.back();
  result.final_error_variance = result.error_variance.back();
  result.sum_branch_error_variance =
      std::accumulate(result.branch_error_variance.begin(),
                      result.branch_error_variance.end(), 0.0);
  result.variance_ratio = result.sum_branch_error_variance > 0.0
                              ? result.final_error_variance / result.sum_branch_error_variance
                              : 0.0;
  return result;
}

std::vector<CollapseMethod> default_collapse_methods(
    const std::vector<double>& percentile_grid, const std::vector<std::size_t>& k_grid) {
  std::vector<CollapseMethod> methods;
  methods.push_back({"retain", Directive::retain()});
  methods.push_back({"minmax", Directive::minmax()});
  for (double p : percentile_grid) {
    char label[32];
    std::snprintf(label, sizeof label, "percentile_%.2f", p);
    methods.push_back({label, Directive::with_percentile(p)});
  }
  for (std::size_t k : k_grid) {
    methods.push_back({"peg_k" + std::to_string(k), Directive::peg(k)});
  }
  return methods;
}

CollapseResult collapse_experiment(const ResidualStackConfig& cfg,
                                   const std::vector<CollapseMethod>& methods, int bits) {
  cfg.validate();
  if (methods.empty()) throw InvalidArgument("method list must be non-empty");
  if (cfg.samples < 2) throw SingularProbe("probe needs at least 2 samples");

  const ActivationTensor x = generate_layer(cfg, cfg.depth - 1);
  const std::size_t d = cfg.width;
  const std::size_t n = cfg.samples;

  // Magnitude ranking, identical to the statistic PEG sorts by.
  const std::vector<double> stats = channel_abs_max(x);
  const std::vector<std::size_t> by_magnitude = peg_partition(stats, 1).permutation;

  std::vector<bool> is_dominant(d, false);
  for (std::size_t ch : cfg.dominant_channels) is_dominant[ch] = true;

  // The label reads the dominant channels plus noise carried by ordinary
  // mid-magnitude channels (second quartile of the magnitude ranking). The
  // top quartile is left unused: those are the outlier tier and whatever
  // bulk channels happened to draw extreme values.
  std::vector<std::size_t> support;
  for (std::size_t p = d / 4; p < d / 2; ++p) {
    const std::size_t ch = by_magnitude[p];
    if (!is_dominant[ch]) support.push_back(ch);
  }

  const double dominant_share = cfg.dominant_channels.empty() ? 0.0 : kDominantShare;
  const double bulk_share = support.empty() ? 0.0 : 1.0 - dominant_share;
  if (dominant_share == 0.0 && bulk_share == 0.0) {
    throw SingularProbe("no signal channels available");
  }

  const double dominant_std =
      cfg.base_std * std::pow(cfg.dominance_gain, static_cast<double>(cfg.depth - 1));

  std::vector<double> weights(d, 0.0);
  Rng rng(derive_seed(cfg.seed, "probe"));
  if (dominant_share > 0.0) {
    const double w = std::sqrt(dominant_share / static_cast<double>(cfg.dominant_channels.size())) /
                     dominant_std;
    for (std::size_t ch : cfg.dominant_channels) {
      weights[ch] = (rng.next_u64() & 1ull) ? w : -w;
    }
  }
  if (bulk_share > 0.0) {
    const double v =
        std::sqrt(bulk_share / static_cast<double>(support.size())) / cfg.base_std;
    for (std::size_t ch : support) {
      weights[ch] = (rng.next_u64() & 1ull) ? v : -v;
    }
  }

  std::vector<double> score(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += weights[c] * x(r, c);
    score[r] = s;
  }

  // Median threshold keeps the classes balanced, so chance level is 0.5.
  std::vector<double> sorted_score = score;
  std::sort(sorted_score.begin(), sorted_score.end());
  const double median = (n % 2 == 1)
                            ? sorted_score[n / 2]
                            : 0.5 * (sorted_score[n / 2 - 1] + sorted_score[n / 2]);

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::size_t positives = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const bool pos = score[r] > median;
    y(static_cast<Eigen::Index>(r)) = pos ? 1.0 : -1.0;
    positives += pos ? 1 : 0;
  }
  if (positives == 0 || positives == n) {
    throw SingularProbe("labels collapsed to a single class");
  }

  // Closed-form ridge probe with intercept, fit once on clean activations.
  const auto ni = static_cast<Eigen::Index>(n);
  const auto di = static_cast<Eigen::Index>(d);
  RowMatrix xb(ni, di + 1);
  xb.leftCols(di) = to_matrix(x);
  xb.col(di).setOnes();

  Eigen::MatrixXd gram = xb.transpose() * xb;
  gram.diagonal().array() += kRidgeLambda;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw SingularProbe("ridge system not positive definite");
  const Eigen::VectorXd beta = llt.solve(xb.transpose() * y);
  if (!beta.allFinite()) throw SingularProbe("probe weights are not finite");

  const auto accuracy_on = [&](const ActivationTensor& activations) {
    RowMatrix features(ni, di + 1);
    features.leftCols(di) = to_matrix(activations);
    features.col(di).setOnes();
    const Eigen::VectorXd predicted = features * beta;
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < ni; ++r) {
      const double label = predicted(r) >= 0.0 ? 1.0 : -1.0;
      correct += (label == y(r)) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
  };

  CollapseResult result;
  result.fp32_accuracy = accuracy_on(x);
  result.accuracies.reserve(methods.size());
  for (const auto& method : methods) {
    const ActivationTensor transformed = apply_directive(x, method.directive, bits);
    result.accuracies.emplace_back(method.label, accuracy_on(transformed));
  }
  return result;
}

}  // namespace quantlab
