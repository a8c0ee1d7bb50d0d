#pragma once

#include <string>
#include <vector>

#include "quantlab/simulator.hpp"
#include "quantlab/stats.hpp"

namespace quantlab {

struct MethodMetricsRow {
  std::string method;
  double accuracy = 0.0;
  double delta_vs_ref = 0.0;  // accuracy - reference accuracy, exact
};

// fp32 reference row first, then one row per method in result order.
std::vector<MethodMetricsRow> build_method_rows(const CollapseResult& result);

// CSV `method,accuracy,delta_vs_ref`, 6 decimals, LF endings, input order.
// Requires a zero-delta reference row. Writes are atomic (temp + rename).
void emit_method_metrics(const std::vector<MethodMetricsRow>& rows, const std::string& path);

// CSV `layer,mean_variance,kurtosis,top1_energy`; degenerate statistics are
// rendered as empty fields.
void emit_outlier_stats(const DepthProfile& profile, const std::string& path);

struct MicrobenchRow {
  std::string op_label;
  double p50_ns = 0.0;
  double p95_ns = 0.0;
  std::size_t iterations = 0;
};

// Wall-clock timing of quant-core ops on a fixed reference tensor. Warmup
// iterations run first and are excluded; p50/p95 come from the sorted timed
// iterations. Empty selection benchmarks every op. iterations must be >= 100
// and warmup >= 1.
std::vector<MicrobenchRow> run_microbench(const std::vector<std::string>& ops,
                                          std::size_t iterations, std::size_t warmup);

std::vector<std::string> microbench_op_labels();

// CSV `op_label,p50_ns,p95_ns,iterations`.
void emit_microbench(const std::vector<MicrobenchRow>& rows, const std::string& path);

// CSV `layer,error_mean,error_variance,clean_mean_variance,clean_kurtosis,clean_top1_energy`.
void emit_propagation(const PropagationResult& result, const std::string& path);

}  // namespace quantlab
