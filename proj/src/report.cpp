#include "quantlab/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "quantlab/quant.hpp"
#include "quantlab/rng.hpp"

namespace quantlab {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string optional6(const std::optional<double>& v) {
  return v ? fixed6(*v) : std::string();
}

// Write-to-temp then rename, so a failed run never leaves a partial CSV.
void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw IoFailure("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoFailure("rename failed for " + path);
  }
}

// Fixed 256x768 Gaussian reference tensor shared by all benchmarked ops.
const ActivationTensor& microbench_tensor() {
  static const ActivationTensor tensor = [] {
    Rng rng(derive_seed(0xBE5Cull, "microbench"));
    std::vector<double> values(256 * 768);
    for (double& v : values) v = rng.gaussian();
    return ActivationTensor(256, 768, std::move(values));
  }();
  return tensor;
}

struct BenchOp {
  const char* label;
  std::function<double(const ActivationTensor&)> run;  // returns a sink value
};

const std::vector<BenchOp>& bench_ops() {
  static const std::vector<BenchOp> ops = {
      {"scale_minmax",
       [](const ActivationTensor& t) { return scale_minmax(t, 8).scale; }},
      {"scale_percentile",
       [](const ActivationTensor& t) { return scale_percentile(t, 99.9, 8).scale; }},
      {"quantize_affine",
       [](const ActivationTensor& t) {
         static const QuantParams params = scale_minmax(microbench_tensor(), 8);
         return static_cast<double>(quantize_affine(t, params).q.back());
       }},
      {"dequantize",
       [](const ActivationTensor& t) {
         static const QuantizedTensor qt = quantize_affine(
             microbench_tensor(), scale_minmax(microbench_tensor(), 8));
         (void)t;
         return dequantize(qt).values().back();
       }},
      {"fake_quant",
       [](const ActivationTensor& t) {
         return fake_quant(t, scale_minmax(t, 8)).values().back();
       }},
      {"peg_fake_quant_k4",
       [](const ActivationTensor& t) { return peg_fake_quant(t, 4, 8).first.values().back(); }},
  };
  return ops;
}

double percentile_of_sorted(const std::vector<double>& sorted, double p) {
  const double rank = (p / 100.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  double v = sorted[lo];
  if (frac > 0.0 && lo + 1 < sorted.size()) v += frac * (sorted[lo + 1] - sorted[lo]);
  return v;
}

}  // namespace

std::vector<MethodMetricsRow> build_method_rows(const CollapseResult& result) {
  std::vector<MethodMetricsRow> rows;
  rows.reserve(result.accuracies.size() + 1);
  rows.push_back({"fp32", result.fp32_accuracy, 0.0});
  for (const auto& [label, accuracy] : result.accuracies) {
    rows.push_back({label, accuracy, accuracy - result.fp32_accuracy});
  }
  return rows;
}

void emit_method_metrics(const std::vector<MethodMetricsRow>& rows, const std::string& path) {
  const bool has_reference =
      std::any_of(rows.begin(), rows.end(),
                  [](const MethodMetricsRow& r) { return r.delta_vs_ref == 0.0; });
  if (!has_reference) throw InvalidArgument("method metrics need a reference row");

  std::string out = "method,accuracy,delta_vs_ref\n";
  for (const auto& row : rows) {
    out += row.method;
    out += ',';
    out += fixed6(row.accuracy);
    out += ',';
    out += fixed6(row.delta_vs_ref);
    out += '\n';
  }
  atomic_write(path, out);
}

void emit_outlier_stats(const DepthProfile& profile, const std::string& path) {
  std::string out = "layer,mean_variance,kurtosis,top1_energy\n";
  for (const auto& [label, stats] : profile.layers) {
    out += label;
    out += ',';
    out += optional6(stats.mean_variance);
    out += ',';
    out += optional6(stats.kurtosis);
    out += ',';
    out += optional6(stats.top1_energy);
    out += '\n';
  }
  atomic_write(path, out);
}

std::vector<std::string> microbench_op_labels() {
  std::vector<std::string> labels;
  for (const auto& op : bench_ops()) labels.emplace_back(op.label);
  return labels;
}

std::vector<MicrobenchRow> run_microbench(const std::vector<std::string>& ops,
                                          std::size_t iterations, std::size_t warmup) {
  if (iterations < 100) throw InvalidArgument("microbench needs >= 100 iterations");
  if (warmup < 1) throw InvalidArgument("microbench needs >= 1 warmup iteration");

  std::vector<const BenchOp*> selected;
  if (ops.empty()) {
    for (const auto& op : bench_ops()) selected.push_back(&op);
  } else {
    for (const auto& name : ops) {
      const auto it = std::find_if(bench_ops().begin(), bench_ops().end(),
                                   [&](const BenchOp& op) { return name == op.label; });
      if (it == bench_ops().end()) throw InvalidArgument("unknown microbench op: " + name);
      selected.push_back(&*it);
    }
  }

  const ActivationTensor& tensor = microbench_tensor();
  volatile double sink = 0.0;

  std::vector<MicrobenchRow> rows;
  rows.reserve(selected.size());
  for (const BenchOp* op : selected) {
    for (std::size_t i = 0; i < warmup; ++i) sink = op->run(tensor);

    std::vector<double> timings(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
      const auto start = std::chrono::steady_clock::now();
      sink = op->run(tensor);
      const auto stop = std::chrono::steady_clock::now();
      timings[i] = static_cast<double>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
    }
    std::sort(timings.begin(), timings.end());
    rows.push_back({op->label, percentile_of_sorted(timings, 50.0),
                    percentile_of_sorted(timings, 95.0), iterations});
  }
  (void)sink;
  return rows;
}

void emit_microbench(const std::vector<MicrobenchRow>& rows, const std::string& path) {
  std::string out = "op_label,p50_ns,p95_ns,iterations\n";
  for (const auto& row : rows) {
    out += row.op_label;
    out += ',';
    out += fixed6(row.p50_ns);
    out += ',';
    out += fixed6(row.p95_ns);
    out += ',';
    out += std::to_string(row.iterations);
    out += '\n';
  }
  atomic_write(path, out);
}

void emit_propagation(const PropagationResult& result, const std::string& path) {
  std::string out =
      "layer,error_mean,error_variance,clean_mean_variance,clean_kurtosis,clean_top1_energy\n";
  for (std::size_t l = 0; l < result.error_mean.size(); ++l) {
    out += std::to_string(l + 1);
    out += ',';
    out += fixed6(result.error_mean[l]);
    out += ',';
    out += fixed6(result.error_variance[l]);
    out += ',';
    out += optional6(result.clean_stats[l].mean_variance);
    out += ',';
    out += optional6(result.clean_stats[l].kurtosis);
    out += ',';
    out += optional6(result.clean_stats[l].top1_energy);
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace quantlab
