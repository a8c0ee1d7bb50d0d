#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quantlab/quant.hpp"
#include "quantlab/simulator.hpp"

namespace quantlab {

// Declarative run configuration: a flat JSON document with these fields.
// CLI flags override file values. Defaults mirror the reference protocol:
// seed 1000, INT8, percentile grid {99, 99.5, 99.9, 99.99}, K grid {2,3,4}.
struct RunConfig {
  std::uint64_t seed = 1000;
  int bits = 8;
  std::vector<double> percentile_grid = {99.0, 99.5, 99.9, 99.99};
  std::vector<std::size_t> k_grid = {2, 3, 4};

  // Stack overrides for the experiment/simulate stages; unset fields fall
  // back to the collapse reference config.
  std::optional<std::size_t> depth;
  std::optional<std::size_t> width;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> dominant_count;
  std::optional<double> dominance_gain;
  std::optional<double> tail_index;
  std::optional<double> base_std;

  // Per-layer directives for the simulate stage, e.g. "retain", "minmax",
  // "percentile:99.9", "peg:4". Empty means all-minmax.
  std::vector<std::string> policy;

  std::vector<std::string> dumps;
  std::string out_dir = "results";

  void validate() const;

  ResidualStackConfig stack_config() const;
  PrecisionPolicy parsed_policy(std::size_t depth) const;
};

Directive parse_directive(const std::string& text);

RunConfig load_run_config(const std::string& path);

}  // namespace quantlab
