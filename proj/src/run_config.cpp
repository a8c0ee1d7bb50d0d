#include "quantlab/run_config.hpp"

#include <fstream>

#include <json.hpp>

namespace quantlab {

using nlohmann::json;

void RunConfig::validate() const {
  if (bits < kMinBits || bits > kMaxBits) {
    throw InvalidArgument("bits must lie in [2, 16]");
  }
  if (percentile_grid.empty()) throw InvalidArgument("percentile grid must be non-empty");
  if (k_grid.empty()) throw InvalidArgument("K grid must be non-empty");
  for (double p : percentile_grid) {
    if (!(p > 0.0) || p > 100.0) throw InvalidArgument("percentile out of (0, 100]");
  }
}

ResidualStackConfig RunConfig::stack_config() const {
  const ResidualStackConfig reference = collapse_reference_config(seed);
  ResidualStackConfig stack = make_stack_config(
      depth.value_or(reference.depth), width.value_or(reference.width),
      samples.value_or(reference.samples),
      dominant_count.value_or(reference.dominant_channels.size()),
      dominance_gain.value_or(reference.dominance_gain),
      tail_index.value_or(reference.tail_index), seed);
  stack.base_std = base_std.value_or(reference.base_std);
  stack.validate();
  return stack;
}

PrecisionPolicy RunConfig::parsed_policy(std::size_t stack_depth) const {
  if (policy.empty()) {
    return PrecisionPolicy(stack_depth, Directive::minmax());
  }
  PrecisionPolicy parsed;
  parsed.reserve(policy.size());
  for (const auto& text : policy) parsed.push_back(parse_directive(text));
  if (parsed.size() != stack_depth) {
    throw PolicyLengthMismatch("policy length " + std::to_string(parsed.size()) +
                               " != stack depth " + std::to_string(stack_depth));
  }
  return parsed;
}

Directive parse_directive(const std::string& text) {
  try {
    if (text == "retain") return Directive::retain();
    if (text == "minmax") return Directive::minmax();
    if (text.rfind("percentile:", 0) == 0) {
      return Directive::with_percentile(std::stod(text.substr(11)));
    }
    if (text.rfind("peg:", 0) == 0) {
      return Directive::peg(static_cast<std::size_t>(std::stoul(text.substr(4))));
    }
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad directive parameter: " + text);
  }
  throw InvalidArgument("unknown policy directive: " + text);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config parse error: " + std::string(e.what()));
  }

  RunConfig cfg;
  try {
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("bits")) cfg.bits = doc["bits"].get<int>();
    if (doc.contains("percentile_grid")) {
      cfg.percentile_grid = doc["percentile_grid"].get<std::vector<double>>();
    }
    if (doc.contains("k_grid")) cfg.k_grid = doc["k_grid"].get<std::vector<std::size_t>>();
    if (doc.contains("stack")) {
      const json& stack = doc["stack"];
      if (stack.contains("depth")) cfg.depth = stack["depth"].get<std::size_t>();
      if (stack.contains("width")) cfg.width = stack["width"].get<std::size_t>();
      if (stack.contains("samples")) cfg.samples = stack["samples"].get<std::size_t>();
      if (stack.contains("dominant_count")) {
        cfg.dominant_count = stack["dominant_count"].get<std::size_t>();
      }
      if (stack.contains("dominance_gain")) {
        cfg.dominance_gain = stack["dominance_gain"].get<double>();
      }
      if (stack.contains("tail_index")) cfg.tail_index = stack["tail_index"].get<double>();
      if (stack.contains("base_std")) cfg.base_std = stack["base_std"].get<double>();
    }
    if (doc.contains("policy")) cfg.policy = doc["policy"].get<std::vector<std::string>>();
    if (doc.contains("dumps")) cfg.dumps = doc["dumps"].get<std::vector<std::string>>();
    if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidArgument("config field error: " + std::string(e.what()));
  }
  cfg.validate();
  return cfg;
}

}  // namespace quantlab
