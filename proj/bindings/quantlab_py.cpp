#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "quantlab/quant.hpp"
#include "quantlab/report.hpp"
#include "quantlab/simulator.hpp"
#include "quantlab/stats.hpp"
#include "quantlab/tensor.hpp"

namespace py = pybind11;
using namespace quantlab;

namespace {

ActivationTensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
  if (array.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(array.shape(0));
  const auto cols = static_cast<std::size_t>(array.shape(1));
  std::vector<double> values(array.data(), array.data() + rows * cols);
  return ActivationTensor(rows, cols, std::move(values));
}

py::array_t<double> array_from_tensor(const ActivationTensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Directive directive_from_spec(const std::string& kind, double percentile, std::size_t groups) {
  if (kind == "retain") return Directive::retain();
  if (kind == "minmax") return Directive::minmax();
  if (kind == "percentile") return Directive::with_percentile(percentile);
  if (kind == "peg") return Directive::peg(groups);
  throw InvalidArgument("unknown directive kind: " + kind);
}

py::dict stats_to_dict(const LayerStats& stats) {
  py::dict d;
  d["mean_variance"] = stats.mean_variance ? py::object(py::float_(*stats.mean_variance))
                                           : py::object(py::none());
  d["kurtosis"] =
      stats.kurtosis ? py::object(py::float_(*stats.kurtosis)) : py::object(py::none());
  d["top1_energy"] = stats.top1_energy ? py::object(py::float_(*stats.top1_energy))
                                       : py::object(py::none());
  return d;
}

}  // namespace

PYBIND11_MODULE(_quantlab, m) {
  m.doc() = "Quantization calibration, outlier statistics and residual-stack simulation";

  py::register_exception<DegenerateScale>(m, "DegenerateScale");
  py::register_exception<SingularProbe>(m, "SingularProbe");
  static py::exception<Error> error_type(m, "QuantlabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DegenerateScale&) {
      throw;  // handled by the dedicated translator
    } catch (const SingularProbe&) {
      throw;
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoFailure& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const Error& e) {
      error_type(e.what());
    }
  });

  py::class_<QuantParams>(m, "QuantParams")
      .def_readonly("scale", &QuantParams::scale)
      .def_readonly("zero_point", &QuantParams::zero_point)
      .def_readonly("bits", &QuantParams::bits)
      .def_readonly("degenerate", &QuantParams::degenerate)
      .def("qmax", &QuantParams::qmax)
      .def("__repr__", [](const QuantParams& p) {
        return "QuantParams(scale=" + std::to_string(p.scale) +
               ", bits=" + std::to_string(p.bits) + ")";
      });

  m.def(
      "scale_minmax",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, int bits) {
        return scale_minmax(tensor_from_array(x), bits);
      },
      py::arg("x"), py::arg("bits") = 8);

  m.def(
      "scale_percentile",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, double p,
         int bits) { return scale_percentile(tensor_from_array(x), p, bits); },
      py::arg("x"), py::arg("percentile") = 99.9, py::arg("bits") = 8);

  m.def(
      "quantize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const QuantParams& params) {
        const QuantizedTensor qt = quantize_affine(tensor_from_array(x), params);
        py::array_t<std::int32_t> out({qt.rows, qt.cols});
        std::copy(qt.q.begin(), qt.q.end(), out.mutable_data());
        return out;
      },
      py::arg("x"), py::arg("params"));

  m.def(
      "fake_quant",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const std::string& method, double percentile, std::size_t groups, int bits) {
        const Directive d = directive_from_spec(method, percentile, groups);
        return array_from_tensor(apply_directive(tensor_from_array(x), d, bits));
      },
      py::arg("x"), py::arg("method") = "minmax", py::arg("percentile") = 99.9,
      py::arg("groups") = 1, py::arg("bits") = 8,
      "Quantize-dequantize x under one calibration method: retain | minmax | "
      "percentile | peg.");

  m.def(
      "peg_partition",
      [](const std::vector<double>& channel_stats, std::size_t k) {
        const GroupScheme scheme = peg_partition(channel_stats, k);
        py::dict out;
        out["permutation"] = scheme.permutation;
        out["boundaries"] = scheme.boundaries;
        return out;
      },
      py::arg("channel_stats"), py::arg("k"));

  m.def(
      "resolution_factor",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        const ResolutionFactor rho = resolution_factor(tensor_from_array(x));
        return py::make_tuple(rho.value, rho.degenerate);
      },
      py::arg("x"), "Returns (rho, degenerate): sigma_bulk over max|x|.");

  m.def(
      "per_channel_variance",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return per_channel_variance(tensor_from_array(x));
      },
      py::arg("x"));

  m.def(
      "kurtosis",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return kurtosis(tensor_from_array(x));
      },
      py::arg("x"));

  m.def(
      "top_p_energy",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         double p_fraction) {
        const TopEnergy top = top_p_energy(tensor_from_array(x), p_fraction);
        return py::make_tuple(top.value, top.degenerate);
      },
      py::arg("x"), py::arg("p_fraction") = 0.01);

  m.def(
      "layer_stats",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return stats_to_dict(compute_layer_stats(tensor_from_array(x)));
      },
      py::arg("x"));

  m.def("save_dump",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const std::string& path, bool as_f32) {
          ActivationTensor t = tensor_from_array(x);
          if (as_f32) t = t.narrowed_to_f32();
          save_dump(t, path);
        },
        py::arg("x"), py::arg("path"), py::arg("as_f32") = false);

  m.def(
      "load_dump",
      [](const std::string& path, bool narrow_to_f32) {
        return array_from_tensor(load_dump(path, narrow_to_f32));
      },
      py::arg("path"), py::arg("narrow_to_f32") = false);

  py::class_<ResidualStackConfig>(m, "StackConfig")
      .def(py::init([](std::size_t depth, std::size_t width, std::size_t samples,
                       std::size_t dominant_count, double dominance_gain, double tail_index,
                       std::uint64_t seed) {
             return make_stack_config(depth, width, samples, dominant_count, dominance_gain,
                                      tail_index, seed);
           }),
           py::arg("depth") = 12, py::arg("width") = 768, py::arg("samples") = 4096,
           py::arg("dominant_count") = 8, py::arg("dominance_gain") = 1.35,
           py::arg("tail_index") = 3.0, py::arg("seed") = 1000)
      .def_readonly("depth", &ResidualStackConfig::depth)
      .def_readonly("width", &ResidualStackConfig::width)
      .def_readonly("samples", &ResidualStackConfig::samples)
      .def_readonly("dominant_channels", &ResidualStackConfig::dominant_channels)
      .def_readonly("dominance_gain", &ResidualStackConfig::dominance_gain)
      .def_readonly("tail_index", &ResidualStackConfig::tail_index)
      .def_readonly("seed", &ResidualStackConfig::seed);

  m.def("trends_reference_config", &trends_reference_config, py::arg("seed") = 1000);
  m.def("collapse_reference_config", &collapse_reference_config, py::arg("seed") = 1000);

  m.def(
      "generate_layer",
      [](const ResidualStackConfig& cfg, std::size_t layer) {
        return array_from_tensor(generate_layer(cfg, layer));
      },
      py::arg("config"), py::arg("layer"));

  m.def(
      "propagate_errors",
      [](const ResidualStackConfig& cfg, const std::vector<std::string>& policy, int bits,
         bool injected, double injected_error_std) {
        PrecisionPolicy parsed;
        for (const auto& text : policy) {
          if (text == "retain") {
            parsed.push_back(Directive::retain());
          } else if (text == "minmax") {
            parsed.push_back(Directive::minmax());
          } else if (text.rfind("percentile:", 0) == 0) {
            parsed.push_back(Directive::with_percentile(std::stod(text.substr(11))));
          } else if (text.rfind("peg:", 0) == 0) {
            parsed.push_back(Directive::peg(std::stoul(text.substr(4))));
          } else {
            throw InvalidArgument("unknown directive: " + text);
          }
        }
        PropagationOptions options;
        options.mode = injected ? ErrorMode::injected : ErrorMode::fake_quant;
        options.injected_error_std = injected_error_std;
        const PropagationResult result = propagate_errors(cfg, parsed, bits, options);

        py::dict out;
        out["error_mean"] = result.error_mean;
        out["error_variance"] = result.error_variance;
        out["branch_error_variance"] = result.branch_error_variance;
        out["final_error_variance"] = result.final_error_variance;
        out["variance_ratio"] = result.variance_ratio;
        py::list clean;
        for (const auto& stats : result.clean_stats) clean.append(stats_to_dict(stats));
        out["clean_stats"] = clean;
        return out;
      },
      py::arg("config"), py::arg("policy"), py::arg("bits") = 8,
      py::arg("injected") = false, py::arg("injected_error_std") = 0.05);

  m.def(
      "collapse_experiment",
      [](const ResidualStackConfig& cfg, const std::vector<double>& percentile_grid,
         const std::vector<std::size_t>& k_grid, int bits) {
        const auto methods = default_collapse_methods(percentile_grid, k_grid);
        const CollapseResult result = collapse_experiment(cfg, methods, bits);
        py::dict out;
        out["fp32"] = result.fp32_accuracy;
        for (const auto& [label, accuracy] : result.accuracies) {
          out[label.c_str()] = accuracy;
        }
        return out;
      },
      py::arg("config"), py::arg("percentile_grid") = std::vector<double>{99.0, 99.5, 99.9, 99.99},
      py::arg("k_grid") = std::vector<std::size_t>{2, 3, 4}, py::arg("bits") = 8);
}
