"""Quantization calibration, outlier statistics and residual-stack simulation."""

from quantlab._quantlab import (  # noqa: F401
    DegenerateScale,
    QuantlabError,
    QuantParams,
    SingularProbe,
    StackConfig,
    collapse_experiment,
    collapse_reference_config,
    fake_quant,
    generate_layer,
    kurtosis,
    layer_stats,
    load_dump,
    peg_partition,
    per_channel_variance,
    propagate_errors,
    quantize,
    resolution_factor,
    save_dump,
    scale_minmax,
    scale_percentile,
    top_p_energy,
    trends_reference_config,
)

__version__ = "0.1.0"
