"""Self-organizing-map analysis of hidden-layer representations."""

from ._core import (
    FormatError,
    InvalidArgument,
    IoError,
    NumericError,
    SomGrid,
    dead_unit_fraction,
    default_config,
    find_attractors,
    kde_density,
    moving_average,
    read_hlr,
    run_pipeline,
    v_measure,
    welch_ttest,
    write_hlr,
)

__all__ = [
    "FormatError",
    "InvalidArgument",
    "IoError",
    "NumericError",
    "SomGrid",
    "dead_unit_fraction",
    "default_config",
    "find_attractors",
    "kde_density",
    "moving_average",
    "read_hlr",
    "run_pipeline",
    "v_measure",
    "welch_ttest",
    "write_hlr",
]
