"""Multitype branching processes with immigration and resurrection."""

from ._core import (
    Model,
    ModelError,
    check,
    classify,
    decay_parameter,
    equilibrium_pmf,
    extinction_probability,
    fixture_names,
    integral_J,
    mean_extinction_time,
    minimal_root,
    qsd,
    run_cli,
    simulate_extinction,
    simulate_transition,
    transition_row,
)

__all__ = [
    "Model",
    "ModelError",
    "check",
    "classify",
    "decay_parameter",
    "equilibrium_pmf",
    "extinction_probability",
    "fixture_names",
    "integral_J",
    "mean_extinction_time",
    "minimal_root",
    "qsd",
    "run_cli",
    "simulate_extinction",
    "simulate_transition",
    "transition_row",
]
