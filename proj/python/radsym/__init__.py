"""Radiation flux in a cylinder-to-sphere cavity."""

import json

from ._core import (
    ConfigError,
    RadsymError,
    asymmetry,
    greedy_solve,
    legendre_fourier,
    lhs_indices,
    preset_names,
    sample_count,
    spherical_harmonic,
    zernike_annular,
)
from . import _core

__all__ = [
    "ConfigError",
    "RadsymError",
    "asymmetry",
    "greedy_solve",
    "legendre_fourier",
    "lhs_indices",
    "preset_config",
    "preset_names",
    "region_sizes",
    "run",
    "sample_count",
    "spherical_harmonic",
    "validate_config",
    "zernike_annular",
]


def preset_config(name):
    return json.loads(_core.preset_config(name))


def validate_config(config):
    return json.loads(_core.validate_config(json.dumps(config)))


def region_sizes(config=None):
    return _core.region_sizes(json.dumps(config or {}))


def run(config):
    """Run the configured solvers; returns reports, reference flux and failures."""
    return _core.run_pipeline(json.dumps(config))
