"""Python access to the cgff core."""

import json

from ._core import (
    ConfigError,
    bridge_band_prob,
    bridge_sup_tail,
    capacity,
    config_keys,
    experiment_kinds,
    green,
    iid_recursion,
    laplace_exact,
    sample_gff,
    sigma0_sq,
    truncation_K,
    visits,
)
from ._core import run_experiment as _run_experiment

__all__ = [
    "ConfigError",
    "bridge_band_prob",
    "bridge_sup_tail",
    "capacity",
    "config_keys",
    "experiment_kinds",
    "green",
    "iid_recursion",
    "laplace_exact",
    "run",
    "sample_gff",
    "sigma0_sq",
    "truncation_K",
    "visits",
]


def run(config, out_dir=""):
    """Run an experiment. `config` is INI text, JSON text or a nested dict."""
    if isinstance(config, dict):
        config = json.dumps(config)
    return json.loads(_run_experiment(config, out_dir))
