"""Linear-quadratic control from samples: exact solvers, identification and
model-free baselines."""

import json as _json

from lqrlab import _lqrlab
from lqrlab._lqrlab import (
    ConfigError,
    LqrLabError,
    average_cost,
    dare,
    gradient_norm,
    plot_svg,
    spectral_radius,
)


def _text(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def instance_from_json(doc):
    """Parse an instance given as a JSON string or a dict."""
    return _lqrlab.instance_from_json(_text(doc))


def identify(instance, episodes, excitation=1.0, seed=0):
    return _lqrlab.identify(_text(instance), episodes, excitation, seed)


def run_bench(spec):
    """Run an experiment spec (JSON string or dict); returns CSV text."""
    return _lqrlab.run_bench(_text(spec))


__all__ = [
    "ConfigError",
    "LqrLabError",
    "average_cost",
    "dare",
    "gradient_norm",
    "identify",
    "instance_from_json",
    "plot_svg",
    "run_bench",
    "spectral_radius",
]
