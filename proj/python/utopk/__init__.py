"""Top-K queries over uncertain frame scores with oracle cleaning."""

import json

from ._utopk import *  # noqa: F401,F403
from ._utopk import run_experiment_json


def run_experiment(config=None, **overrides):
    """Runs the experiment pipeline and returns the report as a dict."""
    merged = dict(config or {})
    merged.update(overrides)
    return json.loads(run_experiment_json(json.dumps(merged)))
