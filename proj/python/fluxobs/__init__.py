"""Flux observers for electromechanical systems with biased measurements."""

from ._fluxobs import ConfigError, __version__, presets, run, scenario_text, sweep, verify

__all__ = ["ConfigError", "__version__", "presets", "run", "scenario_text", "sweep", "verify"]
