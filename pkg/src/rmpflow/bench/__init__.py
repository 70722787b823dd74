"""Scenario drivers and their configuration."""

from .config import dump_config, load_config, parse_config


def runner(kind):
    """The driver function for a scenario kind."""
    if kind == "oned":
        from .oned import run_1d as fn
    elif kind == "twod":
        from .twod import run_2d as fn
    elif kind == "arm":
        from .arm import run_arm as fn
    elif kind == "invariance":
        from .invariance import run_invariance as fn
    elif kind == "dyncheck":
        from .dyncheck import run_dyncheck as fn
    else:
        raise KeyError(kind)
    return fn


__all__ = ["dump_config", "load_config", "parse_config", "runner"]
