"""Benchmark problem implementations."""

from .crowdnav import CrowdNavModel
from .mars import MarsModel
from .navigation import NavigationModel
from .tabular import TabularModel, TabularPOMDP, tiger_model


def problem_from_config(name: str, params: dict | None = None):
    """Build a problem model from a configuration record."""
    params = dict(params or {})
    builders = {
        "navigation": NavigationModel,
        "mars": MarsModel,
        "crowdnav": CrowdNavModel,
        "tiger": tiger_model,
    }
    if name not in builders:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(builders)}")
    return builders[name](**params)


__all__ = [
    "CrowdNavModel",
    "MarsModel",
    "NavigationModel",
    "TabularModel",
    "TabularPOMDP",
    "tiger_model",
    "problem_from_config",
]
