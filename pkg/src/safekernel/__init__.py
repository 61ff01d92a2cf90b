"""Safe-kernel resilient multi-dimensional consensus."""

from importlib import resources

__version__ = "0.1.0"


def bundled_scenario(name: str = "k5_golden"):
    """Path-like handle to a scenario shipped with the package."""
    return resources.files(__name__).joinpath("scenarios", f"{name}.json")
