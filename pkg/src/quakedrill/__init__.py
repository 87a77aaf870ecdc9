"""quakedrill: author, run, assess, and analyze earthquake evacuation drills."""

from importlib import resources

from .dsl import ParseError, parse_scenario, render_scenario
from .model import Scenario, ValidationReport, behavior_coverage, validate_scenario

__all__ = [
    "ParseError",
    "Scenario",
    "ValidationReport",
    "behavior_coverage",
    "bundled_scenario",
    "parse_scenario",
    "render_scenario",
    "validate_scenario",
]

__version__ = "0.1.0"


def bundled_scenario(name: str = "ach") -> Scenario:
    """Load one of the scenarios shipped with the package."""
    source = resources.files(__package__).joinpath(f"scenarios/{name}.drill")
    return parse_scenario(source.read_text(encoding="utf-8"))
