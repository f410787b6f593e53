"""Blocking probability of relay-based cellular OFDMA cells.

The chain runs geometry -> ISR statistics -> subcarrier demand classes ->
multi-rate loss systems, with a discrete-event simulator as a cross-check.
"""

__version__ = "0.1.0"

from .classes import ClassDistribution, ClassScheme, RateSpec
from .config import ScenarioConfig, load_config, parse_config
from .erlang import AnalysisInputs, BlockingReport, LossClass, LossSystem, TrafficSpec, analyze
from .geometry import CellLayout, Hexagon, Point2D, build_layout
from .interference import IsrModel, LinkKind
from .simulator import SimConfig, compare_modes, run

__all__ = [
    "AnalysisInputs",
    "BlockingReport",
    "CellLayout",
    "ClassDistribution",
    "ClassScheme",
    "Hexagon",
    "IsrModel",
    "LinkKind",
    "LossClass",
    "LossSystem",
    "Point2D",
    "RateSpec",
    "ScenarioConfig",
    "SimConfig",
    "TrafficSpec",
    "analyze",
    "build_layout",
    "compare_modes",
    "load_config",
    "parse_config",
    "run",
]
