"""Physically consistent simulation of reconfigurable transmit antenna arrays.

Modules: ``netcalc`` (S-parameter algebra), ``components`` (lines, junctions,
switches, PA front end), ``radiating`` (far-field patterns and synthetic
arrays), ``rems`` (gain operators and gains), ``architecture`` (switch-based
tiles and benchmarks), ``optimize`` (switch-state search), ``cli``.
"""

__version__ = "0.1.0"

from .architecture import (
    Benchmark,
    SwitchConfig,
    TileConfig,
    TileGeometry,
    UnitState,
    benchmark_model,
    build_array_tuning,
    build_matching_network,
    build_switch_unit,
    build_tile,
    compare,
)
from .components import SwitchModel, junction, switch_two_port, transmission_line
from .netcalc import MultiportNetwork, WaveContext, classify, connect, interconnect, renormalize
from .optimize import ConfigEvaluator, Objective, SearchSpace, coordinate_ascent, exhaustive_search
from .radiating import AngularGrid, FarFieldPattern, RadiatingStructure, synthesize_array
from .rems import Level, RemsModel, RfFrontend, TuningNetwork, gain_map, maximize_gain

__all__ = [
    "AngularGrid", "Benchmark", "ConfigEvaluator", "FarFieldPattern", "Level", "MultiportNetwork",
    "Objective", "RadiatingStructure", "RemsModel", "RfFrontend", "SearchSpace", "SwitchConfig",
    "SwitchModel", "TileConfig", "TileGeometry", "TuningNetwork", "UnitState", "WaveContext",
    "benchmark_model", "build_array_tuning", "build_matching_network", "build_switch_unit", "build_tile",
    "classify", "compare", "connect", "coordinate_ascent", "exhaustive_search", "gain_map", "interconnect",
    "junction", "maximize_gain", "renormalize", "switch_two_port", "synthesize_array", "transmission_line",
]
