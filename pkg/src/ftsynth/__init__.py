"""Fault-tolerant routing of error-correction protocols onto 2-D qubit grids."""

from .emit import Circuit, emit_json, load_circuit, parse_json, render_snapshots
from .ir import Protocol, inject_moveback, parse_protocol, static_analysis
from .layout import QubitLayout, distance_matrix, extend_layout, parse_layout
from .library import load_fixture
from .mapper import SynthesisConfig, run_sabre
from .verify import check_composition, validate

__version__ = "0.1.0"

__all__ = [
    "Circuit", "Protocol", "QubitLayout", "SynthesisConfig",
    "check_composition", "distance_matrix", "emit_json", "extend_layout", "inject_moveback",
    "load_circuit", "load_fixture", "parse_json", "parse_layout", "parse_protocol",
    "render_snapshots", "run_sabre", "static_analysis", "validate",
]
