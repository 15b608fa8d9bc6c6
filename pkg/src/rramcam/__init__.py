"""Circuit-level simulation of a 6T2R2M analogue CAM window cell."""

__version__ = "0.1.0"

from .camcell import CellKind, CellVariant, build_cell, make_variant
from .devices import MemristorState, MosfetParams, Telegraph
from .netlist import Circuit
from .solver import NoConvergence, SolveOptions, dc_solve, dc_sweep, transient
from .trace import Trace

__all__ = [
    "CellKind", "CellVariant", "Circuit", "MemristorState", "MosfetParams", "NoConvergence",
    "SolveOptions", "Telegraph", "Trace", "build_cell", "dc_solve", "dc_sweep", "make_variant",
    "transient", "__version__",
]
