"""Placement of two-module fog applications on edge regions and the cloud."""
from .exact import build_model, export_lp, parse_lp, solve_exact, solve_exhaustive
from .fpa import fpa, fpa_r
from .model import (Application, Assignment, ConfigType, PlacementSolution, ResourceVector,
                    Topology, apply_placement, audit_solution, release_placement)
from .scenario import ScenarioConfig, gen_instance

__version__ = "0.1.0"
