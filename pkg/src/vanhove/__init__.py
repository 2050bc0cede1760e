"""Truncated-Fock-space numerics for a linearly coupled scalar field and its classical limit."""

from .conditions import check_conditions
from .evolution import EvolutionContext, closed_form_amplitude, dressed_amplitude, heisenberg_amplitude, initial_amplitude
from .field import classical_field, fd_convergence, modewise_residual
from .fock import OccupationBasis, StateVector, build_basis, build_grid, single_mode_grid
from .model import (
    Dispersion,
    build_hamiltonian,
    dressing_operator,
    gaussian_source,
    neutral_gaussian_source,
    tabulated_source,
)
from .pipeline import convergence_sweep, run_scenario
from .scenario import Scenario, parse_scenario

__all__ = [
    "Dispersion", "EvolutionContext", "OccupationBasis", "Scenario", "StateVector",
    "build_basis", "build_grid", "build_hamiltonian", "check_conditions", "classical_field",
    "closed_form_amplitude", "convergence_sweep", "dressed_amplitude", "dressing_operator",
    "fd_convergence", "gaussian_source", "heisenberg_amplitude", "initial_amplitude",
    "modewise_residual", "neutral_gaussian_source", "parse_scenario", "run_scenario",
    "single_mode_grid", "tabulated_source",
]
