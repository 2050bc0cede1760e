"""Classical field assembled from mode amplitudes, and checks of the sourced wave equation.

On a grid the field is the finite plane-wave sum

    phi(t, x) = (2 pi)^(-d/2) sum_j w_j (2 omega_j)^(-1/2)
                [F_{Phi,Psi}(t, k_j) e^{i k_j.x} + conj(F_{Psi,Phi}(t, k_j)) e^{-i k_j.x}]

and the right-hand side it must reproduce is the band-limited source
``rho_N(x) = (2 pi)^(-d/2) sum_j w_j rho_hat(k_j) e^{i k_j.x}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .evolution import AmplitudeField, EvolutionContext, closed_form_amplitude, dressed_amplitude
from .fock import BasisMismatchError, ModeGrid, StateVector
from .model import Dispersion, SourceProfile


@dataclass(frozen=True, eq=False)
class FieldSample:
    t: float
    points: np.ndarray  # (P, d)
    values: np.ndarray  # complex (P,)
    provenance: dict = field(default_factory=dict)


@dataclass
class ResidualReport:
    t: float
    points: np.ndarray
    residual: np.ndarray
    method: str  # "modewise" | "finite-difference"
    scale: float
    steps: tuple[float, ...] = ()
    tag: str = ""

    @property
    def max(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.residual) ** 2)))

    @property
    def relative(self) -> float:
        return self.max / self.scale if self.scale > 0 else self.max


def _points(x, d: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, d)


def default_points(d: int, sigma: float = 1.0, count: int = 41) -> np.ndarray:
    """Uniform line of ``count`` points through the origin along the first axis, length ``4 sigma``."""
    pts = np.zeros((count, d))
    pts[:, 0] = np.linspace(-2 * sigma, 2 * sigma, count)
    return pts


def _mode_coefficients(grid: ModeGrid, dispersion: Dispersion) -> tuple[np.ndarray, np.ndarray]:
    omega = dispersion(grid.nodes)
    c = grid.weights / np.sqrt(2 * omega) / (2 * math.pi) ** (grid.dimension / 2)
    return c, omega


def _synthesize(grid: ModeGrid, coeff: np.ndarray, fwd: np.ndarray, bwd: np.ndarray,
                points: np.ndarray) -> np.ndarray:
    # sum_j coeff_j [fwd_j e^{ik.x} + bwd_j e^{-ik.x}] at every point
    phase = np.exp(1j * points @ grid.nodes.T)  # (P, M)
    return phase @ (coeff * fwd) + phase.conj() @ (coeff * bwd)


def _check_pair(F_pq: AmplitudeField, F_qp: AmplitudeField):
    if F_pq.grid is not F_qp.grid:
        raise BasisMismatchError("the two amplitude fields live on different grids")
    if F_pq.t != F_qp.t:
        raise ValueError("the two amplitude fields are at different times")


def classical_field(F_pq: AmplitudeField, F_qp: AmplitudeField, dispersion: Dispersion, x) -> FieldSample:
    """Field from ``F_{Phi,Psi}`` and ``F_{Psi,Phi}`` at the time they were sampled."""
    _check_pair(F_pq, F_qp)
    grid = F_pq.grid
    pts = _points(x, grid.dimension)
    coeff, _ = _mode_coefficients(grid, dispersion)
    vals = _synthesize(grid, coeff, F_pq.values, np.conj(F_qp.values), pts)
    prov = dict(pair=F_pq.labels, source=F_pq.source, dispersion=(dispersion.kind, dispersion.mass),
                modes=grid.size)
    return FieldSample(F_pq.t, pts, vals, prov)


def bandlimited_source(profile: SourceProfile, grid: ModeGrid, x) -> np.ndarray:
    """``rho_N`` at the given points (complex; real up to round-off on symmetric grids)."""
    pts = _points(x, grid.dimension)
    rho_hat = profile.rho_hat_at(grid.nodes)
    phase = np.exp(1j * pts @ grid.nodes.T)
    return phase @ (grid.weights * rho_hat) / (2 * math.pi) ** (grid.dimension / 2)


def modewise_residual(F_pq: AmplitudeField, F_qp: AmplitudeField, dispersion: Dispersion,
                      profile: SourceProfile, x) -> ResidualReport:
    """``(d_t^2 - Laplacian + m^2) phi - rho_N`` with derivatives taken term by term."""
    _check_pair(F_pq, F_qp)
    if F_pq.d2t is None or F_qp.d2t is None:
        raise ValueError("amplitudes carry no time derivative; build them with second_derivative=True")
    grid = F_pq.grid
    pts = _points(x, grid.dimension)
    coeff, omega = _mode_coefficients(grid, dispersion)
    k2 = np.sum(grid.nodes**2, axis=1)
    fwd, bwd = F_pq.values, np.conj(F_qp.values)
    phi = _synthesize(grid, coeff, fwd, bwd, pts)
    phi_tt = _synthesize(grid, coeff, F_pq.d2t, np.conj(F_qp.d2t), pts)
    lap = _synthesize(grid, coeff, -k2 * fwd, -k2 * bwd, pts)
    rho_n = bandlimited_source(profile, grid, pts)
    residual = phi_tt - lap + dispersion.mass**2 * phi - rho_n
    scale = max(float(np.max(np.abs(phi))), float(np.max(np.abs(rho_n))))
    tag = "closed-form" if F_pq.source == F_qp.source == "closed-form" else "numeric-source"
    return ResidualReport(F_pq.t, pts, residual, "modewise", scale, (), tag)


# --------------------------------------------------------------------------
# samplers and finite differences
# --------------------------------------------------------------------------

FieldSampler = Callable[[float, np.ndarray], np.ndarray]


def closed_form_sampler(grid: ModeGrid, dispersion: Dispersion, profile: SourceProfile,
                        F0_pq: AmplitudeField, F0_qp: AmplitudeField) -> FieldSampler:
    """``phi(t, x)`` of the dressed pair at arbitrary times, from the closed-form amplitudes."""

    def sample(t, x):
        a = closed_form_amplitude(grid, dispersion, profile, F0_pq, t)
        b = closed_form_amplitude(grid, dispersion, profile, F0_qp, t)
        return classical_field(a, b, dispersion, x).values

    return sample


def numeric_sampler(ctx: EvolutionContext, U, phi: StateVector, psi: StateVector) -> FieldSampler:
    """``phi(t, x)`` of the dressed pair from direct matrix evolution."""

    def sample(t, x):
        a = dressed_amplitude(ctx, U, phi, psi, t, second_derivative=False)
        b = dressed_amplitude(ctx, U, psi, phi, t, second_derivative=False)
        return classical_field(a, b, ctx.hamiltonian.dispersion, x).values

    return sample


def finite_difference_residual(sampler: FieldSampler, profile: SourceProfile, grid: ModeGrid,
                               x, t: float, h_t: float, h_x: float, mass: float = 0.0) -> ResidualReport:
    """Central second differences in ``t`` and each spatial axis."""
    if not (h_t > 0 and h_x > 0):
        raise ValueError("step sizes must be positive")
    d = grid.dimension
    pts = _points(x, d)
    phi0 = sampler(t, pts)
    d2t = (sampler(t + h_t, pts) - 2 * phi0 + sampler(t - h_t, pts)) / h_t**2
    lap = np.zeros_like(phi0)
    for axis in range(d):
        shift = np.zeros(d)
        shift[axis] = h_x
        lap += (sampler(t, pts + shift) - 2 * phi0 + sampler(t, pts - shift)) / h_x**2
    rho_n = bandlimited_source(profile, grid, pts)
    residual = d2t - lap + mass**2 * phi0 - rho_n
    scale = max(float(np.max(np.abs(phi0))), float(np.max(np.abs(rho_n))))
    return ResidualReport(t, pts, residual, "finite-difference", scale, (h_t, h_x))


@dataclass
class ConvergenceLadder:
    steps: list[float]
    reports: list[ResidualReport]
    norms: list[float]
    orders: list[float]
    extrapolated: np.ndarray  # Richardson estimate of the h -> 0 residual at each point
    monotone: bool

    @property
    def order(self) -> float:
        return self.orders[-1] if self.orders else float("nan")


def fd_convergence(sampler: FieldSampler, profile: SourceProfile, grid: ModeGrid, x, t: float,
                   steps: Sequence[float], mass: float = 0.0) -> ConvergenceLadder:
    """Residual on a ladder of steps (``h_t = h_x = h``) with empirical order estimates."""
    steps = list(steps)
    if len(steps) < 2:
        raise ValueError("need at least two step sizes")
    reports = [finite_difference_residual(sampler, profile, grid, x, t, h, h, mass) for h in steps]
    norms = [r.max for r in reports]
    orders = [math.log(n0 / n1) / math.log(h0 / h1) if n0 > 0 and n1 > 0 else float("nan")
              for (h0, n0), (h1, n1) in zip(zip(steps, norms), zip(steps[1:], norms[1:]))]
    monotone = all(b < a for a, b in zip(norms, norms[1:]))
    if not monotone and max(norms) > 0:
        warnings.warn("finite-difference ladder is not monotone; round-off may dominate the smallest step",
                      RuntimeWarning, stacklevel=2)
    ratio = (steps[-2] / steps[-1]) ** 2
    extrapolated = (ratio * reports[-1].residual - reports[-2].residual) / (ratio - 1)
    return ConvergenceLadder(steps, reports, norms, orders, extrapolated, monotone)


# --------------------------------------------------------------------------
# integrability bound
# --------------------------------------------------------------------------


@dataclass
class IntegrabilityReport:
    l: int
    lhs: float
    rhs: float
    c_d: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-10)


def grid_c_d(grid: ModeGrid, dispersion: Dispersion) -> float:
    """``||1/omega||_{L2(unit ball)} + ||omega^{-(d+1)/2}||_{L2(complement)}`` on the grid."""
    omega = dispersion(grid.nodes)
    inside = grid.norms < 1.0
    d = grid.dimension
    ball = math.sqrt(float(np.sum(grid.weights[inside] / omega[inside] ** 2)))
    outer = math.sqrt(float(np.sum(grid.weights[~inside] * omega[~inside] ** (-(d + 1)))))
    return ball + outer


def integrability_diagnostics(F0: AmplitudeField, grid: ModeGrid, dispersion: Dispersion, l: int,
                              phi: StateVector, psi: StateVector, axis: int | None = None) -> IntegrabilityReport:
    """``sum_j w_j |k|^l omega^{-1/2} |F_0|`` against ``c_d ||Phi|| (||H_0^{d/2+2} Psi|| + ||Psi||)``.

    ``axis=None`` uses the full momentum norm, which dominates every component.
    """
    if l not in (0, 1, 2):
        raise ValueError("l must be 0, 1 or 2")
    if F0.grid is not grid:
        raise BasisMismatchError("F0 lives on a different grid")
    omega = dispersion(grid.nodes)
    kmag = grid.norms if axis is None else np.abs(grid.nodes[:, axis])
    lhs = float(np.sum(grid.weights * kmag**l / np.sqrt(omega) * np.abs(F0.values)))
    h0 = psi.basis.occupations @ omega
    power = grid.dimension / 2 + 2
    h0_psi = math.sqrt(float(np.sum((h0**power) ** 2 * np.abs(psi.amplitudes) ** 2)))
    c = grid_c_d(grid, dispersion)
    rhs = c * phi.norm() * (h0_psi + psi.norm())
    return IntegrabilityReport(l, lhs, rhs, c)
