"""Time evolution and Heisenberg-picture mode amplitudes.

Amplitudes use the kernel normalization ``F(t, k_j) = (Phi_t, a_j Psi_t) / sqrt(w_j)``
with ``X_t = exp(-i t H) X``, so weighted grid sums approximate momentum integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    DEFAULT_DENSE_THRESHOLD,
    BasisMismatchError,
    KrylovPropagator,
    ModeGrid,
    StateVector,
)
from .model import Dispersion, SourceProfile, VanHoveHamiltonian


class PreconditionError(ValueError):
    pass


class EvolutionContext:
    """Propagator for a fixed Hamiltonian; the eigendecomposition is computed once."""

    def __init__(self, hamiltonian: VanHoveHamiltonian, dense_threshold: int = DEFAULT_DENSE_THRESHOLD):
        self.hamiltonian = hamiltonian
        self.basis = hamiltonian.basis
        self.grid = hamiltonian.grid
        self.dense = len(self.basis) <= dense_threshold
        if self.dense:
            H = hamiltonian.H.dense()
            self.eigenvalues, self.eigenvectors = np.linalg.eigh(0.5 * (H + H.conj().T))
        else:
            self.eigenvalues = self.eigenvectors = None

    def reconstruction_error(self) -> float:
        """Relative max-norm distance between H and its cached eigendecomposition."""
        if not self.dense:
            return 0.0
        V, lam = self.eigenvectors, self.eigenvalues
        H = self.hamiltonian.H.dense()
        return float(np.max(np.abs((V * lam) @ V.conj().T - H)) / max(np.max(np.abs(H)), 1e-300))

    def evolve(self, state: StateVector, t: float) -> StateVector:
        if state.basis is not self.basis:
            raise BasisMismatchError("state does not live on the Hamiltonian's basis")
        if t == 0:
            return state
        if self.dense:
            V = self.eigenvectors
            coeff = V.conj().T @ state.amplitudes
            return StateVector(self.basis, V @ (np.exp(-1j * t * self.eigenvalues) * coeff))
        return KrylovPropagator(self.hamiltonian.H, t).apply(state)


def evolve_state(ctx: EvolutionContext, psi: StateVector, t: float) -> StateVector:
    return ctx.evolve(psi, t)


@dataclass(frozen=True, eq=False)
class AmplitudeField:
    """Samples ``F(t, k_j)`` on a grid, with their second time derivative when known."""

    t: float
    grid: ModeGrid
    values: np.ndarray
    d2t: np.ndarray | None = None
    source: str = "numeric"  # "numeric" | "closed-form" | "initial"
    labels: tuple[str, str] = ("Phi", "Psi")
    overlap: complex | None = None  # (Phi, Psi) of the pair the amplitude was built from

    def max_distance(self, other: "AmplitudeField") -> float:
        if other.grid is not self.grid:
            raise BasisMismatchError("amplitudes live on different grids")
        return float(np.max(np.abs(self.values - other.values)))


def _pairings(phi: StateVector, psi: StateVector, grid: ModeGrid) -> np.ndarray:
    basis = phi.basis
    if psi.basis is not basis:
        raise BasisMismatchError("state pair lives on different bases")
    if grid.size != basis.M:
        raise BasisMismatchError("grid and basis disagree on the number of modes")
    out = np.empty(basis.M, dtype=complex)
    for j in range(basis.M):
        out[j] = np.vdot(phi.amplitudes, basis.lowering(j) @ psi.amplitudes)
    return out / np.sqrt(grid.weights)


def initial_amplitude(grid: ModeGrid, phi: StateVector, psi: StateVector,
                      labels: tuple[str, str] = ("Phi", "Psi")) -> AmplitudeField:
    """``F_0(k_j) = (Phi, a_j Psi) / sqrt(w_j)``."""
    values = _pairings(phi, psi, grid)
    return AmplitudeField(0.0, grid, values, None, "initial", labels, phi.inner(psi))


def heisenberg_amplitude(ctx: EvolutionContext, phi: StateVector, psi: StateVector, t: float,
                         labels: tuple[str, str] = ("Phi", "Psi"),
                         second_derivative: bool = True) -> AmplitudeField:
    """``F(t, k_j) = (e^{-itH} Phi, a_j e^{-itH} Psi) / sqrt(w_j)``.

    The second time derivative comes from the double commutator,
    ``d^2/dt^2 e^{itH} a e^{-itH} = -e^{itH} [H, [H, a]] e^{-itH}``.
    """
    phi_t = ctx.evolve(phi, t)
    psi_t = ctx.evolve(psi, t)
    values = _pairings(phi_t, psi_t, ctx.grid)
    d2t = None
    if second_derivative:
        H = ctx.hamiltonian.H.matrix
        hphi = H @ phi_t.amplitudes
        hpsi = H @ psi_t.amplitudes
        hhphi = H @ hphi
        hhpsi = H @ hpsi
        basis = ctx.basis
        d2t = np.empty(basis.M, dtype=complex)
        for j in range(basis.M):
            a = basis.lowering(j)
            d2t[j] = -(np.vdot(hhphi, a @ psi_t.amplitudes)
                       - 2 * np.vdot(hphi, a @ hpsi)
                       + np.vdot(phi_t.amplitudes, a @ hhpsi))
        d2t /= np.sqrt(ctx.grid.weights)
    return AmplitudeField(float(t), ctx.grid, values, d2t, "numeric", labels, phi.inner(psi))


def dressed_amplitude(ctx: EvolutionContext, U, phi: StateVector, psi: StateVector, t: float,
                      labels: tuple[str, str] = ("Phi", "Psi"),
                      second_derivative: bool = True) -> AmplitudeField:
    """Numerical amplitude of the dressed pair ``(U Phi, U Psi)``; takes the undressed pair."""
    amp = heisenberg_amplitude(ctx, U @ phi, U @ psi, t, labels, second_derivative)
    return AmplitudeField(amp.t, amp.grid, amp.values, amp.d2t, amp.source, labels, phi.inner(psi))


def closed_form_amplitude(grid: ModeGrid, dispersion: Dispersion, profile: SourceProfile,
                          F0: AmplitudeField, t: float, overlap_tol: float = 1e-10) -> AmplitudeField:
    """Dressed-pair amplitude ``e^{-i t omega} F_0 + rho_hat / (sqrt(2) omega^{3/2})``.

    ``F0`` must come from an undressed pair with ``(Phi, Psi) = 1``.
    """
    if F0.grid is not grid:
        raise BasisMismatchError("F0 lives on a different grid")
    if F0.overlap is None or abs(F0.overlap - 1.0) > overlap_tol:
        raise PreconditionError(f"closed form needs (Phi, Psi) = 1, got {F0.overlap}")
    omega = dispersion(grid.nodes)
    rho_hat = profile.rho_hat_at(grid.nodes)
    rotating = np.exp(-1j * t * omega) * F0.values
    values = rotating + rho_hat / (math.sqrt(2.0) * omega**1.5)
    return AmplitudeField(float(t), grid, values, -(omega**2) * rotating, "closed-form", F0.labels, F0.overlap)


@dataclass
class BoundReport:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-10) + 1e-300


def amplitude_bound_check(ctx: EvolutionContext, amplitude: AmplitudeField, phi: StateVector,
                          psi: StateVector, t: float) -> BoundReport:
    """``(sum_j w_j omega_j |F(t,k_j)|^2)^{1/2}`` against ``||Phi|| ||H_0^{1/2} e^{-itH} Psi||``."""
    if amplitude.grid is not ctx.grid or amplitude.t != t:
        raise PreconditionError("amplitude was not computed for this context and time")
    omega = ctx.hamiltonian.omega
    lhs = math.sqrt(float(np.sum(ctx.grid.weights * omega * np.abs(amplitude.values) ** 2)))
    psi_t = ctx.evolve(psi, t)
    h0 = ctx.hamiltonian.H0.matrix.diagonal().real
    rhs = phi.norm() * math.sqrt(float(np.sum(h0 * np.abs(psi_t.amplitudes) ** 2)))
    return BoundReport(lhs, rhs)
