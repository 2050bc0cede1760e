"""Scalar field coupled to a static source: dispersion, sources, Hamiltonian, dressing.

Fourier convention is the symmetric one,
``rho_hat(k) = (2 pi)^(-d/2) int rho(x) exp(-i k.x) dx``, so that the inverse
transform carries the same ``(2 pi)^(-d/2)`` prefactor as the field expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .fock import (
    LinearOperator,
    ModeGrid,
    OccupationBasis,
    StateVector,
    is_hermitian,
    second_quantization,
    segal_field,
    segal_momentum,
    unitary_exponential,
)


class ProfileError(ValueError):
    pass


# --------------------------------------------------------------------------
# dispersion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Dispersion:
    kind: str = "massless"
    mass: float = 0.0

    def __post_init__(self):
        if self.kind not in ("massless", "massive"):
            raise ValueError(f"unknown dispersion kind {self.kind!r}")
        if self.kind == "massless" and self.mass != 0.0:
            raise ValueError("massless dispersion takes mass 0")
        if self.kind == "massive" and not self.mass > 0:
            raise ValueError("massive dispersion needs m > 0")

    @classmethod
    def massless(cls) -> "Dispersion":
        return cls("massless", 0.0)

    @classmethod
    def massive(cls, m: float) -> "Dispersion":
        return cls("massive", float(m))

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        k2 = np.sum(k * k, axis=-1)
        return np.sqrt(k2 + self.mass**2)


def evaluate_dispersion(dispersion: Dispersion, k) -> float:
    return float(dispersion(np.atleast_1d(np.asarray(k, dtype=float))))


# --------------------------------------------------------------------------
# sources
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SourceProfile:
    """Static real source ``rho(x)`` and its transform ``rho_hat(k)``.

    ``rho`` is ``None`` for tabulated profiles, which only know ``rho_hat``.
    """

    kind: str
    dimension: int
    rho_hat: Callable[[np.ndarray], np.ndarray]
    rho: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)
    scale: float = 1.0  # characteristic length, sets default quadrature boxes

    def rho_hat_at(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float).reshape(-1, self.dimension)
        return np.asarray(self.rho_hat(k), dtype=complex)

    def rho_at(self, x) -> np.ndarray:
        if self.rho is None:
            raise ProfileError(f"{self.kind} profile has no position-space density")
        x = np.asarray(x, dtype=float).reshape(-1, self.dimension)
        return np.asarray(self.rho(x), dtype=float)


def gaussian_source(A: float, sigma: float, lam: float = 1.0, d: int = 3) -> SourceProfile:
    """``rho(x) = lam A exp(-|x|^2 / 2 sigma^2)``, ``rho_hat = lam A sigma^d exp(-sigma^2 |k|^2 / 2)``."""
    if not sigma > 0:
        raise ValueError("gaussian width must be positive")
    if lam < 0:
        raise ValueError("coupling scale must be non-negative")
    amp = lam * A

    def rho(x):
        return amp * np.exp(-np.sum(x * x, axis=-1) / (2 * sigma**2))

    def rho_hat(k):
        return amp * sigma**d * np.exp(-(sigma**2) * np.sum(k * k, axis=-1) / 2)

    return SourceProfile("gaussian", d, rho_hat, rho, dict(A=A, sigma=sigma, lam=lam), sigma)


def neutral_gaussian_source(A: float, sigma: float, lam: float = 1.0, d: int = 3) -> SourceProfile:
    """Zero-charge source ``-sigma^2 Laplacian`` of the gaussian.

    ``rho_hat = lam A sigma^(d+2) |k|^2 exp(-sigma^2 |k|^2 / 2)`` vanishes at
    ``k = 0``, which makes the massless infrared conditions hold for ``d >= 3``.
    """
    if not sigma > 0:
        raise ValueError("gaussian width must be positive")
    if lam < 0:
        raise ValueError("coupling scale must be non-negative")
    amp = lam * A

    def rho(x):
        r2 = np.sum(x * x, axis=-1) / sigma**2
        return amp * (d - r2) * np.exp(-r2 / 2)

    def rho_hat(k):
        k2 = np.sum(k * k, axis=-1)
        return amp * sigma ** (d + 2) * k2 * np.exp(-(sigma**2) * k2 / 2)

    return SourceProfile("neutral_gaussian", d, rho_hat, rho, dict(A=A, sigma=sigma, lam=lam), sigma)


def tabulated_source(kpoints: np.ndarray, values: np.ndarray, lam: float = 1.0) -> SourceProfile:
    """Source known only through samples of ``rho_hat``.

    Exact table nodes are returned verbatim; elsewhere values are linearly
    interpolated and vanish outside the tabulated hull.
    """
    kpoints = np.asarray(kpoints, dtype=float)
    if kpoints.ndim == 1:
        kpoints = kpoints[:, None]
    values = lam * np.asarray(values, dtype=complex)
    d = kpoints.shape[1]
    _check_real_source(kpoints, values)
    lookup = {row.tobytes(): i for i, row in enumerate(kpoints + 0.0)}

    if d == 1:
        order = np.argsort(kpoints[:, 0])
        xs, ys = kpoints[order, 0], values[order]

        def interp(k):
            re = np.interp(k[:, 0], xs, ys.real, left=0.0, right=0.0)
            im = np.interp(k[:, 0], xs, ys.imag, left=0.0, right=0.0)
            return re + 1j * im
    else:
        from scipy.interpolate import LinearNDInterpolator

        interpolator = LinearNDInterpolator(kpoints, values, fill_value=0.0)

        def interp(k):
            return interpolator(k)

    def rho_hat(k):
        k = np.asarray(k, dtype=float).reshape(-1, d)
        out = np.empty(len(k), dtype=complex)
        miss = []
        for i, row in enumerate(k + 0.0):
            j = lookup.get(row.tobytes())
            if j is None:
                miss.append(i)
            else:
                out[i] = values[j]
        if miss:
            out[miss] = interp(k[miss])
        return out

    # default quadrature boxes use K = 8 / scale; match the table extent
    extent = float(np.max(np.abs(kpoints)))
    scale = 8.0 / extent if extent > 0 else 1.0
    return SourceProfile("tabulated", d, rho_hat, None, dict(lam=lam, rows=len(kpoints)), scale)


def _check_real_source(kpoints, values, atol=1e-12):
    lookup = {row.tobytes(): i for i, row in enumerate(kpoints + 0.0)}
    for i, row in enumerate(kpoints):
        j = lookup.get((-row + 0.0).tobytes())
        if j is not None and abs(values[j] - np.conj(values[i])) > atol * max(1.0, abs(values[i])):
            raise ProfileError(
                f"rho_hat(-k) != conj(rho_hat(k)) at k={row.tolist()}: complex sources are not supported"
            )


def read_source_table(path, lam: float = 1.0) -> SourceProfile:
    """Whitespace table of rows ``k_1 .. k_d  Re(rho_hat)  Im(rho_hat)``; ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError:
            raise ProfileError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise ProfileError(f"{path}: empty source table")
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() < 3:
        raise ProfileError(f"{path}: rows must all have d + 2 >= 3 columns")
    data = np.array(rows)
    return tabulated_source(data[:, :-2], data[:, -2] + 1j * data[:, -1], lam=lam)


def write_source_table(profile: SourceProfile, grid: ModeGrid, path) -> None:
    vals = profile.rho_hat_at(grid.nodes)
    d = grid.dimension
    header = " ".join(f"k{i + 1}" for i in range(d)) + " Re_rho_hat Im_rho_hat  (k in 1/length, symmetric Fourier convention)"
    data = np.column_stack([grid.nodes, vals.real, vals.imag])
    np.savetxt(path, data, fmt="%.17g", header=header, comments="# ")


# --------------------------------------------------------------------------
# coupling and Hamiltonian
# --------------------------------------------------------------------------


def coupling(profile: SourceProfile, dispersion: Dispersion, grid: ModeGrid) -> np.ndarray:
    """Node values ``f_I(k_j) = rho_hat(k_j) / sqrt(omega(k_j))``."""
    if profile.dimension != grid.dimension:
        raise ValueError("profile and grid dimensions differ")
    omega = dispersion(grid.nodes)
    if np.any(omega == 0.0):
        raise ValueError("grid contains a node with omega = 0; massless grids must exclude the origin")
    rho_hat = profile.rho_hat_at(grid.nodes)
    if not np.all(np.isfinite(rho_hat)):
        raise ProfileError("rho_hat is not finite on every node")
    if grid.symmetric and grid.mirror is not None:
        mismatch = np.abs(rho_hat[grid.mirror] - np.conj(rho_hat))
        if np.any(mismatch > 1e-12 * np.maximum(1.0, np.abs(rho_hat))):
            raise ProfileError("source is not real: rho_hat(-k) != conj(rho_hat(k)) on the grid")
    return rho_hat / np.sqrt(omega)


@dataclass(frozen=True, eq=False)
class VanHoveHamiltonian:
    grid: ModeGrid
    basis: OccupationBasis
    dispersion: Dispersion
    profile: SourceProfile
    omega: np.ndarray
    coupling: np.ndarray
    H0: LinearOperator
    HI: LinearOperator
    H: LinearOperator
    energy_shift: float

    @property
    def dressing_function(self) -> np.ndarray:
        return self.coupling / self.omega


def build_hamiltonian(grid: ModeGrid, basis: OccupationBasis, dispersion: Dispersion,
                      profile: SourceProfile) -> VanHoveHamiltonian:
    """``H = dGamma(omega) - phi_S(f_I)`` with the analytic ground-energy shift."""
    omega = dispersion(grid.nodes)
    f = coupling(profile, dispersion, grid)
    H0 = second_quantization(grid, basis, omega)
    HI = -segal_field(grid, basis, f)
    H = LinearOperator(basis, (H0.matrix + HI.matrix).tocsr(), hermitian=True)
    if not is_hermitian(H):
        raise AssertionError("assembled Hamiltonian is not hermitian")
    shift = -0.5 * float(np.sum(grid.weights * np.abs(f) ** 2 / omega))
    return VanHoveHamiltonian(grid, basis, dispersion, profile, omega, f, H0, HI, H, shift)


def relative_bound_constants(ham: VanHoveHamiltonian, eps: float) -> tuple[float, float]:
    """Constants ``(c_I, d_I(eps))`` with ``||H_I psi|| <= c_I eps ||H_0 psi|| + d_I ||psi||``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = ham.grid
    f_over_sqrt = g.norm(ham.coupling / np.sqrt(ham.omega))
    c = math.sqrt(2.0) * f_over_sqrt
    d = f_over_sqrt / (math.sqrt(2.0) * eps) + g.norm(ham.coupling) / math.sqrt(2.0)
    return c, d


def relative_bound_margins(ham: VanHoveHamiltonian, states, eps: float) -> np.ndarray:
    """``rhs - lhs`` of the relative bound for each state; negative means violated."""
    c, d = relative_bound_constants(ham, eps)
    out = []
    for psi in states:
        lhs = (ham.HI @ psi).norm()
        rhs = c * eps * (ham.H0 @ psi).norm() + d * psi.norm()
        out.append(rhs - lhs)
    return np.array(out)


def dressing_operator(ham: VanHoveHamiltonian, dense_threshold: int | None = None):
    """``U = exp(-i pi_S(f_I / omega))``."""
    gen = segal_momentum(ham.grid, ham.basis, ham.dressing_function)
    kw = {} if dense_threshold is None else dict(dense_threshold=dense_threshold)
    return unitary_exponential(gen, 1.0, **kw)


def coherent_amplitudes(ham: VanHoveHamiltonian) -> np.ndarray:
    """Per-mode displacement ``alpha_j = sqrt(w_j / 2) f_I(k_j) / omega(k_j)`` of the dressed vacuum."""
    return np.sqrt(ham.grid.weights / 2.0) * ham.dressing_function


def coherent_state(basis: OccupationBasis, alpha: np.ndarray) -> StateVector:
    """Truncated product coherent state ``prod_j e^{-|a_j|^2/2} a_j^n_j / sqrt(n_j!)``."""
    alpha = np.asarray(alpha, dtype=complex)
    occ = basis.occupations
    logfact = np.array([math.lgamma(n + 1) for n in range(basis.N + 1)])
    amps = np.ones(len(basis), dtype=complex)
    for j, a in enumerate(alpha):
        n = occ[:, j]
        amps *= np.where(n == 0, 1.0, a ** n) / np.exp(0.5 * logfact[n])
    amps *= math.exp(-0.5 * float(np.sum(np.abs(alpha) ** 2)))
    return StateVector(basis, amps)


@dataclass
class DiagonalizationReport:
    residual_norms: np.ndarray
    max_residual: float
    shell: int  # highest excitation shell touched by the probe states


def diagonalization_check(ham: VanHoveHamiltonian, U, states) -> DiagonalizationReport:
    """``||(U* H U - H_0 - E_shift) psi||`` for each (low-shell) state."""
    norms = []
    for psi in states:
        upsi = U @ psi
        hupsi = ham.H @ upsi
        back = _adjoint_apply(U, hupsi)
        r = back - ham.H0 @ psi - ham.energy_shift * psi
        norms.append(r.norm())
    norms = np.array(norms)
    shell = max((int(ham.basis.totals[np.abs(p.amplitudes) > 0].max()) for p in states), default=0)
    return DiagonalizationReport(norms, float(norms.max()) if len(norms) else 0.0, shell)


def conjugated_second_quantization_residual(grid: ModeGrid, basis: OccupationBasis, T, g, states) -> np.ndarray:
    """``||(e^{i pi(g)} dGamma(T) e^{-i pi(g)} - dGamma(T) - phi(Tg) - (g,Tg)/2) psi||`` per state."""
    Tv = grid.evaluate(T)
    gv = grid.evaluate(g)
    dG = second_quantization(grid, basis, Tv)
    pi = segal_momentum(grid, basis, gv)
    W = unitary_exponential(pi, 1.0)  # e^{-i pi(g)}
    phi = segal_field(grid, basis, Tv * gv)
    const = grid.inner(gv, Tv * gv)
    out = []
    for psi in states:
        lhs = _adjoint_apply(W, dG @ (W @ psi))
        rhs = dG @ psi + phi @ psi + (0.5 * const) * psi
        out.append((lhs - rhs).norm())
    return np.array(out)


def _adjoint_apply(U, state: StateVector) -> StateVector:
    if isinstance(U, LinearOperator):
        return StateVector(state.basis, U.matrix.conj().T @ state.amplitudes)
    # KrylovPropagator: the adjoint of exp(-i t A) is exp(+i t A)
    from .fock import KrylovPropagator

    return KrylovPropagator(U.generator, -U.t, U.krylov_dim, U.tol).apply(state)


def ground_energy(ham: VanHoveHamiltonian) -> float:
    if len(ham.basis) <= 4000:
        return float(np.linalg.eigvalsh(ham.H.dense())[0])
    from scipy.sparse.linalg import eigsh

    return float(eigsh(ham.H.matrix, k=1, which="SA", return_eigenvectors=False)[0])
