"""Truncated bosonic Fock space over a discretized momentum grid.

A continuum mode function ``f(k)`` is represented by its values on the nodes of
a :class:`ModeGrid`.  Smeared operators use the weighted convention

    a(f) = sum_j sqrt(w_j) conj(f(k_j)) a_j

so that ``[a(f), a^dag(g)] = (f, g)_grid`` holds exactly below the truncation
shell, and the pointwise kernel is ``a(k_j) = a_j / sqrt(w_j)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

DEFAULT_MAX_BASIS = 200_000
DEFAULT_DENSE_THRESHOLD = 4000

ModeFunction = Union[Callable[[np.ndarray], np.ndarray], Sequence[complex], np.ndarray]


class CapacityError(RuntimeError):
    """Requested truncation exceeds the configured basis size cap."""


class BasisMismatchError(ValueError):
    pass


# --------------------------------------------------------------------------
# momentum grid
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Quadrature nodes and weights discretizing momentum space."""

    dimension: int
    nodes: np.ndarray  # shape (M, d)
    weights: np.ndarray  # shape (M,)
    symmetric: bool
    mirror: np.ndarray | None = None  # index of -k_j, when symmetric

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.dimension)
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (nodes.shape[0],):
            raise ValueError("one weight per node required")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.symmetric and self.mirror is None:
            object.__setattr__(self, "mirror", _mirror_map(nodes, weights))

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.nodes, axis=1)

    def evaluate(self, f: ModeFunction) -> np.ndarray:
        """Node values of a mode function given as a callable or an array."""
        if callable(f):
            vals = np.asarray(f(self.nodes), dtype=complex)
        else:
            vals = np.asarray(f, dtype=complex)
        vals = np.broadcast_to(vals, (self.size,)).astype(complex)
        if not np.all(np.isfinite(vals)):
            raise ValueError("mode function is not finite at every grid node")
        return vals

    def inner(self, f: ModeFunction, g: ModeFunction) -> complex:
        """Grid inner product, conjugate-linear in the first slot."""
        return complex(np.sum(self.weights * np.conj(self.evaluate(f)) * self.evaluate(g)))

    def norm(self, f: ModeFunction) -> float:
        return math.sqrt(max(self.inner(f, f).real, 0.0))


def _mirror_map(nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    lookup = {row.tobytes(): i for i, row in enumerate(nodes)}
    mirror = np.empty(len(nodes), dtype=int)
    for i, row in enumerate(nodes):
        j = lookup.get((-row + 0.0).tobytes())
        if j is None or weights[j] != weights[i]:
            raise ValueError("grid flagged symmetric but is not closed under k -> -k")
        mirror[i] = j
    return mirror


def build_grid(d: int, n: int, K: float, keep_origin: bool = False) -> ModeGrid:
    """Cell-centred tensor grid over ``[-K, K]^d`` with ``n`` cells per axis.

    Nodes sit at half-step offsets ``(i - (n - 1)/2) * 2K/n``.  For even ``n``
    no node touches the origin.  For odd ``n`` the central cell is centred on
    ``k = 0``; that node is dropped unless ``keep_origin`` (massive grids only).
    """
    if d < 1 or n < 1 or not K > 0:
        raise ValueError(f"invalid grid specification d={d}, n={n}, K={K}")
    step = 2.0 * K / n
    axis = (np.arange(n) - (n - 1) / 2.0) * step
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    if not keep_origin:
        nodes = nodes[np.any(nodes != 0.0, axis=1)]
    weights = np.full(nodes.shape[0], step**d)
    return ModeGrid(d, nodes, weights, symmetric=True)


def single_mode_grid(k: float = 0.0, weight: float = 1.0) -> ModeGrid:
    """One-node grid in d=1; handy for exactly solvable fixtures."""
    return ModeGrid(1, np.array([[k]]), np.array([weight]), symmetric=(k == 0.0))


# --------------------------------------------------------------------------
# occupation basis
# --------------------------------------------------------------------------


class OccupationBasis:
    """All occupation vectors over ``M`` modes with total excitation at most ``N``.

    States are ordered by total excitation, then lexicographically by the sorted
    multiset of occupied mode labels.
    """

    def __init__(self, M: int, N: int, max_size: int = DEFAULT_MAX_BASIS):
        if M < 1 or N < 0:
            raise ValueError(f"invalid truncation M={M}, N={N}")
        size = basis_size(M, N)
        if size > max_size:
            raise CapacityError(f"basis of {size} states exceeds cap {max_size} (M={M}, N={N})")
        self.M = M
        self.N = N
        occ = np.zeros((size, M), dtype=np.int64)
        row = 0
        for total in range(N + 1):
            for combo in itertools.combinations_with_replacement(range(M), total):
                for mode in combo:
                    occ[row, mode] += 1
                row += 1
        occ.setflags(write=False)
        self.occupations = occ
        self.totals = occ.sum(axis=1)
        self._index = {r.tobytes(): i for i, r in enumerate(occ)}
        self._lowering: dict[int, sp.csr_matrix] = {}

    def __len__(self) -> int:
        return self.occupations.shape[0]

    def __repr__(self) -> str:
        return f"OccupationBasis(M={self.M}, N={self.N}, size={len(self)})"

    @property
    def states(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in r) for r in self.occupations]

    def index(self, occupation: Sequence[int]) -> int:
        key = np.asarray(occupation, dtype=np.int64).tobytes()
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"occupation {tuple(occupation)} not in {self!r}") from None

    def shell_mask(self, max_total: int) -> np.ndarray:
        return self.totals <= max_total

    def lowering(self, j: int) -> sp.csr_matrix:
        if not 0 <= j < self.M:
            raise IndexError(f"mode index {j} out of range for M={self.M}")
        if j not in self._lowering:
            src = np.nonzero(self.occupations[:, j] > 0)[0]
            lowered = self.occupations[src].copy()
            lowered[:, j] -= 1
            dst = np.fromiter((self._index[r.tobytes()] for r in lowered), dtype=np.int64, count=len(src))
            vals = np.sqrt(self.occupations[src, j].astype(float))
            n = len(self)
            mat = sp.csr_matrix((vals.astype(complex), (dst, src)), shape=(n, n))
            self._lowering[j] = mat
        return self._lowering[j]


def basis_size(M: int, N: int) -> int:
    # sum_{n<=N} C(M+n-1, n) = C(M+N, N)
    return math.comb(M + N, N)


def build_basis(M: int, N: int, max_size: int = DEFAULT_MAX_BASIS) -> OccupationBasis:
    return OccupationBasis(M, N, max_size=max_size)


# --------------------------------------------------------------------------
# states and operators
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: OccupationBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def _check(self, other: "StateVector"):
        if other.basis is not self.basis:
            raise BasisMismatchError("states live on different bases")

    def inner(self, other: "StateVector") -> complex:
        """``(self, other)``, linear in ``other``."""
        self._check(other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes / self.norm())

    def __add__(self, other):
        self._check(other)
        return StateVector(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        self._check(other)
        return StateVector(self.basis, self.amplitudes - other.amplitudes)

    def __mul__(self, c):
        return StateVector(self.basis, c * self.amplitudes)

    __rmul__ = __mul__


def vacuum(basis: OccupationBasis) -> StateVector:
    amps = np.zeros(len(basis), dtype=complex)
    amps[0] = 1.0
    return StateVector(basis, amps)


def basis_state(basis: OccupationBasis, occupation: Sequence[int]) -> StateVector:
    amps = np.zeros(len(basis), dtype=complex)
    amps[basis.index(occupation)] = 1.0
    return StateVector(basis, amps)


def random_state(basis: OccupationBasis, rng: np.random.Generator, max_total: int | None = None) -> StateVector:
    """Normalized complex Gaussian state, optionally confined to low shells."""
    amps = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    if max_total is not None:
        amps[~basis.shell_mask(max_total)] = 0.0
    return StateVector(basis, amps / np.linalg.norm(amps))


def _is_hermitian(mat, rtol: float = 1e-13) -> bool:
    diff = mat - mat.conj().T
    scale = _max_abs(mat)
    return _max_abs(diff) <= rtol * max(scale, 1e-300)


def _max_abs(mat) -> float:
    if sp.issparse(mat):
        return float(abs(mat).max()) if mat.nnz else 0.0
    return float(np.max(np.abs(mat))) if mat.size else 0.0


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Matrix on an occupation basis.  ``matrix`` is scipy-sparse or a dense array."""

    basis: OccupationBasis
    matrix: object
    hermitian: bool = False
    anti_hermitian: bool = False

    @classmethod
    def wrap(cls, basis, matrix, check: bool = True) -> "LinearOperator":
        herm = check and _is_hermitian(matrix)
        anti = check and not herm and _is_hermitian(1j * matrix)
        return cls(basis, matrix, herm, anti)

    def _check(self, other: "LinearOperator"):
        if other.basis is not self.basis:
            raise BasisMismatchError("operators act on different bases")

    def apply(self, state: StateVector) -> StateVector:
        if state.basis is not self.basis:
            raise BasisMismatchError("state and operator bases differ")
        return StateVector(self.basis, self.matrix @ state.amplitudes)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, LinearOperator):
            self._check(other)
            return LinearOperator.wrap(self.basis, self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        self._check(other)
        return LinearOperator.wrap(self.basis, self.matrix + other.matrix)

    def __sub__(self, other: "LinearOperator") -> "LinearOperator":
        self._check(other)
        return LinearOperator.wrap(self.basis, self.matrix - other.matrix)

    def __mul__(self, c) -> "LinearOperator":
        return LinearOperator.wrap(self.basis, c * self.matrix)

    __rmul__ = __mul__

    def __neg__(self) -> "LinearOperator":
        return LinearOperator(self.basis, -self.matrix, self.hermitian, self.anti_hermitian)

    def dag(self) -> "LinearOperator":
        return LinearOperator(self.basis, self.matrix.conj().T.tocsr() if sp.issparse(self.matrix)
                              else self.matrix.conj().T, self.hermitian, self.anti_hermitian)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    @property
    def dim(self) -> int:
        return len(self.basis)


def identity(basis: OccupationBasis) -> LinearOperator:
    return LinearOperator(basis, sp.identity(len(basis), dtype=complex, format="csr"), True, False)


def mode_annihilator(basis: OccupationBasis, j: int) -> LinearOperator:
    return LinearOperator(basis, basis.lowering(j))


def mode_creator(basis: OccupationBasis, j: int) -> LinearOperator:
    return LinearOperator(basis, basis.lowering(j).conj().T.tocsr())


def smeared_annihilator(grid: ModeGrid, basis: OccupationBasis, f: ModeFunction) -> LinearOperator:
    _check_sizes(grid, basis)
    coeff = np.sqrt(grid.weights) * np.conj(grid.evaluate(f))
    n = len(basis)
    mat = sp.csr_matrix((n, n), dtype=complex)
    for j in np.nonzero(coeff)[0]:
        mat = mat + coeff[j] * basis.lowering(int(j))
    return LinearOperator(basis, mat.tocsr())


def smeared_creator(grid: ModeGrid, basis: OccupationBasis, g: ModeFunction) -> LinearOperator:
    return smeared_annihilator(grid, basis, g).dag()


def segal_field(grid: ModeGrid, basis: OccupationBasis, f: ModeFunction) -> LinearOperator:
    a = smeared_annihilator(grid, basis, f).matrix
    mat = (a + a.conj().T) / math.sqrt(2.0)
    return LinearOperator(basis, mat.tocsr(), hermitian=True)


def segal_momentum(grid: ModeGrid, basis: OccupationBasis, g: ModeFunction) -> LinearOperator:
    a = smeared_annihilator(grid, basis, g).matrix
    mat = 1j * (a.conj().T - a) / math.sqrt(2.0)
    return LinearOperator(basis, mat.tocsr(), hermitian=True)


def second_quantization(grid: ModeGrid, basis: OccupationBasis, T: ModeFunction) -> LinearOperator:
    """Diagonal lift ``dGamma(T)``: entry ``sum_i n_i T(k_i)``; zero on the vacuum."""
    _check_sizes(grid, basis)
    vals = grid.evaluate(T)
    if np.any(np.abs(vals.imag) > 0) or np.any(vals.real < 0):
        raise ValueError("second quantization needs a non-negative real multiplier")
    diag = basis.occupations @ vals.real
    return LinearOperator(basis, sp.diags(diag.astype(complex), format="csr"), hermitian=True)


def number_operator(basis: OccupationBasis) -> LinearOperator:
    return LinearOperator(basis, sp.diags(basis.totals.astype(complex), format="csr"), hermitian=True)


def commutator(A: LinearOperator, B: LinearOperator) -> LinearOperator:
    A._check(B)
    return LinearOperator.wrap(A.basis, A.matrix @ B.matrix - B.matrix @ A.matrix)


def _check_sizes(grid: ModeGrid, basis: OccupationBasis):
    if grid.size != basis.M:
        raise BasisMismatchError(f"grid has {grid.size} nodes but basis has {basis.M} modes")


# --------------------------------------------------------------------------
# unitary evolution
# --------------------------------------------------------------------------


class KrylovPropagator:
    """Lazy ``exp(-i t A)`` for hermitian ``A``, applied per vector by Lanczos."""

    def __init__(self, generator: LinearOperator, t: float, krylov_dim: int = 40, tol: float = 1e-12):
        self.basis = generator.basis
        self.generator = generator
        self.t = float(t)
        self.krylov_dim = krylov_dim
        self.tol = tol

    def apply(self, state: StateVector) -> StateVector:
        if state.basis is not self.basis:
            raise BasisMismatchError("state and propagator bases differ")
        out = lanczos_expm(self.generator.matrix, state.amplitudes, self.t, self.krylov_dim, self.tol)
        return StateVector(self.basis, out)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        return lanczos_expm(self.generator.matrix, np.asarray(other, dtype=complex), self.t,
                            self.krylov_dim, self.tol)


def lanczos_expm(A, v: np.ndarray, t: float, m: int = 40, tol: float = 1e-12) -> np.ndarray:
    """``exp(-i t A) v`` for hermitian ``A`` by restarted Lanczos time stepping."""
    v = np.asarray(v, dtype=complex)
    if t == 0.0 or not np.any(v):
        return v.copy()
    # Gershgorin-type bound on the spectral radius sets the step size
    if sp.issparse(A):
        radius = float(abs(A).sum(axis=1).max())
    else:
        radius = float(np.abs(A).sum(axis=1).max())
    m = min(m, v.size)
    max_step = 0.25 * m / max(radius, 1e-300)
    nsteps = max(1, math.ceil(abs(t) / max_step))
    dt = t / nsteps
    out = v.copy()
    for _ in range(nsteps):
        out = _lanczos_step(A, out, dt, m, tol)
    return out


def _lanczos_step(A, v, dt, m, tol):
    beta0 = np.linalg.norm(v)
    V = np.zeros((v.size, m), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[:, 0] = v / beta0
    k = m
    for j in range(m):
        w = A @ V[:, j]
        alpha[j] = np.vdot(V[:, j], w).real
        w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        if j + 1 == m:
            break
        beta[j] = np.linalg.norm(w)
        if beta[j] < tol * max(abs(alpha[j]), 1.0):
            k = j + 1
            break
        V[:, j + 1] = w / beta[j]
    T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    evals, evecs = np.linalg.eigh(T)
    coeff = evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())
    return beta0 * (V[:, :k] @ coeff)


def unitary_exponential(A: LinearOperator, t: float, dense_threshold: int = DEFAULT_DENSE_THRESHOLD):
    """``exp(-i t A)`` for hermitian ``A``; an anti-hermitian ``A`` gives ``exp(t A)``.

    Dense eigendecomposition up to ``dense_threshold``, a :class:`KrylovPropagator`
    beyond it.
    """
    if A.hermitian or _is_hermitian(A.matrix):
        gen = A.matrix
    elif A.anti_hermitian or _is_hermitian(1j * A.matrix):
        # exp(t A) = exp(-i t (i A))
        gen = 1j * A.matrix
    else:
        raise ValueError("unitary_exponential needs a hermitian or anti-hermitian generator")
    herm = LinearOperator(A.basis, gen, hermitian=True)
    if A.dim > dense_threshold:
        return KrylovPropagator(herm, t)
    dense = gen.toarray() if sp.issparse(gen) else np.asarray(gen)
    dense = 0.5 * (dense + dense.conj().T)
    evals, evecs = np.linalg.eigh(dense)
    mat = (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T
    return LinearOperator(A.basis, mat)


def is_hermitian(op: LinearOperator, rtol: float = 1e-13) -> bool:
    return _is_hermitian(op.matrix, rtol)
