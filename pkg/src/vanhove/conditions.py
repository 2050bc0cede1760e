"""Numerical verdicts on the integrability conditions a source must meet.

Each condition is an integral over momentum (or position) space.  It is
estimated by midpoint quadrature on a ladder of cell-centred grids whose step
halves at every rung; the smallest node distance to the origin halves with it,
so an integrable singularity at ``k = 0`` produces successive differences that
shrink geometrically, while a divergent one does not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fock import build_grid
from .model import Dispersion, ProfileError, SourceProfile

SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

# successive-difference ratio separating convergent from divergent ladders
CONVERGENT_RATIO = 0.75
DIVERGENT_RATIO = 0.9

# name -> (which hypothesis, description)
CONDITIONS = {
    "rho_L1": ("A.1", "rho in L1(x)"),
    "rho_hat_over_omega^1/2_L2": ("A.1", "rho_hat / omega^(1/2) in L2"),
    "rho_hat_over_omega_L2": ("A.1", "rho_hat / omega in L2"),
    "rho_hat_over_omega^3/2_L2": ("A.2", "rho_hat / omega^(3/2) in L2 (infrared regularity)"),
    "rho_hat_L1": ("A.2", "rho_hat in L1"),
    "rho_hat_over_omega^2_L1": ("A.2", "rho_hat / omega^2 in L1"),
    "rho_hat_L2": ("-", "rho_hat in L2 (unweighted reference)"),
}


@dataclass
class ConditionResult:
    name: str
    hypothesis: str
    values: list[float]
    steps: list[float]
    ratios: list[float]
    verdict: str
    note: str = ""


@dataclass
class ConditionReport:
    dimension: int
    dispersion: Dispersion
    results: dict[str, ConditionResult] = field(default_factory=dict)
    small_k_exponent: float | None = None

    def verdict(self, name: str) -> str:
        return self.results[name].verdict

    def hypothesis_verdict(self, hypothesis: str) -> str:
        verdicts = [r.verdict for r in self.results.values() if r.hypothesis == hypothesis]
        if any(v == VIOLATED for v in verdicts):
            return VIOLATED
        if all(v == SATISFIED for v in verdicts):
            return SATISFIED
        return INCONCLUSIVE

    @property
    def all_satisfied(self) -> bool:
        return all(r.verdict == SATISFIED for r in self.results.values())

    @property
    def any_violated(self) -> bool:
        return any(r.verdict == VIOLATED for r in self.results.values())

    def as_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "dispersion": {"kind": self.dispersion.kind, "mass": self.dispersion.mass},
            "small_k_exponent": self.small_k_exponent,
            "conditions": {
                name: {
                    "hypothesis": r.hypothesis,
                    "verdict": r.verdict,
                    "values": r.values,
                    "steps": r.steps,
                    "ratios": r.ratios,
                    "note": r.note,
                }
                for name, r in self.results.items()
            },
        }


def cauchy_verdict(values: Sequence[float], rtol: float = 1e-10) -> tuple[str, list[float]]:
    """Classify a refinement ladder by the ratios of its successive differences."""
    vals = np.asarray(values, dtype=float)
    if len(vals) < 3 or not np.all(np.isfinite(vals)):
        return INCONCLUSIVE, []
    diffs = np.abs(np.diff(vals))
    floor = rtol * max(np.max(np.abs(vals)), 1e-300)
    ratios = [float(b / a) if a > floor else 0.0 for a, b in zip(diffs[:-1], diffs[1:])]
    if diffs[-1] <= floor:
        return SATISFIED, ratios
    last = ratios[-1]
    if last <= CONVERGENT_RATIO and all(r <= DIVERGENT_RATIO for r in ratios[-2:]):
        return SATISFIED, ratios
    growing = np.all(np.diff(vals) > 0) or np.all(np.diff(vals) < 0)
    if last >= DIVERGENT_RATIO and growing:
        return VIOLATED, ratios
    return INCONCLUSIVE, ratios


def quadrature_ladder(integrand: Callable[[np.ndarray], np.ndarray], d: int, K: float,
                      ns: Sequence[int]) -> tuple[list[float], list[float]]:
    """Midpoint sums of ``integrand`` over ``[-K, K]^d`` for each per-axis cell count."""
    values, steps = [], []
    for n in ns:
        grid = build_grid(d, n, K)
        vals = integrand(grid.nodes)
        if not np.all(np.isfinite(vals)):
            raise ProfileError("integrand is not finite away from the origin")
        values.append(float(np.sum(grid.weights * vals)))
        steps.append(2.0 * K / n)
    return values, steps


def default_ladder(d: int) -> list[int]:
    return {1: [64, 128, 256, 512, 1024], 2: [32, 64, 128, 256]}.get(d, [8, 16, 32, 64])


def small_k_exponent(profile: SourceProfile, rmin: float = 1e-4, rmax: float = 1e-2) -> float:
    """Least-squares slope of ``log|rho_hat|`` against ``log|k|`` near the origin."""
    r = np.geomspace(rmin, rmax, 9) / profile.scale
    k = np.zeros((len(r), profile.dimension))
    k[:, 0] = r
    mag = np.abs(profile.rho_hat_at(k))
    if np.any(mag == 0):
        return float("inf")
    slope = np.polyfit(np.log(r), np.log(mag), 1)[0]
    return float(slope)


def check_conditions(profile: SourceProfile, dispersion: Dispersion, d: int | None = None,
                     ladder: Sequence[int] | None = None, K: float | None = None) -> ConditionReport:
    d = profile.dimension if d is None else d
    if d != profile.dimension:
        raise ValueError("dimension does not match the profile")
    ladder = list(ladder or default_ladder(d))
    if len(ladder) < 4:
        raise ValueError("refinement ladder needs at least 4 grids")
    K = 8.0 / profile.scale if K is None else K

    # (power of |rho_hat|, power of omega) per momentum-space condition
    powers = {
        "rho_hat_over_omega^1/2_L2": (2, 1),
        "rho_hat_over_omega_L2": (2, 2),
        "rho_hat_over_omega^3/2_L2": (2, 3),
        "rho_hat_L1": (1, 0),
        "rho_hat_over_omega^2_L1": (1, 2),
        "rho_hat_L2": (2, 0),
    }
    sums = {name: [] for name in powers}
    steps = []
    for n in ladder:
        grid = build_grid(d, n, K)
        mag = np.abs(profile.rho_hat_at(grid.nodes))
        omega = dispersion(grid.nodes)
        for name, (p, q) in powers.items():
            vals = mag**p / omega**q
            if not np.all(np.isfinite(vals)):
                raise ProfileError(f"{name}: integrand is not finite away from the origin")
            sums[name].append(float(np.sum(grid.weights * vals)))
        steps.append(2.0 * K / n)

    report = ConditionReport(d, dispersion)
    for name, (hyp, _) in CONDITIONS.items():
        if name == "rho_L1":
            if profile.rho is None:
                report.results[name] = ConditionResult(name, hyp, [], [], [], INCONCLUSIVE,
                                                       "no position-space density available")
                continue
            L = 8.0 * profile.scale
            values, xsteps = quadrature_ladder(lambda x: np.abs(profile.rho_at(x)), d, L, ladder)
        else:
            values, xsteps = sums[name], steps
        verdict, ratios = cauchy_verdict(values)
        report.results[name] = ConditionResult(name, hyp, values, xsteps, ratios, verdict)
    report.small_k_exponent = small_k_exponent(profile)
    return report
