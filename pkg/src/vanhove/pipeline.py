"""Scenario orchestration: condition checks, model build, evolution, field verification, reports."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conditions as cond
from .evolution import (
    EvolutionContext,
    amplitude_bound_check,
    closed_form_amplitude,
    dressed_amplitude,
    initial_amplitude,
)
from .field import (
    bandlimited_source,
    classical_field,
    closed_form_sampler,
    fd_convergence,
    integrability_diagnostics,
    modewise_residual,
)
from .fock import (
    CapacityError,
    StateVector,
    build_basis,
    build_grid,
    is_hermitian,
    mode_creator,
    random_state,
    segal_momentum,
    vacuum,
)
from .model import (
    Dispersion,
    build_hamiltonian,
    diagonalization_check,
    dressing_operator,
    gaussian_source,
    ground_energy,
    neutral_gaussian_source,
    read_source_table,
    relative_bound_margins,
)
from .scenario import Scenario

log = logging.getLogger(__name__)

# exit status per failing stage
STATUS = {"conditions": 3, "model": 4, "evolution": 5, "field": 6, "budget": 7}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class Check:
    passed: bool
    value: float | None = None
    tolerance: float | None = None
    note: str = ""

    def as_dict(self):
        return {k: v for k, v in dict(passed=self.passed, value=self.value, tolerance=self.tolerance,
                                        note=self.note).items() if v not in (None, "")}


@dataclass
class StageResult:
    name: str
    checks: dict[str, Check] = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks.values())


@dataclass
class RunResult:
    status: int
    stages: list[StageResult]
    summary: dict


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------


def make_dispersion(sc: Scenario) -> Dispersion:
    return Dispersion.massive(sc.mass) if sc.dispersion == "massive" else Dispersion.massless()


def make_profile(sc: Scenario):
    if sc.source_kind == "gaussian":
        return gaussian_source(sc.A, sc.sigma, sc.lam, sc.dimension)
    if sc.source_kind == "neutral_gaussian":
        return neutral_gaussian_source(sc.A, sc.sigma, sc.lam, sc.dimension)
    prof = read_source_table(sc.table, lam=sc.lam)
    if prof.dimension != sc.dimension:
        raise ValueError(f"source table has dimension {prof.dimension}, scenario says {sc.dimension}")
    return prof


def make_grid(sc: Scenario, n: int | None = None, K: float | None = None):
    return build_grid(sc.dimension, sc.n if n is None else n, sc.K if K is None else K,
                      keep_origin=sc.keep_origin)


def make_points(sc: Scenario) -> np.ndarray:
    pts = np.zeros((sc.points, sc.dimension))
    pts[:, 0] = np.linspace(-sc.length / 2, sc.length / 2, sc.points) if sc.points > 1 else 0.0
    return pts


def read_state_file(path, basis) -> tuple[StateVector, StateVector]:
    """Rows ``phi|psi n_1 .. n_M Re Im``; unlisted occupations have amplitude 0."""
    amps = {"phi": np.zeros(len(basis), dtype=complex), "psi": np.zeros(len(basis), dtype=complex)}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] not in amps or len(parts) != basis.M + 3:
            raise ValueError(f"{path}:{lineno}: expected 'phi|psi' then {basis.M} occupations and Re Im")
        occ = [int(v) for v in parts[1:-2]]
        amps[parts[0]][basis.index(occ)] += float(parts[-2]) + 1j * float(parts[-1])
    return StateVector(basis, amps["phi"]), StateVector(basis, amps["psi"])


def make_states(sc: Scenario, basis) -> tuple[StateVector, StateVector]:
    if sc.pair == "dressed-vacuum":
        v = vacuum(basis)
        return v, v
    if sc.pair == "dressed-one-particle":
        if sc.mode >= basis.M:
            raise ValueError(f"mode {sc.mode} out of range for {basis.M} modes")
        # superposition with the vacuum; a bare one-particle state has F_0 = 0
        v = vacuum(basis)
        s = (v + mode_creator(basis, sc.mode) @ v) * (1 / math.sqrt(2.0))
        return s, s
    return read_state_file(sc.state_file, basis)


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _kcols(d):
    return [f"k{i + 1}" for i in range(d)]


def _xcols(d):
    return [f"x{i + 1}" for i in range(d)]


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def stage_conditions(sc: Scenario, profile, dispersion) -> tuple[StageResult, cond.ConditionReport]:
    st = StageResult("conditions")
    report = cond.check_conditions(profile, dispersion, sc.dimension)
    st.info["report"] = report.as_dict()
    violated = [n for n, r in report.results.items() if r.verdict == cond.VIOLATED]
    if sc.dispersion == "massless" and sc.dimension < 3:
        st.checks["dimension"] = Check(sc.allow_ir_risk, float(sc.dimension),
                                       note="massless field requires d ≥ 3")
    if sc.dispersion == "massless" and violated:
        st.checks["infrared"] = Check(sc.allow_ir_risk, note="violated: " + ", ".join(violated)
                                      + ("; overridden by allow_ir_risk" if sc.allow_ir_risk else ""))
    else:
        st.checks["infrared"] = Check(True, note="no violated condition" if not violated
                                      else "massive dispersion; violated: " + ", ".join(violated))
    return st, report


def stage_model(sc: Scenario, grid, profile, dispersion, rng):
    st = StageResult("model")
    basis = build_basis(grid.size, sc.N, max_size=sc.max_basis)
    ham = build_hamiltonian(grid, basis, dispersion, profile)
    st.info.update(modes=grid.size, basis_size=len(basis), energy_shift=ham.energy_shift)
    gen = segal_momentum(grid, basis, ham.dressing_function)
    st.checks["hermitian"] = Check(is_hermitian(ham.H) and is_hermitian(ham.H0) and is_hermitian(gen),
                                   tolerance=1e-13)
    probes = [random_state(basis, rng) for _ in range(sc.random_states)]
    worst = min(float(relative_bound_margins(ham, probes, eps).min()) for eps in (0.1, 1.0, 10.0))
    st.checks["relative_bound"] = Check(worst >= -1e-12 * max(1.0, abs(worst)), worst, 0.0,
                                        "min of rhs - lhs over probes and eps in {0.1, 1, 10}")
    U = dressing_operator(ham, dense_threshold=sc.dense_threshold)
    unit_err = max(abs((U @ p).norm() - 1.0) for p in probes[:5])
    st.checks["dressing_unitary"] = Check(unit_err <= 1e-10, unit_err, 1e-10)
    low = min(2, max(sc.N - 2, 0))
    low_probes = [random_state(basis, rng, max_total=low) for _ in range(min(5, sc.random_states))]
    diag = diagonalization_check(ham, U, low_probes)
    tol = sc.tolerances["diagonalization"]
    st.checks["diagonalization"] = Check(diag.max_residual <= tol, diag.max_residual, tol,
                                         f"probes on shells <= {low}")
    if len(basis) <= sc.dense_threshold:
        e0 = ground_energy(ham)
        st.info["ground_energy"] = e0
        st.checks["variational_ground_energy"] = Check(e0 >= ham.energy_shift - 1e-10, e0 - ham.energy_shift,
                                                       note="min eig(H) - E_shift, must be >= 0")
    return st, basis, ham, U


def stage_evolution(sc: Scenario, ham, U, phi, psi, out: Path):
    st = StageResult("evolution")
    grid = ham.grid
    overlap = phi.inner(psi)
    st.checks["pair_overlap"] = Check(abs(overlap - 1) <= 1e-10, abs(overlap - 1), 1e-10, "(Phi, Psi) = 1")
    if not st.checks["pair_overlap"].passed:
        return st, None, None
    ctx = EvolutionContext(ham, dense_threshold=sc.dense_threshold)
    F0_pq = initial_amplitude(grid, phi, psi, ("Phi", "Psi"))
    F0_qp = initial_amplitude(grid, psi, phi, ("Psi", "Phi"))
    errs, bound_ok = [], True
    rows = {"phi_psi": [], "psi_phi": []}
    closed_rows = {"phi_psi": [], "psi_phi": []}
    for t in sc.times:
        for key, (a, b, F0) in {"phi_psi": (phi, psi, F0_pq), "psi_phi": (psi, phi, F0_qp)}.items():
            num = dressed_amplitude(ctx, U, a, b, t, second_derivative=False)
            cf = closed_form_amplitude(grid, ham.dispersion, ham.profile, F0, t)
            errs.append(num.max_distance(cf))
            bound = amplitude_bound_check(ctx, num, U @ a, U @ b, t)
            bound_ok &= bound.holds
            for kvec, val in zip(grid.nodes, num.values):
                rows[key].append([float(t), *map(float, kvec), float(val.real), float(val.imag)])
            for kvec, val in zip(grid.nodes, cf.values):
                closed_rows[key].append([float(t), *map(float, kvec), float(val.real), float(val.imag)])
    header = ["t", *_kcols(grid.dimension), "re_F", "im_F"]
    for key in rows:
        write_csv(out / f"amplitudes_{key}.csv", header, rows[key])
        write_csv(out / f"amplitudes_closed_{key}.csv", header, closed_rows[key])
    tol = sc.tolerances["amplitude"]
    st.checks["closed_form_agreement"] = Check(max(errs) <= tol, max(errs), tol,
                                               "max node |F_numeric - F_closed| over times and both orderings")
    st.checks["amplitude_bound"] = Check(bool(bound_ok), note="weighted omega-norm of F <= ||Phi|| ||H0^1/2 Psi_t||")
    st.info["reconstruction_error"] = ctx.reconstruction_error()
    return st, F0_pq, F0_qp


def stage_field(sc: Scenario, grid, dispersion, profile, phi, psi, F0_pq, F0_qp, out: Path):
    st = StageResult("field")
    pts = make_points(sc)
    tol = sc.tolerances
    field_rows, res_rows = [], []
    worst, static_dev, imag_dev, scale = 0.0, 0.0, 0.0, 0.0
    first = None
    for t in sc.times:
        a = closed_form_amplitude(grid, dispersion, profile, F0_pq, t)
        b = closed_form_amplitude(grid, dispersion, profile, F0_qp, t)
        fs = classical_field(a, b, dispersion, pts)
        rep = modewise_residual(a, b, dispersion, profile, pts)
        scale = max(scale, rep.scale)
        worst = max(worst, rep.relative)
        if first is None:
            first = fs.values
        static_dev = max(static_dev, float(np.max(np.abs(fs.values - first))))
        imag_dev = max(imag_dev, float(np.max(np.abs(fs.values.imag))))
        for x, v in zip(pts, fs.values):
            field_rows.append([float(t), *map(float, x), float(v.real), float(v.imag)])
        for x, r in zip(pts, rep.residual):
            res_rows.append([float(t), *map(float, x), float(abs(r)), "modewise", ""])
    st.checks["modewise_residual"] = Check(worst <= tol["residual"], worst, tol["residual"],
                                           "max |residual| / field scale")
    rel = scale if scale > 0 else 1.0
    if sc.pair == "dressed-vacuum":
        st.checks["static_field"] = Check(static_dev <= tol["static"] * rel, static_dev / rel, tol["static"])
    if np.array_equal(phi.amplitudes, psi.amplitudes):
        st.checks["real_field"] = Check(imag_dev <= tol["reality"] * rel, imag_dev / rel, tol["reality"])
    st.info["field_scale"] = scale

    sampler = closed_form_sampler(grid, dispersion, profile, F0_pq, F0_qp)
    t_fd = sc.times[-1]
    ladder = fd_convergence(sampler, profile, grid, pts, t_fd, sc.fd_steps, dispersion.mass)
    for h, rep in zip(ladder.steps, ladder.reports):
        for x, r in zip(pts, rep.residual):
            res_rows.append([float(t_fd), *map(float, x), float(abs(r)), "finite-difference", float(h)])
    if max(ladder.norms) == 0.0:
        # a vanishing field has no truncation error to measure
        st.checks["fd_order"] = Check(True, note="field vanishes; residual exactly zero on every step")
    else:
        order_ok = all(abs(p - 2.0) <= tol["fd_order"] for p in ladder.orders)
        st.checks["fd_order"] = Check(order_ok, ladder.order, tol["fd_order"],
                                      "orders " + ", ".join(f"{p:.4f}" for p in ladder.orders))
    st.info["fd_norms"] = ladder.norms

    worst_int = min(
        (r.rhs - r.lhs for l in (0, 1, 2) for r in [integrability_diagnostics(F0_pq, grid, dispersion, l, phi, psi)]),
    )
    st.checks["integrability_bound"] = Check(worst_int >= 0, worst_int, 0.0, "min rhs - lhs over l = 0, 1, 2")

    if profile.rho is not None:
        origin = np.zeros((1, grid.dimension))
        rho0 = float(profile.rho_at(origin)[0])
        rhon = bandlimited_source(profile, grid, origin)[0]
        st.info["rho_N_origin_error"] = abs(rhon - rho0) / abs(rho0) if rho0 else abs(rhon)

    d = grid.dimension
    write_csv(out / "field.csv", ["t", *_xcols(d), "re_phi", "im_phi"], field_rows)
    write_csv(out / "residuals.csv", ["t", *_xcols(d), "residual", "method", "h"], res_rows)
    return st


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------


def _summary(sc: Scenario, stages: list[StageResult], status: int, seed: int) -> dict:
    return {
        "scenario": str(sc.path) if sc.path else None,
        "seed": seed,
        "exit_status": status,
        "passed": status == 0,
        "stages": {
            s.name: {
                "passed": s.passed,
                "error": s.error,
                "checks": {k: c.as_dict() for k, c in s.checks.items()},
                "info": s.info,
            }
            for s in stages
        },
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_summary(path: Path, summary: dict) -> None:
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


def run_conditions(sc: Scenario, out: Path | None = None) -> RunResult:
    profile, dispersion = make_profile(sc), make_dispersion(sc)
    st, _ = stage_conditions(sc, profile, dispersion)
    status = 0 if st.passed else STATUS["conditions"]
    summary = _summary(sc, [st], status, sc.seed)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_summary(out / "conditions.json", st.info["report"])
    return RunResult(status, [st], summary)


def run_scenario(sc: Scenario, out: Path | None = None) -> RunResult:
    """Full pipeline; the exit status is 0 iff every enabled check passed."""
    out = Path(out or sc.output)
    out.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    rng = np.random.default_rng(sc.seed)
    stages: list[StageResult] = []
    status = 0

    def over_budget():
        return time.monotonic() - start > sc.wall_budget

    profile, dispersion = make_profile(sc), make_dispersion(sc)
    grid = make_grid(sc)

    st, report = stage_conditions(sc, profile, dispersion)
    stages.append(st)
    write_summary(out / "conditions.json", st.info["report"])
    if not st.passed:
        log.error("infrared check failed for a massless field; aborting before evolution")
        status = STATUS["conditions"]
    else:
        try:
            st, basis, ham, U = stage_model(sc, grid, profile, dispersion, rng)
        except CapacityError as exc:
            st = StageResult("model", error=str(exc))
            basis = None
        stages.append(st)
        if not st.passed:
            status = STATUS["model"]
        if basis is not None and not over_budget():
            phi, psi = make_states(sc, basis)
            st, F0_pq, F0_qp = stage_evolution(sc, ham, U, phi, psi, out)
            stages.append(st)
            if not st.passed and status == 0:
                status = STATUS["evolution"]
            if F0_pq is not None and not over_budget():
                st = stage_field(sc, grid, dispersion, profile, phi, psi, F0_pq, F0_qp, out)
                stages.append(st)
                if not st.passed and status == 0:
                    status = STATUS["field"]
        if over_budget() and status == 0:
            stages.append(StageResult("budget", error=f"wall budget of {sc.wall_budget}s exceeded"))
            status = STATUS["budget"]

    summary = _summary(sc, stages, status, sc.seed)
    write_summary(out / "summary.json", summary)
    return RunResult(status, stages, summary)


# --------------------------------------------------------------------------
# convergence sweeps
# --------------------------------------------------------------------------

DEFAULT_LADDERS = {
    "N": lambda sc: [max(1, sc.N - 2), max(2, sc.N - 1), max(3, sc.N)],
    "n": lambda sc: [sc.n, 2 * sc.n, 4 * sc.n],
    "K": lambda sc: [sc.K, 1.5 * sc.K, 2 * sc.K],
    "h": lambda sc: list(sc.fd_steps),
}


@dataclass
class SweepTable:
    axis: str
    header: list[str]
    rows: list[list]
    monotone: dict[str, bool]
    truncated: bool = False


def _strictly_decreasing(values) -> bool:
    vals = [v for v in values if v is not None]
    return all(b < a for a, b in zip(vals, vals[1:]))


def convergence_sweep(sc: Scenario, axis: str, ladder=None) -> SweepTable:
    if axis not in DEFAULT_LADDERS:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from N, n, K, h")
    ladder = list(ladder or sc.sweep.get(axis) or DEFAULT_LADDERS[axis](sc))
    if len(ladder) < 3:
        raise ValueError("a sweep ladder needs at least 3 values")
    profile, dispersion = make_profile(sc), make_dispersion(sc)
    pts = make_points(sc)
    rows, truncated = [], False

    if axis == "N":
        grid = make_grid(sc)
        header = ["N", "basis_size", "amplitude_error", "diagonalization_residual", "status"]
        for N in ladder:
            try:
                basis = build_basis(grid.size, int(N), max_size=sc.max_basis)
            except CapacityError as exc:
                rows.append([int(N), "", "", "", f"truncated: {exc}"])
                truncated = True
                break
            ham = build_hamiltonian(grid, basis, dispersion, profile)
            U = dressing_operator(ham, dense_threshold=sc.dense_threshold)
            ctx = EvolutionContext(ham, dense_threshold=sc.dense_threshold)
            phi, psi = make_states(sc, basis)
            F0 = initial_amplitude(grid, phi, psi)
            err = max(
                dressed_amplitude(ctx, U, phi, psi, t, second_derivative=False).max_distance(
                    closed_form_amplitude(grid, dispersion, profile, F0, t))
                for t in sc.times
            )
            # fixed low-shell probes so every rung tests the same states
            probes = [vacuum(basis)]
            if basis.N >= 2:
                probes.append(mode_creator(basis, 0) @ vacuum(basis))
            diag = diagonalization_check(ham, U, probes).max_residual
            rows.append([int(N), len(basis), err, diag, "ok"])
        metrics = {"amplitude_error": 2, "diagonalization_residual": 3}
    elif axis in ("n", "K"):
        header = [axis, "modes", "rho_N_origin_error", "modewise_residual", "status"]
        origin = np.zeros((1, sc.dimension))
        rho0 = float(profile.rho_at(origin)[0]) if profile.rho is not None else None
        for val in ladder:
            if axis == "n":
                grid = make_grid(sc, n=int(val))
            else:
                # keep the step fixed while the box grows
                grid = make_grid(sc, n=max(1, round(sc.n * val / sc.K)), K=val)
            rhon = bandlimited_source(profile, grid, origin)[0]
            err = abs(rhon - rho0) / abs(rho0) if rho0 else None
            basis = build_basis(grid.size, 1, max_size=sc.max_basis)
            v = vacuum(basis)
            F0 = initial_amplitude(grid, v, v)
            a = closed_form_amplitude(grid, dispersion, profile, F0, sc.times[0])
            res = modewise_residual(a, a, dispersion, profile, pts).relative
            rows.append([val, grid.size, err, res, "ok"])
        metrics = {"rho_N_origin_error": 2}
    else:
        grid = make_grid(sc)
        basis = build_basis(grid.size, 1, max_size=sc.max_basis)
        v = vacuum(basis)
        if sc.pair == "dressed-one-particle":
            s = (v + mode_creator(basis, min(sc.mode, basis.M - 1)) @ v) * (1 / math.sqrt(2.0))
        else:
            s = v
        F0 = initial_amplitude(grid, s, s)
        sampler = closed_form_sampler(grid, dispersion, profile, F0, F0)
        lad = fd_convergence(sampler, profile, grid, pts, sc.times[-1], ladder, dispersion.mass)
        header = ["h", "fd_residual", "order"]
        orders = [None] + lad.orders
        for h, nrm, p in zip(lad.steps, lad.norms, orders):
            rows.append([h, nrm, p if p is not None else ""])
        metrics = {"fd_residual": 1}

    monotone = {name: _strictly_decreasing([r[i] for r in rows if isinstance(r[i], float)])
                for name, i in metrics.items()}
    return SweepTable(axis, header, rows, monotone, truncated)


def write_sweep(table: SweepTable, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{table.axis}.csv"
    write_csv(path, table.header, table.rows)
    return path
